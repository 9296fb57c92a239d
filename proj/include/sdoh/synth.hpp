#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sdoh/error.hpp"
#include "sdoh/rng.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/types.hpp"
#include "sdoh/utf8.hpp"

// Deterministic synthetic annotated-corpus generator. Every pipeline stage
// is testable against its gold output; `shift` swaps surface lexicons for a
// disjoint alternate vocabulary to emulate a new disease domain while
// keeping the annotation structure fixed.

namespace sdoh {

struct AttributeSlot {
  std::string key;       // placeholder name, e.g. "amount"
  std::string category;  // attribute category, e.g. "Amount"
  std::vector<std::string> primary;
  std::vector<std::string> shifted;
};

struct TemplateSpec {
  std::string category;  // concept category this template instantiates
  std::vector<std::string> triggers;
  std::vector<std::string> shifted_triggers;
  std::vector<AttributeSlot> slots;
  std::vector<std::string> carriers;  // sentences with {trigger} / {slot key} placeholders
};

namespace detail {

struct CarrierPiece {
  bool placeholder = false;
  std::string text;  // literal text or placeholder name
};

inline std::vector<CarrierPiece> parse_carrier(const std::string& carrier) {
  std::vector<CarrierPiece> pieces;
  std::size_t pos = 0;
  while (pos < carrier.size()) {
    const std::size_t open = carrier.find('{', pos);
    if (open == std::string::npos) {
      pieces.push_back({false, carrier.substr(pos)});
      break;
    }
    if (open > pos) pieces.push_back({false, carrier.substr(pos, open - pos)});
    const std::size_t close = carrier.find('}', open);
    if (close == std::string::npos)
      raise("PlaceholderMismatch", "unterminated placeholder in carrier '" + carrier + "'");
    pieces.push_back({true, carrier.substr(open + 1, close - open - 1)});
    pos = close + 1;
  }
  return pieces;
}

inline void check_template(const TemplateSpec& t, const SDoHSchema& schema) {
  const CategoryInfo* info = schema.find(t.category);
  if (!info || info->role != Role::Concept)
    raise("TemplateCoverageGap",
          "template category '" + t.category + "' is not a declared concept category");
  if (t.triggers.empty() || t.shifted_triggers.empty())
    raise("EmptyPhrasePool", "template '" + t.category + "' needs primary and shifted triggers");
  std::set<std::string> keys;
  for (const auto& slot : t.slots) {
    const CategoryInfo* a = schema.find(slot.category);
    if (!a || a->role != Role::Attribute)
      raise("IncompatibleTemplateSlot",
            "slot '" + slot.key + "' of template '" + t.category +
                "' names unknown attribute category '" + slot.category + "'");
    if (schema.allowed_rel_types(slot.category, t.category).empty())
      raise("IncompatibleTemplateSlot", "schema permits no relation between '" + slot.category +
                                            "' and '" + t.category + "'");
    if (slot.primary.empty() || slot.shifted.empty())
      raise("EmptyPhrasePool",
            "slot '" + slot.key + "' of template '" + t.category + "' has an empty pool");
    if (!keys.insert(slot.key).second)
      raise("PlaceholderMismatch", "duplicate slot key '" + slot.key + "'");
  }
  if (t.carriers.empty())
    raise("PlaceholderMismatch", "template '" + t.category + "' has no carrier sentences");
  for (const auto& carrier : t.carriers) {
    int trigger_count = 0;
    for (const auto& piece : parse_carrier(carrier)) {
      if (!piece.placeholder) continue;
      if (piece.text == "trigger") {
        ++trigger_count;
      } else if (!keys.count(piece.text)) {
        raise("PlaceholderMismatch",
              "carrier '" + carrier + "' references unknown placeholder '" + piece.text + "'");
      }
    }
    if (trigger_count != 1)
      raise("PlaceholderMismatch",
            "carrier '" + carrier + "' must contain {trigger} exactly once");
  }
}

}  // namespace detail

// Verifies the lexical preconditions for separable-corpus runs: trigger
// pools pairwise disjoint across concept categories, attribute pools
// disjoint across attribute categories, triggers disjoint from attribute
// pools, and each category's primary and shifted pools disjoint from each
// other. Collisions are reported, not thrown.
struct SeparabilityReport {
  std::vector<std::string> collisions;
  bool ok() const { return collisions.empty(); }
};

inline SeparabilityReport separability_check(const std::vector<TemplateSpec>& templates) {
  SeparabilityReport report;

  std::map<std::string, std::set<std::string>> trigger_pool;   // concept category -> phrases
  std::map<std::string, std::set<std::string>> attribute_pool; // attribute category -> phrases
  for (const auto& t : templates) {
    auto& pool = trigger_pool[t.category];
    pool.insert(t.triggers.begin(), t.triggers.end());
    pool.insert(t.shifted_triggers.begin(), t.shifted_triggers.end());
    for (const auto& s : t.slots) {
      auto& apool = attribute_pool[s.category];
      apool.insert(s.primary.begin(), s.primary.end());
      apool.insert(s.shifted.begin(), s.shifted.end());
    }
  }

  auto cross = [&](const auto& pools, const char* what) {
    for (auto a = pools.begin(); a != pools.end(); ++a)
      for (auto b = std::next(a); b != pools.end(); ++b)
        for (const auto& phrase : a->second)
          if (b->second.count(phrase))
            report.collisions.push_back(std::string(what) + " '" + phrase + "' shared by '" +
                                        a->first + "' and '" + b->first + "'");
  };
  cross(trigger_pool, "trigger");
  cross(attribute_pool, "attribute phrase");

  for (const auto& [concept_cat, triggers] : trigger_pool)
    for (const auto& [attr_cat, phrases] : attribute_pool)
      for (const auto& phrase : triggers)
        if (phrases.count(phrase))
          report.collisions.push_back("phrase '" + phrase + "' is both a trigger of '" +
                                      concept_cat + "' and an attribute phrase of '" + attr_cat +
                                      "'");

  for (const auto& t : templates) {
    for (const auto& trig : t.triggers)
      if (std::find(t.shifted_triggers.begin(), t.shifted_triggers.end(), trig) !=
          t.shifted_triggers.end())
        report.collisions.push_back("trigger '" + trig + "' of '" + t.category +
                                    "' appears in both the primary and shifted pool");
    for (const auto& s : t.slots)
      for (const auto& phrase : s.primary)
        if (std::find(s.shifted.begin(), s.shifted.end(), phrase) != s.shifted.end())
          report.collisions.push_back("attribute phrase '" + phrase + "' of slot '" + s.key +
                                      "' appears in both the primary and shifted pool");
  }
  return report;
}

// Deterministic given (schema, templates, n_docs, seed, shift). Documents
// draw 1-5 carrier sentences; each sentence instantiates one template with
// exact gold offsets computed during rendering, and gold relations link
// every instantiated attribute to its trigger. Per-document RNG streams
// make generation order-independent.
inline std::vector<AnnotatedDoc> generate_corpus(const SDoHSchema& schema,
                                                 const std::vector<TemplateSpec>& templates,
                                                 std::size_t n_docs, std::uint64_t seed,
                                                 double shift,
                                                 const std::string& domain = "synthetic") {
  if (n_docs < 1) raise("InvalidConfig", "n_docs must be >= 1");
  if (!(shift >= 0.0 && shift <= 1.0)) raise("InvalidConfig", "shift must lie in [0,1]");
  if (templates.empty()) raise("TemplateCoverageGap", "no templates supplied");
  std::set<std::string> covered;
  for (const auto& t : templates) {
    detail::check_template(t, schema);
    covered.insert(t.category);
  }
  for (const auto& c : schema.categories)
    if (c.role == Role::Concept && !covered.count(c.name))
      raise("TemplateCoverageGap", "no template covers concept category '" + c.name + "'");

  std::vector<AnnotatedDoc> docs;
  docs.reserve(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    Rng rng(Rng::mix(seed, d));
    AnnotatedDoc ad;
    char doc_id[32], patient_id[32];
    std::snprintf(doc_id, sizeof doc_id, "synth-%05zu", d);
    std::snprintf(patient_id, sizeof patient_id, "pt-%05zu", d / 3);
    ad.doc.doc_id = doc_id;
    ad.doc.patient_id = patient_id;
    ad.doc.domain = Domain::parse(domain);

    std::string text;
    std::size_t scalar_pos = 0;
    auto emit = [&](const std::string& chunk) {
      text += chunk;
      scalar_pos += utf8::length(chunk);
    };

    const std::size_t n_sentences = 1 + rng.bounded(5);
    for (std::size_t s = 0; s < n_sentences; ++s) {
      const TemplateSpec& t = templates[rng.bounded(templates.size())];
      const std::string& carrier = t.carriers[rng.bounded(t.carriers.size())];

      auto draw = [&](const std::vector<std::string>& primary,
                      const std::vector<std::string>& shifted) -> const std::string& {
        const bool use_shifted = rng.uniform01() < shift;
        const std::vector<std::string>& pool = use_shifted ? shifted : primary;
        return pool[rng.bounded(pool.size())];
      };

      std::size_t trigger_entity = 0;
      bool trigger_seen = false;
      std::vector<std::pair<std::size_t, std::string>> pending;  // (attr entity idx, rel type)

      for (const auto& piece : detail::parse_carrier(carrier)) {
        if (!piece.placeholder) {
          emit(piece.text);
          continue;
        }
        const std::size_t start = scalar_pos;
        std::string category;
        std::string rel_type;
        if (piece.text == "trigger") {
          emit(draw(t.triggers, t.shifted_triggers));
          category = t.category;
        } else {
          const AttributeSlot* slot = nullptr;
          for (const auto& s2 : t.slots)
            if (s2.key == piece.text) slot = &s2;
          emit(draw(slot->primary, slot->shifted));
          category = slot->category;
          rel_type = schema.allowed_rel_types(slot->category, t.category).front();
        }
        EntityAnnotation e;
        e.id = "T" + std::to_string(ad.entities.size() + 1);
        e.category = category;
        e.start = start;
        e.end = scalar_pos;
        e.surface = utf8::slice(text, start, scalar_pos);
        if (piece.text == "trigger") {
          trigger_entity = ad.entities.size();
          trigger_seen = true;
        } else {
          pending.emplace_back(ad.entities.size(), rel_type);
        }
        ad.entities.push_back(std::move(e));
      }
      emit("\n");

      for (const auto& [attr_idx, rel_type] : pending) {
        (void)trigger_seen;  // guaranteed by check_template
        RelationAnnotation r;
        r.id = "R" + std::to_string(ad.relations.size() + 1);
        r.rel_type = rel_type;
        r.head = ad.entities[attr_idx].id;
        r.tail = ad.entities[trigger_entity].id;
        ad.relations.push_back(std::move(r));
      }
    }
    ad.doc.text = std::move(text);
    docs.push_back(std::move(ad));
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Default templates: one per concept category of the default schema.
// Phrase pools are invented; the vocabulary is designed so that no surface
// word occurs under two different categories, which is what makes the
// generated corpora separable-by-construction.

inline std::vector<TemplateSpec> default_templates() {
  const AttributeSlot tobacco_type{"type", "Type", {"cigarettes", "cigars"},
                                   {"menthol sticks", "loose leaf"}};
  const AttributeSlot alcohol_type{"type", "Type", {"vodka", "lager"}, {"bourbon", "cider"}};
  const AttributeSlot drug_type{"type", "Type", {"edibles", "powder"}, {"crystals", "tablets"}};
  const AttributeSlot tobacco_amount{"amount", "Amount", {"1 packs/day", "2 packs/day"},
                                     {"14 pods/week", "5 tins/week"}};
  const AttributeSlot alcohol_amount{"amount", "Amount", {"6 drinks/night", "3 beers/night"},
                                     {"9 shots/sitting", "4 glasses/sitting"}};
  const AttributeSlot drug_amount{"amount", "Amount", {"3 doses/day"}, {"8 hits/week"}};
  const AttributeSlot frequency{"frequency", "Frequency", {"four times per year", "twice monthly"},
                                {"thrice quarterly", "most evenings"}};
  const AttributeSlot duration{"duration", "Duration", {"46 years", "12 years", "30 years"},
                               {"19 winters", "11 seasons"}};

  std::vector<TemplateSpec> templates;

  templates.push_back({"Financial constraint",
                       {"financial hardship", "cannot afford copays"},
                       {"money troubles", "overdue debts"},
                       {},
                       {"Patient describes {trigger} since the last visit.",
                        "Intake notes mention {trigger} again."}});

  templates.push_back({"Employment",
                       {"construction electrician", "retail cashier"},
                       {"shipyard welder", "freelance illustrator"},
                       {duration},
                       {"Patient has been a {trigger} for {duration}.",
                        "Works as a {trigger} currently."}});

  templates.push_back({"Language",
                       {"español speaker", "mandarin speaker"},
                       {"turkish interpreter", "farsi interpreter"},
                       {},
                       {"Patient is a {trigger} at home.",
                        "Clinic intake documented a {trigger} today."}});

  templates.push_back({"Education",
                       {"college graduate", "ninth grade schooling"},
                       {"vocational diploma", "doctoral degree"},
                       {},
                       {"Patient is a {trigger}.", "History notes a {trigger} background."}});

  templates.push_back({"Physical activity",
                       {"treadmill workouts", "morning aerobics"},
                       {"weekend hiking", "pilates classes"},
                       {frequency},
                       {"Patient enjoys {trigger} about {frequency}.",
                        "Reports {trigger} at the clinic gym."}});

  templates.push_back({"SDoH ICD",
                       {"zcode z59", "zcode z60"},
                       {"zflag z55", "zflag z65"},
                       {},
                       {"Chart carries {trigger} from the billing review.",
                        "Assessment documented {trigger}."}});

  templates.push_back({"Sexual activity",
                       {"sexually active", "monogamous partnership"},
                       {"celibate lifestyle", "abstinence maintained"},
                       {frequency},
                       {"Patient is {trigger}, reportedly {frequency}.",
                        "Screening notes {trigger}."}});

  templates.push_back({"Drug use",
                       {"recreational cannabis", "intravenous narcotics"},
                       {"methamphetamine habit", "opiate dependence"},
                       {drug_type, drug_amount, duration},
                       {"Patient admits {trigger}, taking {type} at {amount} for {duration}.",
                        "History of {trigger} noted at intake."}});

  templates.push_back({"Tobacco use",
                       {"everyday smoker", "former smoker"},
                       {"nicotine vaper", "smokeless chewer"},
                       {tobacco_type, tobacco_amount, duration},
                       {"Patient is an {trigger}, smokes {type} at {amount} for the last {duration}.",
                        "Tobacco screening: {trigger} since {duration}.",
                        "Patient remains an {trigger} today."}});

  templates.push_back({"Alcohol use",
                       {"occasional drinker", "heavy drinker"},
                       {"binge drinking", "newly sober"},
                       {alcohol_type, alcohol_amount, frequency},
                       {"Patient is an {trigger}, takes {type} at {amount} about {frequency}.",
                        "Alcohol screening noted {trigger}."}});

  templates.push_back({"Marital status",
                       {"happily married", "recently divorced"},
                       {"widowed spouse", "lifelong bachelor"},
                       {},
                       {"Patient is {trigger}.", "Social summary: {trigger}."}});

  templates.push_back({"Social cohesion",
                       {"attends religious services", "church volunteer"},
                       {"community bingo nights", "neighborhood potlucks"},
                       {frequency},
                       {"Patient {trigger} about {frequency}.",
                        "Social summary mentions {trigger}."}});

  templates.push_back({"Abuse (physical or mental)",
                       {"verbal abuse", "domestic violence"},
                       {"emotional mistreatment", "physical intimidation"},
                       {},
                       {"Patient reports {trigger} at home.",
                        "Screening flagged {trigger} today."}});

  templates.push_back({"Transportation",
                       {"lacks bus fare", "missed rides"},
                       {"transit barriers", "carpool shortage"},
                       {},
                       {"Patient {trigger} for the clinic visit.",
                        "Follow up delayed: {trigger}."}});

  templates.push_back({"Living supply",
                       {"food insecurity", "empty pantry"},
                       {"utility shutoff", "groceries scarce"},
                       {},
                       {"Patient reports {trigger} this month.",
                        "Intake assessment flagged {trigger}."}});

  templates.push_back({"Living condition",
                       {"homeless shelter resident", "crowded apartment"},
                       {"substandard housing", "mold infested unit"},
                       {},
                       {"Patient is a {trigger} now.", "Residence review: {trigger}."}});

  templates.push_back({"Gender",
                       {"male", "female"},
                       {"transgender man", "nonbinary person"},
                       {},
                       {"Patient identifies as {trigger}.", "Chart lists {trigger}."}});

  templates.push_back({"Race",
                       {"caucasian", "black"},
                       {"asian", "pacific islander"},
                       {},
                       {"Patient self reported {trigger}.", "Registry lists {trigger}."}});

  templates.push_back({"Ethnicity",
                       {"hispanic", "latino"},
                       {"nonhispanic", "creole descent"},
                       {},
                       {"Patient identifies as {trigger} on the intake form.",
                        "Registry records {trigger}."}});

  return templates;
}

}  // namespace sdoh
