#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sdoh/linear_model.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/scorer.hpp"
#include "sdoh/textproc.hpp"
#include "sdoh/types.hpp"

// Relation-classification stage: enumerate (attribute, concept) candidate
// pairs within a sentence window, classify each into a relation type or
// NONE, and keep at most one concept per attribute.

namespace sdoh {

inline const std::string kNoRelation = "NONE";

struct CandidatePair {
  EntityAnnotation attribute;
  EntityAnnotation concept_entity;
  std::size_t attribute_index = 0;  // into the entity list handed to generate_candidates
  std::size_t concept_index = 0;
  int sentence_distance = 0;
  int token_distance = 0;  // tokens strictly between the two entities
  bool attribute_first = false;
  std::string doc_id;
  // token alignment, for featurization
  std::size_t attr_first_tok = 0, attr_last_tok = 0;
  std::size_t conc_first_tok = 0, conc_last_tok = 0;
};

struct PairClassifierModel {
  LinearModel lm;
  std::vector<std::string> train_warnings;  // e.g. NoPositiveExamples; not serialized

  bool trained() const { return lm.trained; }
  void save_file(const std::filesystem::path& p) const { lm.save_file(p); }
  static PairClassifierModel load_file(const std::filesystem::path& p) {
    PairClassifierModel m{LinearModel::load_file(p), {}};
    if (m.lm.component != "re")
      raise("ModelFormat", "expected an re model, found component '" + m.lm.component + "'");
    return m;
  }
};

// All (attribute, concept) pairs whose categories the schema permits and
// whose sentence distance is within the window, ordered by attribute start
// then concept start. Entities that overlap no token are skipped.
inline std::vector<CandidatePair> generate_candidates(const Document& doc,
                                                      const std::vector<Token>& tokens,
                                                      const std::vector<EntityAnnotation>& entities,
                                                      const SDoHSchema& schema,
                                                      int max_sentence_distance = 1) {
  struct Aligned {
    std::size_t index;
    std::size_t first_tok, last_tok;
    std::size_t sentence;
  };
  std::vector<Aligned> attrs, concepts;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const CategoryInfo* info = schema.find(entities[i].category);
    if (!info) raise("UnknownCategory", "category '" + entities[i].category + "'");
    const auto [lo, hi] = overlapping_token_range(tokens, entities[i].start, entities[i].end);
    if (lo > hi) continue;
    const Aligned a{i, lo, hi, tokens[lo].sentence_index};
    (info->role == Role::Attribute ? attrs : concepts).push_back(a);
  }

  std::vector<CandidatePair> out;
  for (const Aligned& a : attrs) {
    for (const Aligned& c : concepts) {
      const long sd = static_cast<long>(a.sentence) - static_cast<long>(c.sentence);
      const int sentence_distance = static_cast<int>(sd < 0 ? -sd : sd);
      if (sentence_distance > max_sentence_distance) continue;
      if (!schema.pair_compatible(entities[a.index].category, entities[c.index].category))
        continue;
      CandidatePair pair;
      pair.attribute = entities[a.index];
      pair.concept_entity = entities[c.index];
      pair.attribute_index = a.index;
      pair.concept_index = c.index;
      pair.sentence_distance = sentence_distance;
      pair.attribute_first = a.first_tok <= c.first_tok;
      const long gap = pair.attribute_first
                           ? static_cast<long>(c.first_tok) - static_cast<long>(a.last_tok) - 1
                           : static_cast<long>(a.first_tok) - static_cast<long>(c.last_tok) - 1;
      pair.token_distance = static_cast<int>(std::max<long>(gap, 0));
      pair.doc_id = doc.doc_id;
      pair.attr_first_tok = a.first_tok;
      pair.attr_last_tok = a.last_tok;
      pair.conc_first_tok = c.first_tok;
      pair.conc_last_tok = c.last_tok;
      out.push_back(std::move(pair));
    }
  }
  std::sort(out.begin(), out.end(), [](const CandidatePair& x, const CandidatePair& y) {
    if (x.attribute.start != y.attribute.start) return x.attribute.start < y.attribute.start;
    return x.concept_entity.start < y.concept_entity.start;
  });
  return out;
}

namespace detail {

inline std::string distance_bucket(int d) {
  if (d <= 3) return std::to_string(d);
  if (d <= 6) return "4-6";
  if (d <= 10) return "7-10";
  return "11+";
}

inline void bag_words(std::set<std::string>& sink, const std::vector<Token>& tokens,
                      std::size_t first, std::size_t last, std::size_t cap,
                      const std::string& prefix, std::vector<std::string>& feats) {
  sink.clear();
  for (std::size_t t = first; t <= last && sink.size() < cap; ++t)
    sink.insert(ascii_lower(tokens[t].text));
  for (const auto& w : sink) feats.push_back(prefix + w);
}

}  // namespace detail

// Deterministic pair template: categories, bagged entity words, bagged
// between-words (capped at 20), distance buckets, order flag, and the four
// boundary-context words around the two entities.
inline std::vector<std::string> featurize_pair(const CandidatePair& pair,
                                               const std::vector<Token>& tokens) {
  if (pair.attr_last_tok >= tokens.size() || pair.conc_last_tok >= tokens.size() ||
      pair.attr_first_tok > pair.attr_last_tok || pair.conc_first_tok > pair.conc_last_tok)
    raise("AlignmentFailure", "candidate pair is not aligned to the token sequence");

  std::vector<std::string> feats;
  feats.push_back("bias");
  feats.push_back("attr_cat=" + pair.attribute.category);
  feats.push_back("conc_cat=" + pair.concept_entity.category);
  feats.push_back("pair_cat=" + pair.attribute.category + "|" + pair.concept_entity.category);

  std::set<std::string> bag;
  detail::bag_words(bag, tokens, pair.attr_first_tok, pair.attr_last_tok, 20, "aw=", feats);
  detail::bag_words(bag, tokens, pair.conc_first_tok, pair.conc_last_tok, 20, "cw=", feats);

  const std::size_t gap_first = std::min(pair.attr_last_tok, pair.conc_last_tok) + 1;
  const std::size_t gap_last_excl = std::max(pair.attr_first_tok, pair.conc_first_tok);
  if (gap_first < gap_last_excl)
    detail::bag_words(bag, tokens, gap_first, gap_last_excl - 1, 20, "bw=", feats);

  feats.push_back("tdist=" + detail::distance_bucket(pair.token_distance));
  feats.push_back("sdist=" + std::to_string(pair.sentence_distance));
  feats.push_back(pair.attribute_first ? "attr_first" : "conc_first");

  auto context = [&](std::size_t tok, long offset, const char* name) {
    const long j = static_cast<long>(tok) + offset;
    feats.push_back(std::string(name) + "=" +
                    (j < 0 || j >= static_cast<long>(tokens.size())
                         ? (offset < 0 ? "<s>" : "</s>")
                         : ascii_lower(tokens[static_cast<std::size_t>(j)].text)));
  };
  context(pair.attr_first_tok, -1, "attr_prev");
  context(pair.attr_last_tok, 1, "attr_next");
  context(pair.conc_first_tok, -1, "conc_prev");
  context(pair.conc_last_tok, 1, "conc_next");
  return feats;
}

namespace detail {

struct LinkerExampleSet {
  std::vector<TrainExample> examples;
  bool any_positive = false;
};

inline LinkerExampleSet linker_examples(const std::vector<AnnotatedDoc>& docs,
                                        const LinearModel& model, const SDoHSchema& schema,
                                        int max_sentence_distance) {
  LinkerExampleSet out;
  for (const auto& ad : docs) {
    const std::vector<Token> tokens = tokenize(ad.doc.text);
    const auto candidates =
        generate_candidates(ad.doc, tokens, ad.entities, schema, max_sentence_distance);
    for (const auto& pair : candidates) {
      std::string label = kNoRelation;
      for (const auto& r : ad.relations)
        if (r.head == pair.attribute.id && r.tail == pair.concept_entity.id) {
          label = r.rel_type;
          break;
        }
      TrainExample ex;
      ex.features = featurize_pair(pair, tokens);
      ex.label = model.label_index(label);
      out.any_positive = out.any_positive || label != kNoRelation;
      out.examples.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<RelationAnnotation> link(const PairClassifierModel& model, const Document& doc,
                                            const std::vector<EntityAnnotation>& entities,
                                            const SDoHSchema& schema,
                                            int max_sentence_distance = 1);

namespace detail {

inline double linker_validation_f1(const LinearModel& candidate,
                                   const std::vector<AnnotatedDoc>& val_docs,
                                   const SDoHSchema& schema, int max_sentence_distance) {
  PairClassifierModel m{candidate, {}};
  m.lm.trained = true;
  std::vector<AnnotatedDoc> pred;
  pred.reserve(val_docs.size());
  for (const auto& ad : val_docs) {
    AnnotatedDoc p;
    p.doc = ad.doc;
    p.entities = ad.entities;
    p.relations = link(m, ad.doc, ad.entities, schema, max_sentence_distance);
    pred.push_back(std::move(p));
  }
  return score_relations_on_gold_entities(val_docs, pred, MatchMode::Strict).micro.f1();
}

}  // namespace detail

// Candidates built from gold entities; a candidate matching a gold relation
// is a positive of that rel_type, everything else is NONE.
inline PairClassifierModel train_linker(const std::vector<AnnotatedDoc>& train_docs,
                                        const std::vector<AnnotatedDoc>& val_docs,
                                        const TrainConfig& config, const SDoHSchema& schema,
                                        int max_sentence_distance = 1) {
  if (train_docs.empty() || val_docs.empty())
    raise("EmptyTrainingSet", "training and validation sets must be non-empty");
  LinearModel base;
  base.labels.push_back(kNoRelation);
  for (const auto& t : schema.rel_types()) base.labels.push_back(t);
  base.component = "re";
  base.schema_version = schema.version;
  base.feature_window = config.feature_window;

  detail::LinkerExampleSet set =
      detail::linker_examples(train_docs, base, schema, max_sentence_distance);
  if (set.examples.empty()) raise("EmptyTrainingSet", "no candidate pairs in the training set");

  std::vector<std::string> warnings;
  if (!set.any_positive)
    warnings.push_back(
        "NoPositiveExamples: no candidate matches a gold relation; the model degenerates to "
        "always-NONE");

  LinearModel lm = run_training(std::move(base), set.examples, config, [&](const LinearModel& m) {
    return detail::linker_validation_f1(m, val_docs, schema, max_sentence_distance);
  });
  return PairClassifierModel{std::move(lm), std::move(warnings)};
}

inline PairClassifierModel fine_tune_linker(const PairClassifierModel& model,
                                            const std::vector<AnnotatedDoc>& train_docs,
                                            const std::vector<AnnotatedDoc>& val_docs,
                                            const TrainConfig& config, const SDoHSchema& schema,
                                            int max_sentence_distance = 1) {
  if (!model.trained()) raise("UntrainedModel", "fine_tune_linker requires a trained model");
  if (config.max_epochs == 0) return model;
  if (train_docs.empty() || val_docs.empty())
    raise("EmptyTrainingSet", "training and validation sets must be non-empty");

  detail::LinkerExampleSet set =
      detail::linker_examples(train_docs, model.lm, schema, max_sentence_distance);
  if (set.examples.empty()) raise("EmptyTrainingSet", "no candidate pairs in the training set");

  LinearModel lm = run_training(model.lm, set.examples, config, [&](const LinearModel& m) {
    return detail::linker_validation_f1(m, val_docs, schema, max_sentence_distance);
  });
  return PairClassifierModel{std::move(lm), {}};
}

// Classifies every candidate, drops NONE, and keeps for each attribute the
// highest-scoring assignment (ties: smaller token distance, then earlier
// concept offset). Predicted rel_types are restricted to those the schema
// permits for the pair.
inline std::vector<RelationAnnotation> link(const PairClassifierModel& model, const Document& doc,
                                            const std::vector<EntityAnnotation>& entities,
                                            const SDoHSchema& schema, int max_sentence_distance) {
  if (!model.trained()) raise("UntrainedModel", "link requires a trained model");
  const std::vector<Token> tokens = tokenize(doc.text);
  const auto candidates =
      generate_candidates(doc, tokens, entities, schema, max_sentence_distance);

  struct Scored {
    const CandidatePair* pair;
    std::string rel_type;
    double score;
  };
  std::map<std::size_t, Scored> best_per_attribute;

  for (const auto& pair : candidates) {
    const std::vector<double> probs =
        LinearModel::softmax(model.lm.logits(featurize_pair(pair, tokens)));
    const std::vector<std::string> allowed =
        schema.allowed_rel_types(pair.attribute.category, pair.concept_entity.category);
    std::size_t best = 0;  // NONE
    for (std::size_t l = 1; l < model.lm.labels.size(); ++l) {
      if (std::find(allowed.begin(), allowed.end(), model.lm.labels[l]) == allowed.end())
        continue;
      if (probs[l] > probs[best]) best = l;
    }
    if (best == 0) continue;  // NONE wins

    const Scored scored{&pair, model.lm.labels[best], probs[best]};
    const auto it = best_per_attribute.find(pair.attribute_index);
    if (it == best_per_attribute.end()) {
      best_per_attribute.emplace(pair.attribute_index, scored);
      continue;
    }
    const Scored& cur = it->second;
    const bool better =
        scored.score > cur.score ||
        (scored.score == cur.score &&
         (scored.pair->token_distance < cur.pair->token_distance ||
          (scored.pair->token_distance == cur.pair->token_distance &&
           scored.pair->concept_entity.start < cur.pair->concept_entity.start)));
    if (better) it->second = scored;
  }

  std::vector<const Scored*> chosen;
  for (const auto& [attr_idx, s] : best_per_attribute) chosen.push_back(&s);
  std::sort(chosen.begin(), chosen.end(), [](const Scored* a, const Scored* b) {
    if (a->pair->attribute.start != b->pair->attribute.start)
      return a->pair->attribute.start < b->pair->attribute.start;
    return a->pair->concept_entity.start < b->pair->concept_entity.start;
  });

  std::vector<RelationAnnotation> out;
  for (std::size_t i = 0; i < chosen.size(); ++i)
    out.push_back({"R" + std::to_string(i + 1), chosen[i]->rel_type,
                   chosen[i]->pair->attribute.id, chosen[i]->pair->concept_entity.id});
  return out;
}

}  // namespace sdoh
