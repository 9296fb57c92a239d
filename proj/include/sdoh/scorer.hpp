#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdoh/error.hpp"
#include "sdoh/types.hpp"

// Entity and relation scoring: one-to-one entity matching, strict (exact
// span + type) or lenient (overlapping span + type), with micro-averaged
// precision/recall/F1 and per-class breakdowns.

namespace sdoh {

enum class MatchMode { Strict, Lenient };
enum class EvalTask { Concept, Relation, EndToEnd };

inline const char* to_string(MatchMode m) { return m == MatchMode::Strict ? "strict" : "lenient"; }
inline const char* to_string(EvalTask t) {
  switch (t) {
    case EvalTask::Concept: return "concept";
    case EvalTask::Relation: return "relation";
    default: return "end_to_end";
  }
}

struct EvalCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }

  EvalCounts& operator+=(const EvalCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct EvalReport {
  MatchMode mode = MatchMode::Strict;
  EvalTask task = EvalTask::Concept;
  std::map<std::string, EvalCounts> per_class;
  EvalCounts micro;
};

namespace detail {

inline long span_overlap(const EntityAnnotation& a, const EntityAnnotation& b) {
  const long lo = static_cast<long>(std::max(a.start, b.start));
  const long hi = static_cast<long>(std::min(a.end, b.end));
  return hi > lo ? hi - lo : 0;
}

inline bool spans_match(const EntityAnnotation& g, const EntityAnnotation& p, MatchMode mode) {
  if (g.category != p.category) return false;
  if (mode == MatchMode::Strict) return g.start == p.start && g.end == p.end;
  return span_overlap(g, p) > 0;
}

}  // namespace detail

// Maximum-cardinality one-to-one matching between gold and predicted
// entities of one document. Returns (gold index, pred index) pairs. Gold
// entities are processed in span order and candidate edges in
// largest-overlap order, which fixes the tie-breaking deterministically;
// augmenting paths guarantee maximum cardinality.
inline std::vector<std::pair<std::size_t, std::size_t>> match_entities(
    const std::vector<EntityAnnotation>& gold, const std::vector<EntityAnnotation>& pred,
    MatchMode mode) {
  std::vector<std::vector<std::size_t>> adj(gold.size());
  for (std::size_t g = 0; g < gold.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p)
      if (detail::spans_match(gold[g], pred[p], mode)) adj[g].push_back(p);
    std::sort(adj[g].begin(), adj[g].end(), [&](std::size_t a, std::size_t b) {
      const long oa = detail::span_overlap(gold[g], pred[a]);
      const long ob = detail::span_overlap(gold[g], pred[b]);
      if (oa != ob) return oa > ob;
      if (pred[a].start != pred[b].start) return pred[a].start < pred[b].start;
      return a < b;
    });
  }

  std::vector<std::size_t> gold_order(gold.size());
  for (std::size_t g = 0; g < gold.size(); ++g) gold_order[g] = g;
  std::sort(gold_order.begin(), gold_order.end(), [&](std::size_t a, std::size_t b) {
    if (gold[a].start != gold[b].start) return gold[a].start < gold[b].start;
    if (gold[a].end != gold[b].end) return gold[a].end < gold[b].end;
    return a < b;
  });

  constexpr std::size_t kFree = static_cast<std::size_t>(-1);
  std::vector<std::size_t> pred_to_gold(pred.size(), kFree);
  std::vector<char> visited;

  auto augment = [&](auto&& self, std::size_t g) -> bool {
    for (std::size_t p : adj[g]) {
      if (visited[p]) continue;
      visited[p] = 1;
      if (pred_to_gold[p] == kFree || self(self, pred_to_gold[p])) {
        pred_to_gold[p] = g;
        return true;
      }
    }
    return false;
  };

  for (std::size_t g : gold_order) {
    visited.assign(pred.size(), 0);
    augment(augment, g);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t p = 0; p < pred.size(); ++p)
    if (pred_to_gold[p] != kFree) pairs.emplace_back(pred_to_gold[p], p);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

namespace detail {

inline void check_same_doc_ids(const std::vector<AnnotatedDoc>& gold,
                               const std::vector<AnnotatedDoc>& pred) {
  std::set<std::string> g, p;
  for (const auto& d : gold) g.insert(d.doc.doc_id);
  for (const auto& d : pred) p.insert(d.doc.doc_id);
  if (g != p) raise("DocIdMismatch", "gold and predicted corpora cover different doc_ids");
}

inline const AnnotatedDoc* find_doc(const std::vector<AnnotatedDoc>& docs, const std::string& id) {
  for (const auto& d : docs)
    if (d.doc.doc_id == id) return &d;
  return nullptr;
}

}  // namespace detail

// Per-document entity alignment, reusable by relation scoring.
using EntityAlignment = std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>>;

inline EntityAlignment align_entities(const std::vector<AnnotatedDoc>& gold,
                                      const std::vector<AnnotatedDoc>& pred, MatchMode mode) {
  detail::check_same_doc_ids(gold, pred);
  EntityAlignment alignment;
  for (const auto& g : gold) {
    const AnnotatedDoc* p = detail::find_doc(pred, g.doc.doc_id);
    alignment[g.doc.doc_id] = match_entities(g.entities, p->entities, mode);
  }
  return alignment;
}

inline EvalReport score_concepts(const std::vector<AnnotatedDoc>& gold,
                                 const std::vector<AnnotatedDoc>& pred, MatchMode mode) {
  detail::check_same_doc_ids(gold, pred);
  EvalReport report;
  report.mode = mode;
  report.task = EvalTask::Concept;
  for (const auto& g : gold) {
    const AnnotatedDoc* p = detail::find_doc(pred, g.doc.doc_id);
    const auto pairs = match_entities(g.entities, p->entities, mode);
    std::vector<char> gold_hit(g.entities.size(), 0), pred_hit(p->entities.size(), 0);
    for (const auto& [gi, pi] : pairs) {
      gold_hit[gi] = 1;
      pred_hit[pi] = 1;
      ++report.per_class[g.entities[gi].category].tp;
    }
    for (std::size_t i = 0; i < g.entities.size(); ++i)
      if (!gold_hit[i]) ++report.per_class[g.entities[i].category].fn;
    for (std::size_t i = 0; i < p->entities.size(); ++i)
      if (!pred_hit[i]) ++report.per_class[p->entities[i].category].fp;
  }
  for (const auto& [cls, counts] : report.per_class) report.micro += counts;
  return report;
}

// A predicted relation is a true positive iff an unconsumed gold relation
// has the same rel_type and both endpoints map to the gold endpoints under
// the supplied entity alignment. Per-class keys are relation types.
inline EvalReport score_relations(const std::vector<AnnotatedDoc>& gold,
                                  const std::vector<AnnotatedDoc>& pred, MatchMode mode,
                                  const EntityAlignment& alignment) {
  detail::check_same_doc_ids(gold, pred);
  EvalReport report;
  report.mode = mode;
  report.task = EvalTask::Relation;

  for (const auto& g : gold) {
    const AnnotatedDoc* p = detail::find_doc(pred, g.doc.doc_id);

    std::map<std::string, std::size_t> gold_idx, pred_idx;
    for (std::size_t i = 0; i < g.entities.size(); ++i) gold_idx[g.entities[i].id] = i;
    for (std::size_t i = 0; i < p->entities.size(); ++i) pred_idx[p->entities[i].id] = i;

    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> pred_to_gold(p->entities.size(), kNone);
    const auto al = alignment.find(g.doc.doc_id);
    if (al != alignment.end())
      for (const auto& [gi, pi] : al->second) pred_to_gold[pi] = gi;

    // Deterministic consumption order: by head span, then tail span, then id.
    std::vector<std::size_t> order(p->relations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto span_key = [&](const RelationAnnotation& r) {
      const auto h = pred_idx.find(r.head);
      const auto t = pred_idx.find(r.tail);
      if (h == pred_idx.end() || t == pred_idx.end())
        raise("DanglingRelation",
              g.doc.doc_id + " relation " + r.id + " references a missing entity");
      return std::tuple(p->entities[h->second].start, p->entities[t->second].start, r.id);
    };
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return span_key(p->relations[a]) < span_key(p->relations[b]); });

    std::vector<char> gold_used(g.relations.size(), 0);
    for (std::size_t oi : order) {
      const RelationAnnotation& pr = p->relations[oi];
      const std::size_t hp = pred_idx.at(pr.head);
      const std::size_t tp_ = pred_idx.at(pr.tail);
      const std::size_t hg = pred_to_gold[hp];
      const std::size_t tg = pred_to_gold[tp_];
      bool matched = false;
      if (hg != kNone && tg != kNone) {
        for (std::size_t k = 0; k < g.relations.size(); ++k) {
          if (gold_used[k]) continue;
          const RelationAnnotation& gr = g.relations[k];
          const auto ghi = gold_idx.find(gr.head);
          const auto gti = gold_idx.find(gr.tail);
          if (ghi == gold_idx.end() || gti == gold_idx.end())
            raise("DanglingRelation",
                  g.doc.doc_id + " gold relation " + gr.id + " references a missing entity");
          if (gr.rel_type == pr.rel_type && ghi->second == hg && gti->second == tg) {
            gold_used[k] = 1;
            matched = true;
            break;
          }
        }
      }
      if (matched)
        ++report.per_class[pr.rel_type].tp;
      else
        ++report.per_class[pr.rel_type].fp;
    }
    for (std::size_t k = 0; k < g.relations.size(); ++k)
      if (!gold_used[k]) ++report.per_class[g.relations[k].rel_type].fn;
  }
  for (const auto& [cls, counts] : report.per_class) report.micro += counts;
  return report;
}

// Convenience for the relation subtask where predictions are made over the
// gold entities themselves: endpoints align by entity identity.
inline EvalReport score_relations_on_gold_entities(const std::vector<AnnotatedDoc>& gold,
                                                   const std::vector<AnnotatedDoc>& pred,
                                                   MatchMode mode) {
  EntityAlignment alignment;
  for (const auto& g : gold) {
    const AnnotatedDoc* p = detail::find_doc(pred, g.doc.doc_id);
    if (!p) raise("DocIdMismatch", "doc " + g.doc.doc_id + " missing from predictions");
    std::map<std::string, std::size_t> gold_idx;
    for (std::size_t i = 0; i < g.entities.size(); ++i) gold_idx[g.entities[i].id] = i;
    auto& pairs = alignment[g.doc.doc_id];
    for (std::size_t i = 0; i < p->entities.size(); ++i) {
      const auto it = gold_idx.find(p->entities[i].id);
      if (it != gold_idx.end()) pairs.emplace_back(it->second, i);
    }
  }
  return score_relations(gold, pred, mode, alignment);
}

struct EndToEndReports {
  EvalReport concepts;
  EvalReport relations;
};

inline EndToEndReports score_end_to_end(const std::vector<AnnotatedDoc>& gold,
                                        const std::vector<AnnotatedDoc>& pred, MatchMode mode) {
  EndToEndReports out;
  out.concepts = score_concepts(gold, pred, mode);
  out.relations = score_relations(gold, pred, mode, align_entities(gold, pred, mode));
  out.relations.task = EvalTask::EndToEnd;
  return out;
}

// ---------------------------------------------------------------------------
// Report rendering

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline void format_row(std::string& out, const std::string& name, const EvalCounts* strict,
                       const EvalCounts* lenient) {
  char buf[160];
  auto cell = [](const EvalCounts* c, double (EvalCounts::*f)() const) {
    return c ? (c->*f)() : 0.0;
  };
  std::snprintf(buf, sizeof buf, "%-28s %7.4f %7.4f %7.4f   %7.4f %7.4f %7.4f\n", name.c_str(),
                cell(strict, &EvalCounts::precision), cell(strict, &EvalCounts::recall),
                cell(strict, &EvalCounts::f1), cell(lenient, &EvalCounts::precision),
                cell(lenient, &EvalCounts::recall), cell(lenient, &EvalCounts::f1));
  out += buf;
}

}  // namespace detail

// Aligned table with strict and lenient columns; either report pointer may
// be null when only one mode was computed.
inline std::string format_report_table(const std::string& task_title, const EvalReport* strict,
                                       const EvalReport* lenient) {
  std::string out;
  out += task_title + "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %-23s   %-23s\n", "", "Strict", "Lenient");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-28s %7s %7s %7s   %7s %7s %7s\n", "Class", "Prec.", "Rec.",
                "F(b=1)", "Prec.", "Rec.", "F(b=1)");
  out += buf;

  std::set<std::string> classes;
  if (strict)
    for (const auto& [cls, c] : strict->per_class) classes.insert(cls);
  if (lenient)
    for (const auto& [cls, c] : lenient->per_class) classes.insert(cls);
  auto lookup = [](const EvalReport* r, const std::string& cls) -> const EvalCounts* {
    if (!r) return nullptr;
    const auto it = r->per_class.find(cls);
    return it == r->per_class.end() ? nullptr : &it->second;
  };
  for (const auto& cls : classes)
    detail::format_row(out, cls, lookup(strict, cls), lookup(lenient, cls));
  detail::format_row(out, "micro", strict ? &strict->micro : nullptr,
                     lenient ? &lenient->micro : nullptr);
  return out;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["task"] = to_string(r.task);
  j["mode"] = to_string(r.mode);
  auto counts = [](const EvalCounts& c) {
    return nlohmann::ordered_json{{"tp", c.tp},           {"fp", c.fp},
                                  {"fn", c.fn},           {"precision", c.precision()},
                                  {"recall", c.recall()}, {"f1", c.f1()}};
  };
  j["micro"] = counts(r.micro);
  j["per_class"] = nlohmann::ordered_json::object();
  for (const auto& [cls, c] : r.per_class) j["per_class"][cls] = counts(c);
  return j;
}

}  // namespace sdoh
