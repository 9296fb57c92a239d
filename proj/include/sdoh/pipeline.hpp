#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sdoh/corpus.hpp"
#include "sdoh/linker.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/tagger.hpp"
#include "sdoh/textproc.hpp"
#include "sdoh/types.hpp"

// End-to-end orchestration: run both stages over documents, assemble
// structured records, adapt models across domains and aggregate extractions
// to patient-level rates.

namespace sdoh {

// One extracted concept with its linked attributes.
struct SDoHRecord {
  std::string doc_id;
  std::string patient_id;
  EntityAnnotation concept_entity;
  std::vector<std::pair<std::string, EntityAnnotation>> attributes;  // (rel_type, entity)
  std::string ner_version;
  std::string re_version;
};

struct ExtractOutput {
  std::vector<SDoHRecord> records;
  std::vector<EntityAnnotation> entities;      // all predicted entities (standoff export)
  std::vector<RelationAnnotation> relations;   // all predicted relations
  std::vector<std::string> diagnostics;        // orphan attributes and the like
};

inline ExtractOutput extract(const TokenClassifierModel& ner, const PairClassifierModel& re,
                             const Document& doc, const SDoHSchema& schema,
                             int max_sentence_distance = 1,
                             DecodeAlgo algo = DecodeAlgo::Greedy) {
  if (!ner.trained() || !re.trained()) raise("UntrainedModel", "extract requires trained models");
  if (ner.lm.schema_version != re.lm.schema_version)
    raise("SchemaVersionMismatch", "ner model schema '" + ner.lm.schema_version +
                                       "' vs re model schema '" + re.lm.schema_version + "'");

  ExtractOutput out;
  const std::vector<Token> tokens = tokenize(doc.text);
  out.entities = decode_bio(doc.text, tokens, predict_tags(ner, tokens, algo).labels);
  out.relations = link(re, doc, out.entities, schema, max_sentence_distance);

  std::map<std::string, const EntityAnnotation*> by_id;
  for (const auto& e : out.entities) by_id[e.id] = &e;

  std::set<std::string> linked_attributes;
  std::map<std::string, std::vector<std::pair<std::string, EntityAnnotation>>> by_concept;
  for (const auto& r : out.relations) {
    linked_attributes.insert(r.head);
    by_concept[r.tail].emplace_back(r.rel_type, *by_id.at(r.head));
  }

  for (const auto& e : out.entities) {
    const CategoryInfo* info = schema.find(e.category);
    if (!info) continue;
    if (info->role == Role::Concept) {
      SDoHRecord record;
      record.doc_id = doc.doc_id;
      record.patient_id = doc.patient_id;
      record.concept_entity = e;
      const auto it = by_concept.find(e.id);
      if (it != by_concept.end()) {
        record.attributes = it->second;
        std::sort(record.attributes.begin(), record.attributes.end(),
                  [](const auto& a, const auto& b) { return a.second.start < b.second.start; });
      }
      record.ner_version = ner.lm.version_string();
      record.re_version = re.lm.version_string();
      out.records.push_back(std::move(record));
    } else if (!linked_attributes.count(e.id)) {
      out.diagnostics.push_back(doc.doc_id + ": orphan attribute " + e.category + " [" +
                                std::to_string(e.start) + "," + std::to_string(e.end) + ") '" +
                                e.surface + "'");
    }
  }
  std::sort(out.records.begin(), out.records.end(), [](const SDoHRecord& a, const SDoHRecord& b) {
    return a.concept_entity.start < b.concept_entity.start;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Cross-domain adaptation

enum class AdaptStrategy { Direct, FineTune, MergeRetrain };

inline AdaptStrategy parse_strategy(const std::string& s) {
  if (s == "direct") return AdaptStrategy::Direct;
  if (s == "fine-tune" || s == "fine_tune") return AdaptStrategy::FineTune;
  if (s == "merge-retrain" || s == "merge_retrain") return AdaptStrategy::MergeRetrain;
  raise("InvalidConfig", "unknown adaptation strategy '" + s + "'");
}

inline const char* to_string(AdaptStrategy s) {
  switch (s) {
    case AdaptStrategy::Direct: return "direct";
    case AdaptStrategy::FineTune: return "fine-tune";
    default: return "merge-retrain";
  }
}

struct AdaptedModels {
  TokenClassifierModel ner;
  PairClassifierModel re;
};

// direct: source models unchanged. merge_retrain: fresh models on
// source+target training data, validated on the target. fine_tune: continue
// from source weights on the target training data.
inline AdaptedModels adapt(const TokenClassifierModel& source_ner,
                           const PairClassifierModel& source_re, AdaptStrategy strategy,
                           const std::vector<AnnotatedDoc>& source_corpus,
                           const std::vector<AnnotatedDoc>& target_train,
                           const std::vector<AnnotatedDoc>& target_val, const TrainConfig& config,
                           const SDoHSchema& schema, int max_sentence_distance = 1) {
  if (strategy == AdaptStrategy::Direct) return {source_ner, source_re};
  if (target_train.empty() || target_val.empty())
    raise("MissingTargetData",
          std::string(to_string(strategy)) + " adaptation needs target training and validation data");

  if (strategy == AdaptStrategy::FineTune)
    return {fine_tune_tagger(source_ner, target_train, target_val, config),
            fine_tune_linker(source_re, target_train, target_val, config, schema,
                             max_sentence_distance)};

  std::vector<AnnotatedDoc> merged = source_corpus;
  merged.insert(merged.end(), target_train.begin(), target_train.end());
  return {train_tagger(merged, target_val, config, schema),
          train_linker(merged, target_val, config, schema, max_sentence_distance)};
}

// ---------------------------------------------------------------------------
// Patient-level aggregation

struct RateRow {
  std::size_t concept_count = 0;
  std::size_t patients_with_category = 0;
  double rate = 0.0;
};

struct ExtractionRateTable {
  std::map<std::string, RateRow> rows;  // one row per concept category
  std::size_t total_patients = 0;
};

inline ExtractionRateTable aggregate_rates(const std::vector<SDoHRecord>& records,
                                           const std::set<std::string>& patient_roster,
                                           const SDoHSchema& schema) {
  if (patient_roster.empty()) raise("EmptyRoster", "patient roster is empty");
  ExtractionRateTable table;
  table.total_patients = patient_roster.size();
  for (const auto& c : schema.categories)
    if (c.role == Role::Concept) table.rows[c.name] = {};

  std::map<std::string, std::set<std::string>> patients_by_category;
  for (const auto& r : records) {
    if (!patient_roster.count(r.patient_id))
      raise("UnknownPatient", "record patient '" + r.patient_id + "' is not in the roster");
    auto it = table.rows.find(r.concept_entity.category);
    if (it == table.rows.end())
      raise("UnknownCategory", "record category '" + r.concept_entity.category + "'");
    ++it->second.concept_count;
    patients_by_category[r.concept_entity.category].insert(r.patient_id);
  }
  for (auto& [category, row] : table.rows) {
    row.patients_with_category = patients_by_category[category].size();
    row.rate = static_cast<double>(row.patients_with_category) /
               static_cast<double>(table.total_patients);
  }
  return table;
}

inline std::string format_rate_table(const ExtractionRateTable& table) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-34s %10s %10s %8s\n", "SDoH", "# Concepts", "Patients",
                "Rate");
  out += buf;
  for (const auto& [category, row] : table.rows) {
    std::snprintf(buf, sizeof buf, "%-34s %10zu %10zu %8.4f\n", category.c_str(),
                  row.concept_count, row.patients_with_category, row.rate);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-34s %10s %10zu\n", "total patients", "",
                table.total_patients);
  out += buf;
  return out;
}

// ---------------------------------------------------------------------------
// Records file: one TSV line per concept record; the attribute list is a
// JSON array column so surfaces need no escaping rules of their own.

inline std::string serialize_records(const std::vector<SDoHRecord>& records) {
  std::string out = "# doc_id\tpatient_id\tcategory\tstart\tend\tsurface\tattributes\n";
  for (const auto& r : records) {
    nlohmann::ordered_json attrs = nlohmann::ordered_json::array();
    for (const auto& [rel_type, e] : r.attributes)
      attrs.push_back({{"rel_type", rel_type},
                       {"category", e.category},
                       {"start", e.start},
                       {"end", e.end},
                       {"surface", e.surface}});
    out += r.doc_id + "\t" + r.patient_id + "\t" + r.concept_entity.category + "\t" +
           std::to_string(r.concept_entity.start) + "\t" + std::to_string(r.concept_entity.end) +
           "\t" + r.concept_entity.surface + "\t" + attrs.dump() + "\n";
  }
  return out;
}

inline std::vector<SDoHRecord> parse_records(const std::string& content) {
  std::vector<SDoHRecord> records;
  const std::vector<std::string> lines = detail::split_lines(content);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string& line = lines[n];
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> parts = detail::split_tabs(line);
    if (parts.size() != 7)
      raise("MalformedLine", "records line " + std::to_string(n + 1) + ": expected 7 tab fields");
    SDoHRecord r;
    r.doc_id = parts[0];
    r.patient_id = parts[1];
    r.concept_entity.category = parts[2];
    if (!detail::parse_size(parts[3], r.concept_entity.start) ||
        !detail::parse_size(parts[4], r.concept_entity.end))
      raise("MalformedLine", "records line " + std::to_string(n + 1) + ": bad offsets");
    r.concept_entity.surface = parts[5];
    try {
      for (const auto& a : nlohmann::json::parse(parts[6])) {
        EntityAnnotation e;
        e.category = a.at("category").get<std::string>();
        e.start = a.at("start").get<std::size_t>();
        e.end = a.at("end").get<std::size_t>();
        e.surface = a.at("surface").get<std::string>();
        r.attributes.emplace_back(a.at("rel_type").get<std::string>(), std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      raise("MalformedLine",
            "records line " + std::to_string(n + 1) + ": bad attribute column: " + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Batch execution. Output is invariant to parallelism: documents are
// processed independently against immutable models and results are reduced
// in doc_id order; per-document failures become diagnostics.

struct BatchResult {
  std::vector<SDoHRecord> records;
  std::vector<AnnotatedDoc> predictions;  // entities+relations per doc, for standoff export
  std::vector<std::string> diagnostics;
  double elapsed_ms = 0.0;
};

inline BatchResult run_batch(const TokenClassifierModel& ner, const PairClassifierModel& re,
                             const std::vector<Document>& documents, const SDoHSchema& schema,
                             int parallelism = 1, int max_sentence_distance = 1,
                             DecodeAlgo algo = DecodeAlgo::Greedy) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = documents.size();
  std::vector<ExtractOutput> outputs(n);
  std::vector<std::string> failures(n);

  auto work = [&](std::size_t i) {
    try {
      outputs[i] = extract(ner, re, documents[i], schema, max_sentence_distance, algo);
    } catch (const std::exception& e) {
      failures[i] = documents[i].doc_id + ": " + e.what();
    }
  };

  const int threads = std::max(parallelism, 1);
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&]() {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) work(i);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return documents[a].doc_id < documents[b].doc_id; });

  BatchResult result;
  for (std::size_t i : order) {
    if (!failures[i].empty()) {
      result.diagnostics.push_back(failures[i]);
      continue;
    }
    for (auto& rec : outputs[i].records) result.records.push_back(std::move(rec));
    for (auto& d : outputs[i].diagnostics) result.diagnostics.push_back(std::move(d));
    AnnotatedDoc pred;
    pred.doc = documents[i];
    pred.entities = std::move(outputs[i].entities);
    pred.relations = std::move(outputs[i].relations);
    result.predictions.push_back(std::move(pred));
  }
  result.elapsed_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  return result;
}

}  // namespace sdoh
