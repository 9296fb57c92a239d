#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdoh/error.hpp"
#include "sdoh/rng.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/textproc.hpp"
#include "sdoh/types.hpp"
#include "sdoh/utf8.hpp"

// brat standoff reading/writing, corpus splitting, validation and annotator
// agreement. Standoff files pair `<doc_id>.txt` with `<doc_id>.ann`:
//
//   T1<TAB>Tobacco_use 0 15<TAB>everyday smoker
//   R1<TAB>Attr-of Arg1:T2 Arg2:T1
//
// Category names use underscores in files and spaces in memory.

namespace sdoh {

namespace detail {

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t nl = s.find('\n', pos);
    if (nl == std::string_view::npos) nl = s.size();
    std::string line(s.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = nl + 1;
  }
  return lines;
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) parts.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return parts;
}

inline bool is_id(std::string_view s, char prefix) {
  if (s.size() < 2 || s[0] != prefix) return false;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return true;
}

inline bool parse_size(const std::string& s, std::size_t& out) {
  if (s.empty()) return false;
  std::size_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Standoff parsing / serialization

inline AnnotatedDoc parse_standoff(const std::string& text_content, const std::string& ann_content,
                                   const SDoHSchema& schema, const std::string& doc_id = "") {
  AnnotatedDoc out;
  out.doc.doc_id = doc_id;
  out.doc.text = text_content;
  const std::vector<char32_t> cps = utf8::decode(text_content);

  auto where = [&](std::size_t line_no) {
    return (doc_id.empty() ? std::string("line ") : doc_id + " line ") + std::to_string(line_no);
  };

  std::map<std::string, std::size_t> by_id;  // entity id -> index in out.entities
  const std::vector<std::string> lines = detail::split_lines(ann_content);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string& line = lines[n];
    if (line.empty() || line[0] == '#') continue;

    const std::size_t tab1 = line.find('\t');
    if (tab1 == std::string::npos)
      raise("MalformedLine", where(n + 1) + ": missing tab after annotation id");
    const std::string id = line.substr(0, tab1);

    if (detail::is_id(id, 'T')) {
      const std::size_t tab2 = line.find('\t', tab1 + 1);
      if (tab2 == std::string::npos)
        raise("MalformedLine", where(n + 1) + ": entity line needs a surface field");
      const std::string middle = line.substr(tab1 + 1, tab2 - tab1 - 1);
      if (middle.find(';') != std::string::npos)
        raise("DiscontinuousSpanUnsupported",
              where(n + 1) + ": fragmented spans with ';' are not supported");
      const std::vector<std::string> parts = detail::split_ws(middle);
      std::size_t start = 0, end = 0;
      if (parts.size() != 3 || !detail::parse_size(parts[1], start) ||
          !detail::parse_size(parts[2], end))
        raise("MalformedLine", where(n + 1) + ": expected '<Category> <start> <end>'");
      if (start >= end || end > cps.size())
        raise("SpanOutOfBounds", where(n + 1) + ": span [" + parts[1] + "," + parts[2] +
                                     ") over text of length " + std::to_string(cps.size()));
      EntityAnnotation e;
      e.id = id;
      e.category = SDoHSchema::display_form(parts[0]);
      e.start = start;
      e.end = end;
      e.surface = line.substr(tab2 + 1);
      if (!schema.is_declared(e.category))
        raise("UnknownCategory", where(n + 1) + ": category '" + e.category + "'");
      if (e.surface != utf8::encode(cps.data() + start, end - start))
        raise("SurfaceMismatch", where(n + 1) + ": surface '" + e.surface +
                                     "' does not equal text[" + parts[1] + "," + parts[2] + ")");
      if (by_id.count(e.id)) raise("MalformedLine", where(n + 1) + ": duplicate id " + e.id);
      by_id[e.id] = out.entities.size();
      out.entities.push_back(std::move(e));
    } else if (detail::is_id(id, 'R')) {
      const std::vector<std::string> parts = detail::split_ws(line.substr(tab1 + 1));
      if (parts.size() != 3 || parts[1].rfind("Arg1:", 0) != 0 || parts[2].rfind("Arg2:", 0) != 0)
        raise("MalformedLine", where(n + 1) + ": expected '<Type> Arg1:Tj Arg2:Tk'");
      RelationAnnotation r;
      r.id = id;
      r.rel_type = parts[0];
      r.head = parts[1].substr(5);
      r.tail = parts[2].substr(5);
      const auto head = by_id.find(r.head);
      const auto tail = by_id.find(r.tail);
      if (head == by_id.end() || tail == by_id.end())
        raise("DanglingRelation", where(n + 1) + ": " + r.id + " references a missing entity");
      const std::string& head_cat = out.entities[head->second].category;
      const std::string& tail_cat = out.entities[tail->second].category;
      if (schema.role_of(head_cat) != Role::Attribute)
        raise("RelationRoleViolation",
              where(n + 1) + ": Arg1 " + r.head + " must be an attribute");
      if (schema.role_of(tail_cat) != Role::Concept)
        raise("RelationRoleViolation", where(n + 1) + ": Arg2 " + r.tail + " must be a concept");
      if (!schema.compat_allows(head_cat, tail_cat, r.rel_type))
        raise("IncompatibleRelation", where(n + 1) + ": (" + r.rel_type + ", " + head_cat + ", " +
                                          tail_cat + ") is not permitted by the schema");
      out.relations.push_back(std::move(r));
    } else {
      raise("MalformedLine", where(n + 1) + ": unsupported annotation id '" + id + "'");
    }
  }
  return out;
}

inline std::string serialize_standoff(const Document& doc,
                                      const std::vector<EntityAnnotation>& entities,
                                      const std::vector<RelationAnnotation>& relations) {
  const std::vector<char32_t> cps = utf8::decode(doc.text);
  std::string out;
  std::set<std::string> ids;
  for (const auto& e : entities) {
    if (e.start >= e.end || e.end > cps.size())
      raise("InvariantViolation", doc.doc_id + " entity " + e.id + ": bad span");
    if (e.surface != utf8::encode(cps.data() + e.start, e.end - e.start))
      raise("InvariantViolation", doc.doc_id + " entity " + e.id + ": surface mismatch");
    if (e.surface.find('\n') != std::string::npos)
      raise("InvariantViolation",
            doc.doc_id + " entity " + e.id + ": surfaces spanning line breaks are not writable");
    if (!ids.insert(e.id).second)
      raise("InvariantViolation", doc.doc_id + ": duplicate entity id " + e.id);
    out += e.id + "\t" + SDoHSchema::file_form(e.category) + " " + std::to_string(e.start) + " " +
           std::to_string(e.end) + "\t" + e.surface + "\n";
  }
  for (const auto& r : relations) {
    if (!ids.count(r.head) || !ids.count(r.tail))
      raise("InvariantViolation", doc.doc_id + " relation " + r.id + ": dangling endpoint");
    out += r.id + "\t" + r.rel_type + " Arg1:" + r.head + " Arg2:" + r.tail + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus split

struct SplitRatios {
  double train_frac = 0.8;
  double test_frac = 0.2;
  double val_of_train_frac = 0.1;
};

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

// Ceiling with a 1e-9 slack so exact integer products do not round up on
// floating-point noise (100 * 0.1 == 10.000000000000002).
inline std::size_t split_size(double x) {
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

inline CorpusSplit split_corpus(const std::vector<std::string>& doc_ids, SplitRatios ratios,
                                std::uint64_t seed) {
  if (doc_ids.empty()) raise("EmptyCorpus", "no documents to split");
  if (!(ratios.train_frac > 0 && ratios.train_frac < 1) ||
      !(ratios.test_frac > 0 && ratios.test_frac < 1) ||
      !(ratios.val_of_train_frac > 0 && ratios.val_of_train_frac < 1))
    raise("InvalidRatio", "split fractions must lie in (0,1)");
  if (std::abs(ratios.train_frac + ratios.test_frac - 1.0) > 1e-9)
    raise("InvalidRatio", "train_frac + test_frac must equal 1");

  std::vector<std::string> ids = doc_ids;
  Rng rng(seed);
  rng.shuffle(ids);

  const std::size_t n = ids.size();
  std::size_t n_test = std::min(split_size(static_cast<double>(n) * ratios.test_frac), n);
  const std::size_t pool = n - n_test;
  std::size_t n_val =
      std::min(split_size(static_cast<double>(pool) * ratios.val_of_train_frac), pool);

  CorpusSplit split;
  split.seed = seed;
  split.ratios = ratios;
  split.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                          ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), ids.end());
  return split;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string doc_id;
  std::string rule;
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;  // invariant and compat failures
  std::vector<Violation> warnings;    // advisory findings (token-misaligned boundaries)

  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate_corpus(const std::vector<AnnotatedDoc>& docs,
                                        const SDoHSchema& schema) {
  ValidationReport report;
  auto flag = [&](std::vector<Violation>& sink, const std::string& doc_id, std::string rule,
                  std::string location, std::string message) {
    sink.push_back({doc_id, std::move(rule), std::move(location), std::move(message)});
  };

  std::set<std::string> doc_ids;
  for (const auto& ad : docs) {
    const std::string& id = ad.doc.doc_id;
    if (id.empty()) flag(report.violations, id, "doc-id-empty", "document", "doc_id is empty");
    if (!doc_ids.insert(id).second)
      flag(report.violations, id, "doc-id-duplicate", "document", "doc_id appears twice");

    const std::vector<char32_t> cps = utf8::decode(ad.doc.text);
    const std::vector<Token> tokens = tokenize(ad.doc.text);
    std::set<std::size_t> token_starts, token_ends;
    for (const auto& t : tokens) {
      token_starts.insert(t.start);
      token_ends.insert(t.end);
    }

    std::map<std::string, const EntityAnnotation*> by_id;
    for (const auto& e : ad.entities) {
      if (!by_id.emplace(e.id, &e).second)
        flag(report.violations, id, "entity-id-duplicate", e.id, "entity id appears twice");
      if (e.start >= e.end || e.end > cps.size()) {
        flag(report.violations, id, "entity-span", e.id, "span out of bounds");
        continue;
      }
      if (e.surface != utf8::encode(cps.data() + e.start, e.end - e.start))
        flag(report.violations, id, "entity-surface", e.id, "surface does not match text span");
      if (!schema.is_declared(e.category)) {
        flag(report.violations, id, "entity-category", e.id,
             "category '" + e.category + "' not in schema");
        continue;
      }
      if (!token_starts.count(e.start) || !token_ends.count(e.end))
        flag(report.warnings, id, "entity-token-alignment", e.id,
             "boundary falls inside a token; it will be snapped outward");
    }

    for (std::size_t a = 0; a < ad.entities.size(); ++a)
      for (std::size_t b = a + 1; b < ad.entities.size(); ++b)
        if (std::max(ad.entities[a].start, ad.entities[b].start) <
            std::min(ad.entities[a].end, ad.entities[b].end))
          flag(report.violations, id, "entity-overlap",
               ad.entities[a].id + "," + ad.entities[b].id, "entity spans overlap");

    for (const auto& r : ad.relations) {
      const auto head = by_id.find(r.head);
      const auto tail = by_id.find(r.tail);
      if (head == by_id.end() || tail == by_id.end()) {
        flag(report.violations, id, "relation-dangling", r.id, "endpoint entity is missing");
        continue;
      }
      const CategoryInfo* head_info = schema.find(head->second->category);
      const CategoryInfo* tail_info = schema.find(tail->second->category);
      if (!head_info || !tail_info) continue;  // already flagged as entity-category
      if (head_info->role != Role::Attribute)
        flag(report.violations, id, "relation-head-role", r.id, "head must be an attribute");
      if (tail_info->role != Role::Concept)
        flag(report.violations, id, "relation-tail-role", r.id, "tail must be a concept");
      if (head_info->role == Role::Attribute && tail_info->role == Role::Concept &&
          !schema.compat_allows(head_info->name, tail_info->name, r.rel_type))
        flag(report.violations, id, "relation-compat", r.id,
             "(" + r.rel_type + ", " + head_info->name + ", " + tail_info->name +
                 ") is not permitted by the schema");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Cohen's kappa. The agreement unit is the per-token label; CLI-level
// plumbing converts annotations to BIO label sequences first.

struct KappaReport {
  double kappa = 0.0;
  double p_o = 0.0;  // observed agreement
  double p_e = 0.0;  // expected agreement by chance
  std::size_t unit_count = 0;
};

inline KappaReport compute_kappa(const std::vector<std::string>& labels_a,
                                 const std::vector<std::string>& labels_b) {
  if (labels_a.size() != labels_b.size())
    raise("LengthMismatch", std::to_string(labels_a.size()) + " vs " +
                                std::to_string(labels_b.size()) + " units");
  if (labels_a.empty()) raise("EmptyInput", "kappa needs at least one unit");

  const double n = static_cast<double>(labels_a.size());
  std::size_t agree = 0;
  std::map<std::string, std::size_t> count_a, count_b;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (labels_a[i] == labels_b[i]) ++agree;
    ++count_a[labels_a[i]];
    ++count_b[labels_b[i]];
  }
  KappaReport r;
  r.unit_count = labels_a.size();
  r.p_o = static_cast<double>(agree) / n;
  for (const auto& [label, ca] : count_a) {
    const auto cb = count_b.find(label);
    if (cb != count_b.end())
      r.p_e += (static_cast<double>(ca) / n) * (static_cast<double>(cb->second) / n);
  }
  r.kappa = r.p_e >= 1.0 ? 1.0 : (r.p_o - r.p_e) / (1.0 - r.p_e);
  return r;
}

// ---------------------------------------------------------------------------
// Manifest + directory IO. The manifest is a TSV `doc_id patient_id domain`
// with '#' comment lines.

struct ManifestEntry {
  std::string patient_id;
  Domain domain;
};

using Manifest = std::map<std::string, ManifestEntry>;

inline Manifest parse_manifest(const std::string& content) {
  Manifest m;
  const std::vector<std::string> lines = detail::split_lines(content);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string& line = lines[n];
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
      std::size_t tab = line.find('\t', pos);
      if (tab == std::string::npos) {
        parts.push_back(line.substr(pos));
        break;
      }
      parts.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    if (parts.size() != 3 || parts[0].empty())
      raise("MalformedLine", "manifest line " + std::to_string(n + 1) +
                                 ": expected 'doc_id<TAB>patient_id<TAB>domain'");
    if (m.count(parts[0]))
      raise("MalformedLine", "manifest line " + std::to_string(n + 1) + ": duplicate doc_id '" +
                                 parts[0] + "'");
    m[parts[0]] = {parts[1], Domain::parse(parts[2])};
  }
  return m;
}

inline std::string serialize_manifest(const Manifest& m) {
  std::string out = "# doc_id\tpatient_id\tdomain\n";
  for (const auto& [doc_id, entry] : m)
    out += doc_id + "\t" + entry.patient_id + "\t" + entry.domain.str() + "\n";
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise("FileNotFound", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise("FileWriteFailed", "cannot write " + path.string());
  out << content;
}

// Loads every `<doc_id>.txt` (with optional `<doc_id>.ann`) under `dir`,
// sorted by doc_id. Patient ids and domains come from manifest.tsv when
// present, else patient_id defaults to the doc_id.
inline std::vector<AnnotatedDoc> load_corpus_dir(const std::filesystem::path& dir,
                                                 const SDoHSchema& schema) {
  if (!std::filesystem::is_directory(dir))
    raise("FileNotFound", dir.string() + " is not a directory");
  Manifest manifest;
  if (std::filesystem::exists(dir / "manifest.tsv"))
    manifest = parse_manifest(read_file(dir / "manifest.tsv"));

  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());

  std::vector<AnnotatedDoc> docs;
  docs.reserve(ids.size());
  for (const std::string& id : ids) {
    const std::string text = read_file(dir / (id + ".txt"));
    std::string ann;
    if (std::filesystem::exists(dir / (id + ".ann"))) ann = read_file(dir / (id + ".ann"));
    AnnotatedDoc ad = parse_standoff(text, ann, schema, id);
    const auto m = manifest.find(id);
    ad.doc.patient_id = m != manifest.end() ? m->second.patient_id : id;
    ad.doc.domain = m != manifest.end() ? m->second.domain : Domain{};
    docs.push_back(std::move(ad));
  }
  return docs;
}

inline void write_corpus_dir(const std::filesystem::path& dir,
                             const std::vector<AnnotatedDoc>& docs) {
  std::filesystem::create_directories(dir);
  Manifest manifest;
  for (const auto& ad : docs) {
    write_file(dir / (ad.doc.doc_id + ".txt"), ad.doc.text);
    write_file(dir / (ad.doc.doc_id + ".ann"),
               serialize_standoff(ad.doc, ad.entities, ad.relations));
    manifest[ad.doc.doc_id] = {ad.doc.patient_id, ad.doc.domain};
  }
  write_file(dir / "manifest.tsv", serialize_manifest(manifest));
}

inline std::vector<AnnotatedDoc> select_docs(const std::vector<AnnotatedDoc>& docs,
                                             const std::vector<std::string>& ids) {
  std::map<std::string, const AnnotatedDoc*> by_id;
  for (const auto& d : docs) by_id[d.doc.doc_id] = &d;
  std::vector<AnnotatedDoc> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) raise("DocIdMismatch", "doc_id '" + id + "' not in corpus");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace sdoh
