#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sdoh/corpus.hpp"
#include "sdoh/error.hpp"
#include "sdoh/rng.hpp"
#include "sdoh/textproc.hpp"
#include "sdoh/types.hpp"

// Keyword-driven note selection: lexicon matching, the at-least-N-unique-
// mentions filter, snowball candidate harvesting, and stratified sampling.

namespace sdoh {

enum class KeywordProvenance { Seed, Snowball, Manual };

inline const char* to_string(KeywordProvenance p) {
  switch (p) {
    case KeywordProvenance::Seed: return "seed";
    case KeywordProvenance::Snowball: return "snowball";
    default: return "manual";
  }
}

// Lowercase, whitespace-normalized, unique phrases. File format: one phrase
// per line, optional `<TAB>provenance`, '#' comments.
struct KeywordLexicon {
  std::vector<std::string> phrases;  // normalized, insertion order
  std::map<std::string, KeywordProvenance> provenance;
  std::string version = "1";

  static std::string normalize(std::string_view raw) {
    std::string out;
    bool pending_space = false;
    for (const Token& t : tokenize(raw)) {
      if (pending_space) out += ' ';
      out += ascii_lower(t.text);
      pending_space = true;
    }
    return out;
  }

  bool contains(const std::string& normalized) const {
    return provenance.count(normalized) > 0;
  }

  // Returns false when the normalized phrase was already present or empty.
  bool add(std::string_view raw, KeywordProvenance p = KeywordProvenance::Manual) {
    const std::string phrase = normalize(raw);
    if (phrase.empty() || contains(phrase)) return false;
    phrases.push_back(phrase);
    provenance[phrase] = p;
    return true;
  }

  static KeywordLexicon parse(const std::string& content) {
    KeywordLexicon lex;
    for (const std::string& line : detail::split_lines(content)) {
      if (line.empty() || line[0] == '#') continue;
      const std::size_t tab = line.find('\t');
      const std::string phrase = tab == std::string::npos ? line : line.substr(0, tab);
      KeywordProvenance p = KeywordProvenance::Manual;
      if (tab != std::string::npos) {
        const std::string tag = line.substr(tab + 1);
        if (tag == "seed") p = KeywordProvenance::Seed;
        else if (tag == "snowball") p = KeywordProvenance::Snowball;
      }
      lex.add(phrase, p);
    }
    return lex;
  }

  std::string serialize() const {
    std::string out = "# phrase\tprovenance\n";
    for (const auto& phrase : phrases)
      out += phrase + "\t" + to_string(provenance.at(phrase)) + "\n";
    return out;
  }
};

struct KeywordMatch {
  std::string phrase;  // normalized lexicon phrase
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const KeywordMatch&) const = default;
};

namespace detail {

inline std::vector<std::string> lower_token_texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(ascii_lower(t.text));
  return out;
}

}  // namespace detail

// Case-insensitive whole-token phrase matching; overlapping matches of
// distinct phrases are all reported, ordered by offset. `substring_mode`
// instead scans the lowercased scalar text for raw containment.
inline std::vector<KeywordMatch> match_keywords(std::string_view text, const KeywordLexicon& lex,
                                                bool substring_mode = false) {
  std::vector<KeywordMatch> out;
  if (substring_mode) {
    const std::vector<char32_t> cps = utf8::decode(text);
    std::vector<char32_t> lowered = cps;
    for (char32_t& c : lowered)
      if (c >= U'A' && c <= U'Z') c += U'a' - U'A';
    const std::string hay = utf8::encode(lowered);
    for (const auto& phrase : lex.phrases) {
      // byte offsets -> scalar offsets via prefix lengths
      std::size_t from = 0;
      while (true) {
        const std::size_t at = hay.find(phrase, from);
        if (at == std::string::npos) break;
        const std::size_t start = utf8::length(std::string_view(hay).substr(0, at));
        out.push_back({phrase, start, start + utf8::length(phrase)});
        from = at + 1;
      }
    }
  } else {
    const std::vector<Token> tokens = tokenize(text);
    const std::vector<std::string> lowered = detail::lower_token_texts(tokens);
    for (const auto& phrase : lex.phrases) {
      std::vector<std::string> want;
      for (const Token& t : tokenize(phrase)) want.push_back(ascii_lower(t.text));
      if (want.empty()) continue;
      for (std::size_t i = 0; i + want.size() <= lowered.size(); ++i) {
        bool hit = true;
        for (std::size_t k = 0; k < want.size() && hit; ++k) hit = lowered[i + k] == want[k];
        if (hit) out.push_back({phrase, tokens[i].start, tokens[i + want.size() - 1].end});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const KeywordMatch& a, const KeywordMatch& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.phrase < b.phrase;
  });
  return out;
}

struct SelectionRow {
  std::string doc_id;
  std::size_t unique_phrases = 0;
  std::size_t total_matches = 0;
  bool selected = false;
};

enum class UniquenessRule { DistinctPhrases, DistinctOffsets };

inline std::vector<SelectionRow> select_report(
    const std::vector<std::pair<std::string, std::string>>& notes, const KeywordLexicon& lex,
    int min_unique = 3, UniquenessRule rule = UniquenessRule::DistinctPhrases) {
  if (min_unique < 1) raise("InvalidConfig", "min_unique must be >= 1");
  std::vector<SelectionRow> rows;
  rows.reserve(notes.size());
  for (const auto& [doc_id, text] : notes) {
    const std::vector<KeywordMatch> matches = match_keywords(text, lex);
    std::set<std::string> distinct_phrases;
    std::set<std::pair<std::size_t, std::size_t>> distinct_spans;
    for (const auto& m : matches) {
      distinct_phrases.insert(m.phrase);
      distinct_spans.insert({m.start, m.end});
    }
    SelectionRow row;
    row.doc_id = doc_id;
    row.unique_phrases = distinct_phrases.size();
    row.total_matches = matches.size();
    const std::size_t unique = rule == UniquenessRule::DistinctPhrases ? distinct_phrases.size()
                                                                       : distinct_spans.size();
    row.selected = unique >= static_cast<std::size_t>(min_unique);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::string> select_notes(
    const std::vector<std::pair<std::string, std::string>>& notes, const KeywordLexicon& lex,
    int min_unique = 3, UniquenessRule rule = UniquenessRule::DistinctPhrases) {
  std::vector<std::string> out;
  for (const auto& row : select_report(notes, lex, min_unique, rule))
    if (row.selected) out.push_back(row.doc_id);
  return out;
}

// Normalized gold-entity surfaces whose token sequences contain no existing
// lexicon phrase, ranked by corpus frequency then lexicographically.
// Acceptance of candidates is out of band; the review loop reaches a fixed
// point once every surface is covered.
inline std::vector<std::string> snowball_expand(const KeywordLexicon& lex,
                                                const std::vector<AnnotatedDoc>& annotated_docs) {
  std::vector<std::vector<std::string>> lexicon_tokens;
  for (const auto& phrase : lex.phrases) {
    std::vector<std::string> toks;
    for (const Token& t : tokenize(phrase)) toks.push_back(ascii_lower(t.text));
    if (!toks.empty()) lexicon_tokens.push_back(std::move(toks));
  }
  auto covered = [&](const std::vector<std::string>& words) {
    for (const auto& want : lexicon_tokens) {
      if (want.size() > words.size()) continue;
      for (std::size_t i = 0; i + want.size() <= words.size(); ++i) {
        bool hit = true;
        for (std::size_t k = 0; k < want.size() && hit; ++k) hit = words[i + k] == want[k];
        if (hit) return true;
      }
    }
    return false;
  };

  std::map<std::string, std::size_t> frequency;
  for (const auto& ad : annotated_docs) {
    for (const auto& e : ad.entities) {
      const std::string normalized = KeywordLexicon::normalize(e.surface);
      if (normalized.empty()) continue;
      std::vector<std::string> words;
      for (const Token& t : tokenize(normalized)) words.push_back(t.text);
      if (!covered(words)) ++frequency[normalized];
    }
  }

  std::vector<std::string> candidates;
  for (const auto& [phrase, count] : frequency) candidates.push_back(phrase);
  std::sort(candidates.begin(), candidates.end(), [&](const std::string& a, const std::string& b) {
    if (frequency[a] != frequency[b]) return frequency[a] > frequency[b];
    return a < b;
  });
  return candidates;
}

// Proportional per-stratum quotas with largest-remainder rounding, then a
// seeded draw inside each stratum. Output is ordered by stratum name.
template <typename Item>
inline std::vector<Item> stratified_sample(
    const std::vector<std::pair<Item, std::string>>& items_with_strata, std::size_t n,
    std::uint64_t seed) {
  if (n > items_with_strata.size())
    raise("SampleTooLarge", "requested " + std::to_string(n) + " of " +
                                std::to_string(items_with_strata.size()) + " items");
  std::map<std::string, std::vector<Item>> strata;
  for (const auto& [item, stratum] : items_with_strata) strata[stratum].push_back(item);

  const double total = static_cast<double>(items_with_strata.size());
  struct Quota {
    std::string stratum;
    std::size_t quota;
    double remainder;
    std::size_t size;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [stratum, members] : strata) {
    const double exact = static_cast<double>(n) * static_cast<double>(members.size()) / total;
    const std::size_t base = static_cast<std::size_t>(exact);
    quotas.push_back({stratum, base, exact - static_cast<double>(base), members.size()});
    assigned += base;
  }
  std::vector<std::size_t> order(quotas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (quotas[a].remainder != quotas[b].remainder) return quotas[a].remainder > quotas[b].remainder;
    if (quotas[a].size != quotas[b].size) return quotas[a].size > quotas[b].size;
    return quotas[a].stratum < quotas[b].stratum;
  });
  for (std::size_t k = 0; assigned < n; ++k) {
    Quota& q = quotas[order[k % order.size()]];
    if (q.quota < q.size) {
      ++q.quota;
      ++assigned;
    }
  }

  Rng rng(seed);
  std::vector<Item> out;
  for (const Quota& q : quotas) {
    std::vector<Item>& members = strata[q.stratum];
    rng.shuffle(members);
    for (std::size_t i = 0; i < q.quota; ++i) out.push_back(members[i]);
  }
  return out;
}

}  // namespace sdoh
