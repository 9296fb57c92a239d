#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sdoh/error.hpp"
#include "sdoh/types.hpp"
#include "sdoh/utf8.hpp"

// Deterministic rule-based tokenization and BIO label handling. Offsets are
// Unicode scalar indices throughout.

namespace sdoh {

struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t sentence_index = 0;

  bool operator==(const Token&) const = default;
};

struct BIOLabel {
  enum class Tag { B, I, O };
  Tag tag = Tag::O;
  std::string category;  // empty iff tag == O

  bool operator==(const BIOLabel&) const = default;

  std::string str() const {
    switch (tag) {
      case Tag::B: return "B-" + category;
      case Tag::I: return "I-" + category;
      default: return "O";
    }
  }

  static BIOLabel outside() { return {}; }
  static BIOLabel begin(std::string category) { return {Tag::B, std::move(category)}; }
  static BIOLabel inside(std::string category) { return {Tag::I, std::move(category)}; }

  static BIOLabel parse(std::string_view s) {
    if (s == "O") return outside();
    if (s.size() > 2 && s[1] == '-') {
      if (s[0] == 'B') return begin(std::string(s.substr(2)));
      if (s[0] == 'I') return inside(std::string(s.substr(2)));
    }
    raise("MalformedLabel", "cannot parse BIO label '" + std::string(s) + "'");
  }
};

namespace detail {

inline bool is_ws(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

inline bool is_word(char32_t cp) {
  if (cp < 0x80)
    return (cp >= U'0' && cp <= U'9') || (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
  return !is_ws(cp);  // non-ASCII, non-whitespace counts as word material
}

inline bool is_upper_ascii(char32_t cp) { return cp >= U'A' && cp <= U'Z'; }

inline bool is_sentence_punct(char32_t cp) { return cp == U'.' || cp == U'!' || cp == U'?'; }

}  // namespace detail

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

// Maximal runs of letters/digits are tokens, every punctuation character is
// its own token, whitespace separates. Sentences break at . ! ? followed by
// whitespace and an uppercase letter, and at newlines.
inline std::vector<Token> tokenize(std::string_view text) {
  const std::vector<char32_t> cps = utf8::decode(text);
  std::vector<Token> out;
  std::size_t i = 0;
  std::size_t sentence = 0;
  bool emitted_in_sentence = false;
  bool pending_boundary = false;  // set after a . ! ? token

  while (i < cps.size()) {
    if (detail::is_ws(cps[i])) {
      bool saw_newline = false;
      std::size_t j = i;
      while (j < cps.size() && detail::is_ws(cps[j])) {
        saw_newline = saw_newline || cps[j] == U'\n';
        ++j;
      }
      const bool boundary =
          saw_newline || (pending_boundary && j < cps.size() && detail::is_upper_ascii(cps[j]));
      if (boundary && emitted_in_sentence && j < cps.size()) {
        ++sentence;
        emitted_in_sentence = false;
      }
      pending_boundary = false;
      i = j;
      continue;
    }
    std::size_t j = i;
    if (detail::is_word(cps[i])) {
      while (j < cps.size() && detail::is_word(cps[j])) ++j;
      pending_boundary = false;
    } else {
      j = i + 1;  // punctuation, one codepoint per token
      pending_boundary = detail::is_sentence_punct(cps[i]);
    }
    out.push_back({utf8::encode(cps.data() + i, j - i), i, j, sentence});
    emitted_in_sentence = true;
    i = j;
  }
  return out;
}

// Token index range [lo, hi] of tokens overlapping scalar span [start, end),
// or nullopt-like {1, 0} when none do.
inline std::pair<std::size_t, std::size_t> overlapping_token_range(
    const std::vector<Token>& tokens, std::size_t start, std::size_t end) {
  std::size_t lo = tokens.size(), hi = 0;
  bool any = false;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (std::max(start, tokens[t].start) < std::min(end, tokens[t].end)) {
      if (!any) lo = t;
      hi = t;
      any = true;
    }
  }
  if (!any) return {1, 0};
  return {lo, hi};
}

// Extends entity boundaries outward to enclosing token boundaries and
// renumbers ids in span order; surfaces are re-read from the text.
inline std::vector<EntityAnnotation> snap_entities(const std::string& text,
                                                   const std::vector<Token>& tokens,
                                                   const std::vector<EntityAnnotation>& entities) {
  std::vector<EntityAnnotation> out;
  for (const auto& e : entities) {
    const auto [lo, hi] = overlapping_token_range(tokens, e.start, e.end);
    if (lo > hi) raise("EntityOutsideText", "entity " + e.id + " overlaps no token");
    EntityAnnotation s = e;
    s.start = tokens[lo].start;
    s.end = tokens[hi].end;
    s.surface = utf8::slice(text, s.start, s.end);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return std::pair(a.start, a.end) < std::pair(b.start, b.end); });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].id = "T" + std::to_string(k + 1);
  return out;
}

// One label per token. A token overlapping an entity takes that entity's
// category; the first such token gets B-, later ones I-. Entities whose
// snapped token ranges overlap are an error.
inline std::vector<BIOLabel> encode_bio(const std::vector<Token>& tokens,
                                        const std::vector<EntityAnnotation>& entities) {
  std::vector<BIOLabel> labels(tokens.size(), BIOLabel::outside());
  std::vector<int> owner(tokens.size(), -1);
  for (std::size_t e = 0; e < entities.size(); ++e) {
    const auto [lo, hi] = overlapping_token_range(tokens, entities[e].start, entities[e].end);
    if (lo > hi)
      raise("EntityOutsideText", "entity " + entities[e].id + " overlaps no token");
    for (std::size_t t = lo; t <= hi; ++t) {
      if (owner[t] >= 0)
        raise("OverlappingEntities", "entities " + entities[owner[t]].id + " and " +
                                         entities[e].id + " overlap at token " + std::to_string(t));
      owner[t] = static_cast<int>(e);
      labels[t] = t == lo ? BIOLabel::begin(entities[e].category)
                          : BIOLabel::inside(entities[e].category);
    }
  }
  return labels;
}

// Maximal B followed by matching I runs become entities. An I-X that does
// not continue a run of X is repaired as B-X.
inline std::vector<EntityAnnotation> decode_bio(const std::string& text,
                                                const std::vector<Token>& tokens,
                                                const std::vector<BIOLabel>& labels) {
  if (tokens.size() != labels.size())
    raise("LengthMismatch", std::to_string(tokens.size()) + " tokens vs " +
                                std::to_string(labels.size()) + " labels");
  std::vector<EntityAnnotation> out;
  std::size_t run_start = 0;
  std::string run_category;
  bool in_run = false;
  auto flush = [&](std::size_t end_token) {
    if (!in_run) return;
    EntityAnnotation e;
    e.category = run_category;
    e.start = tokens[run_start].start;
    e.end = tokens[end_token].end;
    e.surface = utf8::slice(text, e.start, e.end);
    out.push_back(std::move(e));
    in_run = false;
  };
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const BIOLabel& l = labels[t];
    if (l.tag == BIOLabel::Tag::O) {
      flush(t == 0 ? 0 : t - 1);
    } else if (l.tag == BIOLabel::Tag::B || !in_run || run_category != l.category) {
      flush(t == 0 ? 0 : t - 1);
      in_run = true;
      run_start = t;
      run_category = l.category;
    }
    // I continuing the current run: nothing to do
  }
  flush(labels.empty() ? 0 : labels.size() - 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k].id = "T" + std::to_string(k + 1);
  return out;
}

// One token per line `surface<TAB>start<TAB>end<TAB>label`, blank line
// between sentences. Training-example interchange format.
inline std::string conll_export(const std::vector<Token>& tokens,
                                const std::vector<BIOLabel>& labels) {
  if (tokens.size() != labels.size())
    raise("LengthMismatch", std::to_string(tokens.size()) + " tokens vs " +
                                std::to_string(labels.size()) + " labels");
  std::string out;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (t > 0 && tokens[t].sentence_index != tokens[t - 1].sentence_index) out += "\n";
    out += tokens[t].text;
    out += "\t" + std::to_string(tokens[t].start);
    out += "\t" + std::to_string(tokens[t].end);
    out += "\t" + labels[t].str();
    out += "\n";
  }
  return out;
}

}  // namespace sdoh
