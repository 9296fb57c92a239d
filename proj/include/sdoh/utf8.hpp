#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sdoh/error.hpp"

// Minimal strict UTF-8 codec. All annotation offsets in this library are
// Unicode scalar-value indices, never byte indices, so every span operation
// goes through these helpers.

namespace sdoh::utf8 {

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      raise("InvalidUtf8", "bad lead byte at byte offset " + std::to_string(i));
    }
    if (i + len > s.size())
      raise("InvalidUtf8", "truncated sequence at byte offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80)
        raise("InvalidUtf8", "bad continuation byte at byte offset " + std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kSmallest[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (len > 1 && cp < kSmallest[len])
      raise("InvalidUtf8", "overlong encoding at byte offset " + std::to_string(i));
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      raise("InvalidUtf8", "invalid scalar value at byte offset " + std::to_string(i));
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline std::string encode(const char32_t* p, std::size_t n) {
  std::string out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) append(out, p[i]);
  return out;
}

inline std::string encode(const std::vector<char32_t>& cps) {
  return encode(cps.data(), cps.size());
}

inline std::size_t length(std::string_view s) { return decode(s).size(); }

// Substring by scalar offsets [start, end).
inline std::string slice(std::string_view s, std::size_t start, std::size_t end) {
  const std::vector<char32_t> cps = decode(s);
  if (start > end || end > cps.size())
    raise("SpanOutOfBounds", "slice [" + std::to_string(start) + "," + std::to_string(end) +
                                 ") over text of length " + std::to_string(cps.size()));
  return encode(cps.data() + start, end - start);
}

}  // namespace sdoh::utf8
