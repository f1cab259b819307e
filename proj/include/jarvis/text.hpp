#pragma once

// Small UTF-8 aware string helpers shared by the ingestion, memory and
// prompt-assembly code. Everything here operates on byte strings that are
// assumed to hold UTF-8; malformed sequences are counted byte-by-byte.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace jarvis {

namespace text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_';
}

inline bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_alnum(char c) {
  return is_alpha(c) || (c >= '0' && c <= '9');
}

inline char to_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = to_lower(c);
  return out;
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (to_lower(a[i]) != to_lower(b[i])) return false;
  }
  return true;
}

inline bool is_continuation_byte(char c) {
  return (static_cast<unsigned char>(c) & 0xC0U) == 0x80U;
}

// Number of code points (continuation bytes are not counted).
inline std::size_t char_count(std::string_view s) {
  std::size_t n = 0;
  for (char c : s) {
    if (!is_continuation_byte(c)) ++n;
  }
  return n;
}

// Longest prefix holding at most max_chars code points, never splitting a
// multi-byte sequence.
inline std::string_view prefix_chars(std::string_view s, std::size_t max_chars) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_continuation_byte(s[i])) {
      if (seen == max_chars) return s.substr(0, i);
      ++seen;
    }
  }
  return s;
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

// Lower-cased runs of ASCII letters/digits.
inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_alnum(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && is_alnum(s[i])) ++i;
    if (i > start) out.push_back(lower(s.substr(start, i - start)));
  }
  return out;
}

}  // namespace text

// Conservative token estimate used for every context-budget decision:
// ceil(code points / 4).
inline std::size_t estimate_tokens(std::string_view s) {
  return (text::char_count(s) + 3) / 4;
}

// Cuts s from the tail so that estimate_tokens(result) <= budget.
inline std::string truncate_to_tokens(std::string_view s, std::size_t budget) {
  if (estimate_tokens(s) <= budget) return std::string(s);
  return std::string(text::prefix_chars(s, budget * 4));
}

}  // namespace jarvis
