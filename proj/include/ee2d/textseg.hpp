// SPDX-License-Identifier: Apache-2.0
//
// Rule-based sentence splitting for informal review text.
//
// A boundary is placed after a single '.' followed by whitespace, or after a
// run of '!' / '?' followed by whitespace. A period never ends a sentence
// when it belongs to a run of periods ("...") or when the token it closes is
// a known abbreviation ("Dr.", "etc.", ...). Only ASCII terminators and ASCII
// whitespace are recognised; other code points pass through unsplit.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "ee2d/error.hpp"

namespace ee2d::textseg {

struct SentenceList {
  std::vector<std::string> sentences;
  std::size_t source_length = 0;  // code points in the input

  std::size_t size() const { return sentences.size(); }
};

inline const std::vector<std::string>& default_abbreviations() {
  static const std::vector<std::string> kAbbrev = {
      "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "etc.",
      "e.g.", "i.e.", "vs.", "Inc.", "St."};
  return kAbbrev;
}

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
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
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

inline std::size_t count_code_points(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

// Look-behind guard for the period at `pos`: true when the split must be
// suppressed.
inline bool guarded_period(std::string_view text, std::size_t pos,
                           const std::vector<std::string>& abbreviations) {
  if (pos > 0 && text[pos - 1] == '.') return true;  // tail of "..."
  std::size_t start = pos;
  while (start > 0 && !is_space(text[start - 1])) --start;
  std::string_view token = text.substr(start, pos + 1 - start);
  // Opening brackets and quotes are not part of the abbreviation.
  while (!token.empty() &&
         (token.front() == '(' || token.front() == '"' ||
          token.front() == '\'' || token.front() == '['))
    token.remove_prefix(1);
  return std::any_of(abbreviations.begin(), abbreviations.end(),
                     [&](const std::string& a) { return iequals(token, a); });
}

}  // namespace detail

inline SentenceList split_sentences(
    std::string_view text,
    const std::vector<std::string>& abbreviations = default_abbreviations()) {
  if (detail::trim(text).empty())
    throw EmptyInput("input text is empty or whitespace-only");

  SentenceList out;
  out.source_length = detail::count_code_points(text);

  auto emit = [&](std::size_t from, std::size_t to) {
    auto s = detail::trim(text.substr(from, to - from));
    if (!s.empty()) out.sentences.emplace_back(s);
  };

  std::size_t sentence_start = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    std::size_t end = 0;  // one past the terminator when a boundary is found
    if (c == '.') {
      if (i + 1 < n && detail::is_space(text[i + 1]) &&
          !detail::guarded_period(text, i, abbreviations))
        end = i + 1;
    } else if (c == '!' || c == '?') {
      std::size_t j = i;
      while (j < n && (text[j] == '!' || text[j] == '?')) ++j;
      if (j < n && detail::is_space(text[j])) end = j;
      else {
        i = j;
        continue;
      }
    }
    if (end == 0) {
      ++i;
      continue;
    }
    emit(sentence_start, end);
    i = end;
    while (i < n && detail::is_space(text[i])) ++i;
    sentence_start = i;
  }
  emit(sentence_start, n);
  return out;
}

// One abbreviation per line; blank lines and lines starting with '#' skipped.
inline std::vector<std::string> load_abbreviations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open abbreviation file '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(t);
  }
  return out;
}

}  // namespace ee2d::textseg
