// Copyright 2026 The HCM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Word-level Levenshtein distance and the text helpers around it.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <ranges>
#include <string>
#include <string_view>
#include <vector>

namespace hcm {

using Word = std::string;
using WordSeq = std::vector<Word>;

/// Splits on ASCII whitespace. Case and punctuation are left untouched.
inline WordSeq split_words(std::string_view text) {
  WordSeq out;
  std::size_t i = 0;
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join_words(const WordSeq& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

// Speaker tokens are written as "<spk_N>" when they appear inline in text.

inline std::string format_speaker_token(int token) {
  return "<spk_" + std::to_string(token) + ">";
}

inline std::optional<int> parse_speaker_token(std::string_view word) {
  constexpr std::string_view prefix = "<spk_";
  if (word.size() <= prefix.size() + 1 || !word.starts_with(prefix) || word.back() != '>')
    return std::nullopt;
  const auto digits = word.substr(prefix.size(), word.size() - prefix.size() - 1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || value < 0) return std::nullopt;
  return value;
}

inline WordSeq strip_speaker_tokens(WordSeq words) {
  std::erase_if(words, [](const Word& w) { return parse_speaker_token(w).has_value(); });
  return words;
}

/// Optional CLI preprocessing: lowercase and drop ASCII punctuation.
inline WordSeq normalize_words(const WordSeq& words) {
  WordSeq out;
  for (const auto& w : words) {
    std::string n;
    for (unsigned char c : w) {
      if (std::ispunct(c) && c != '\'') continue;
      n.push_back(static_cast<char>(std::tolower(c)));
    }
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

/// Alignment counts of a hypothesis against a reference. `ref_len` is the
/// length of the first argument of edit_distance.
struct EditStats {
  int distance = 0;
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int ref_len = 0;

  friend bool operator==(const EditStats&, const EditStats&) = default;
};

/// Unit-cost Levenshtein distance between `ref` and `hyp`. Insertions are
/// tokens present only in `hyp`, deletions tokens present only in `ref`.
/// Among equal-cost alignments the backtrace prefers match/substitution,
/// then deletion, then insertion.
template <std::ranges::random_access_range R1, std::ranges::random_access_range R2>
EditStats edit_distance(const R1& ref, const R2& hyp) {
  const std::size_t n = std::ranges::size(ref);
  const std::size_t m = std::ranges::size(hyp);
  const std::size_t w = m + 1;
  std::vector<int> cost((n + 1) * w);
  for (std::size_t j = 0; j <= m; ++j) cost[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cost[i * w] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = cost[(i - 1) * w + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int del = cost[(i - 1) * w + j] + 1;
      const int ins = cost[i * w + j - 1] + 1;
      cost[i * w + j] = std::min({diag, del, ins});
    }
  }

  EditStats stats;
  stats.distance = cost[n * w + m];
  stats.ref_len = static_cast<int>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const int here = cost[i * w + j];
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (here == cost[(i - 1) * w + j - 1] + (same ? 0 : 1)) {
        if (!same) ++stats.substitutions;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && here == cost[(i - 1) * w + j] + 1) {
      ++stats.deletions;
      --i;
    } else {
      ++stats.insertions;
      --j;
    }
  }
  return stats;
}

/// Edit distance divided by the longer length; 0 when both are empty.
template <std::ranges::random_access_range R1, std::ranges::random_access_range R2>
double normalized_edit_distance(const R1& a, const R2& b) {
  const auto longest = std::max(std::ranges::size(a), std::ranges::size(b));
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(a, b).distance) / static_cast<double>(longest);
}

}  // namespace hcm
