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

// Turning clusters of hypotheses into transcriptions: ROVER-style
// confusion-network alignment with per-slot majority voting, and exact-text
// frequency voting over the whole hypothesis set.

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcm/errors.hpp"
#include "hcm/hyp_cluster.hpp"
#include "hcm/textdist.hpp"

namespace hcm {

struct WordVote {
  int count = 0;
  double score_sum = 0.0;

  double mean_score() const { return count ? score_sum / count : 0.0; }
};

/// One aligned position. NULL votes (hypotheses with no word here) are kept
/// apart from real words so that NULL can never be emitted.
struct Slot {
  std::map<Word, WordVote> words;
  int null_votes = 0;

  int total() const {
    int t = null_votes;
    for (const auto& [w, v] : words) t += v.count;
    return t;
  }
};

struct ConfusionNetwork {
  std::vector<Slot> slots;
  int num_aligned = 0;
};

namespace detail {

// Alignment order: descending score, ascending source_rank, input position.
inline std::vector<std::size_t> alignment_order(std::span<const Hypothesis> cluster) {
  std::vector<std::size_t> order(cluster.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cluster[a].score != cluster[b].score) return cluster[a].score > cluster[b].score;
    return cluster[a].source_rank < cluster[b].source_rank;
  });
  return order;
}

// Aligns `words` against the current grid and appends a row. grid[h][s] is
// the word hypothesis h placed in slot s, or nullptr for NULL.
inline void align_into(std::vector<std::vector<const Word*>>& grid, std::size_t num_slots, const WordSeq& words) {
  const std::size_t m = words.size();
  std::vector<bool> has_null(num_slots, false);
  std::vector<std::vector<const Word*>> present(num_slots);
  for (const auto& row : grid)
    for (std::size_t s = 0; s < num_slots; ++s) {
      if (row[s] == nullptr)
        has_null[s] = true;
      else if (std::none_of(present[s].begin(), present[s].end(), [&](const Word* w) { return *w == *row[s]; }))
        present[s].push_back(row[s]);
    }
  const auto contains = [&](std::size_t s, const Word& w) {
    return std::any_of(present[s].begin(), present[s].end(), [&](const Word* p) { return *p == w; });
  };

  // cost[s][j]: first s slots against first j words.
  const std::size_t w = m + 1;
  std::vector<int> cost((num_slots + 1) * w, 0);
  for (std::size_t j = 1; j <= m; ++j) cost[j] = static_cast<int>(j);
  for (std::size_t s = 1; s <= num_slots; ++s) {
    cost[s * w] = cost[(s - 1) * w] + (has_null[s - 1] ? 0 : 1);
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = cost[(s - 1) * w + j - 1] + (contains(s - 1, words[j - 1]) ? 0 : 1);
      const int skip = cost[(s - 1) * w + j] + (has_null[s - 1] ? 0 : 1);
      const int ins = cost[s * w + j - 1] + 1;
      cost[s * w + j] = std::min({diag, skip, ins});
    }
  }

  enum class Move { kAlign, kSkip, kInsert };
  std::vector<Move> path;
  std::size_t s = num_slots, j = m;
  while (s > 0 || j > 0) {
    const int here = cost[s * w + j];
    if (s > 0 && j > 0 && here == cost[(s - 1) * w + j - 1] + (contains(s - 1, words[j - 1]) ? 0 : 1)) {
      path.push_back(Move::kAlign);
      --s, --j;
    } else if (s > 0 && here == cost[(s - 1) * w + j] + (has_null[s - 1] ? 0 : 1)) {
      path.push_back(Move::kSkip);
      --s;
    } else {
      path.push_back(Move::kInsert);
      --j;
    }
  }
  std::reverse(path.begin(), path.end());

  std::vector<std::vector<const Word*>> next(grid.size());
  std::vector<const Word*> row;
  s = 0, j = 0;
  for (Move mv : path) {
    switch (mv) {
      case Move::kAlign:
        for (std::size_t h = 0; h < grid.size(); ++h) next[h].push_back(grid[h][s]);
        row.push_back(&words[j]);
        ++s, ++j;
        break;
      case Move::kSkip:
        for (std::size_t h = 0; h < grid.size(); ++h) next[h].push_back(grid[h][s]);
        row.push_back(nullptr);
        ++s;
        break;
      case Move::kInsert:
        for (std::size_t h = 0; h < grid.size(); ++h) next[h].push_back(nullptr);
        row.push_back(&words[j]);
        ++j;
        break;
    }
  }
  next.push_back(std::move(row));
  grid = std::move(next);
}

}  // namespace detail

/// Builds the network by aligning hypotheses one at a time (best score
/// first) with costs: match 0, substitution 1, extra hypothesis word 1,
/// skipped slot 1, skipped slot that already holds NULL 0. A hypothesis
/// whose text equals an already aligned one reuses that row, which is a
/// zero-cost alignment.
inline ConfusionNetwork build_confusion_network(std::span<const Hypothesis> cluster) {
  if (cluster.empty()) throw ValidationError("cannot build a confusion network from an empty cluster");
  const auto order = detail::alignment_order(cluster);

  std::vector<std::vector<const Word*>> grid;
  std::vector<std::size_t> row_of(cluster.size());
  std::unordered_map<std::string, std::size_t> seen;  // joined text -> grid row
  for (std::size_t idx : order) {
    const auto& text = cluster[idx].text;
    const std::string key = join_words(text);
    if (const auto it = seen.find(key); it != seen.end()) {
      // Copy words from this hypothesis so the row owns matching pointers.
      std::vector<const Word*> row;
      std::size_t j = 0;
      for (const Word* p : grid[it->second]) row.push_back(p ? &text[j++] : nullptr);
      grid.push_back(std::move(row));
    } else {
      const std::size_t slots = grid.empty() ? 0 : grid.front().size();
      detail::align_into(grid, slots, text);
      seen.emplace(key, grid.size() - 1);
    }
    row_of[idx] = grid.size() - 1;
  }

  ConfusionNetwork net;
  net.num_aligned = static_cast<int>(cluster.size());
  const std::size_t slots = grid.front().size();
  net.slots.resize(slots);
  for (std::size_t idx = 0; idx < cluster.size(); ++idx) {
    const auto& row = grid[row_of[idx]];
    for (std::size_t s = 0; s < slots; ++s) {
      if (row[s] == nullptr) {
        ++net.slots[s].null_votes;
      } else {
        auto& v = net.slots[s].words[*row[s]];
        ++v.count;
        v.score_sum += cluster[idx].score;
      }
    }
  }
  return net;
}

/// Per slot, the most voted word. Ties: any word beats NULL, then the
/// higher mean score of supporting hypotheses, then lexicographic order.
inline WordSeq rover_vote(const ConfusionNetwork& net) {
  WordSeq out;
  for (const auto& slot : net.slots) {
    const Word* best = nullptr;
    const WordVote* best_vote = nullptr;
    for (const auto& [word, vote] : slot.words) {
      // std::map iterates in lexicographic order, so strict comparisons keep
      // the smallest word on a full tie.
      if (best == nullptr || vote.count > best_vote->count ||
          (vote.count == best_vote->count && vote.mean_score() > best_vote->mean_score())) {
        best = &word;
        best_vote = &vote;
      }
    }
    if (best != nullptr && best_vote->count >= slot.null_votes) out.push_back(*best);
  }
  return out;
}

struct MergedTranscription {
  WordSeq text;
  int support = 0;          // cluster size
  std::vector<int> tokens;  // speaker tokens of the members
  double mean_score = 0.0;

  friend bool operator==(const MergedTranscription&, const MergedTranscription&) = default;
};

struct MergedOutput {
  std::vector<MergedTranscription> transcriptions;
};

inline MergedTranscription merge_cluster(std::span<const Hypothesis> cluster) {
  MergedTranscription t;
  t.text = rover_vote(build_confusion_network(cluster));
  t.support = static_cast<int>(cluster.size());
  double sum = 0.0;
  for (const auto& h : cluster) {
    t.tokens.push_back(h.speaker_token);
    sum += h.score;
  }
  t.mean_score = sum / static_cast<double>(cluster.size());
  return t;
}

/// One transcription per cluster, ordered by descending support, then
/// descending mean member score.
inline MergedOutput merge_clusters(const HypothesisClustering& clustering) {
  if (clustering.clusters.empty()) throw ValidationError("no clusters to merge");
  MergedOutput out;
  for (const auto& c : clustering.clusters) out.transcriptions.push_back(merge_cluster(c));
  std::stable_sort(out.transcriptions.begin(), out.transcriptions.end(), [](const auto& a, const auto& b) {
    if (a.support != b.support) return a.support > b.support;
    return a.mean_score > b.mean_score;
  });
  return out;
}

struct VoteEntry {
  WordSeq text;
  int count = 0;
  std::vector<int> tokens;
  double mean_score = 0.0;
};

struct SimpleVoteResult {
  std::vector<VoteEntry> entries;
  /// Fewer distinct texts than requested.
  bool shortfall = false;
};

/// Exact-text frequency vote; returns the `k` most frequent distinct texts.
/// Equal counts keep first-occurrence order.
inline SimpleVoteResult simple_vote(std::span<const Hypothesis> hyps, int k) {
  if (hyps.empty()) throw ValidationError("no hypotheses");
  if (k < 1) throw ValidationError("simple voting requires K >= 1");
  std::vector<VoteEntry> entries;
  std::vector<double> sums;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& h : hyps) {
    auto [it, fresh] = index.try_emplace(join_words(h.text), entries.size());
    if (fresh) {
      entries.push_back({h.text, 0, {}, 0.0});
      sums.push_back(0.0);
    }
    auto& e = entries[it->second];
    ++e.count;
    e.tokens.push_back(h.speaker_token);
    sums[it->second] += h.score;
  }
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].mean_score = sums[i] / entries[i].count;
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.count > b.count; });

  SimpleVoteResult r;
  r.shortfall = entries.size() < static_cast<std::size_t>(k);
  if (!r.shortfall) entries.resize(k);
  r.entries = std::move(entries);
  return r;
}

}  // namespace hcm
