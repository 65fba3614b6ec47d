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

// Average-linkage agglomerative clustering of recognition hypotheses.
//
// Clusters start as singletons. At each step the pair with the smallest
// mean pairwise distance is merged. Linkages that differ by less than
// kLinkageTolerance are treated as equal; among equal pairs the one with
// the lexicographically smallest (lowest member index, highest member
// index) over the union of both clusters is merged first. Indices refer
// to positions in the input list.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcm/errors.hpp"
#include "hcm/textdist.hpp"

namespace hcm {

/// One decoder output for one prompted speaker token. `text` never holds
/// the speaker token itself.
struct Hypothesis {
  int speaker_token = 0;
  WordSeq text;
  double score = 0.0;
  int source_rank = 0;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

inline constexpr double kLinkageTolerance = 1e-12;

class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    data_[i * n_ + j] = v;
    data_[j * n_ + i] = v;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Normalized edit distance between hypothesis texts (tokens excluded).
struct TextDistance {
  double operator()(const Hypothesis& a, const Hypothesis& b) const { return normalized_edit_distance(a.text, b.text); }
};

template <typename Distance = TextDistance>
DistanceMatrix pairwise_matrix(std::span<const Hypothesis> hyps, Distance dist = {}) {
  if (hyps.empty()) throw ValidationError("no hypotheses");
  DistanceMatrix m(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i)
    for (std::size_t j = i + 1; j < hyps.size(); ++j) m.set(i, j, dist(hyps[i], hyps[j]));
  return m;
}

enum class ClusterMethod { kThreshold, kFixedK };

struct MergeStep {
  std::vector<int> left;   // member indices, ascending
  std::vector<int> right;
  double linkage = 0.0;
};

/// Index-level agglomeration result.
struct Dendrogram {
  std::vector<std::vector<int>> clusters;  // ordered by lowest member
  std::vector<MergeStep> trace;
};

struct StopRule {
  ClusterMethod method = ClusterMethod::kThreshold;
  double threshold = 0.5;
  int num_clusters = 1;
};

inline Dendrogram agglomerate(const DistanceMatrix& dist, const StopRule& stop) {
  const std::size_t n = dist.size();
  std::vector<std::vector<int>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {static_cast<int>(i)};
  // Sum of pairwise distances between clusters a and b.
  std::vector<std::vector<double>> sums(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sums[i][j] = dist(i, j);
  std::vector<bool> alive(n, true);
  std::size_t active = n;

  Dendrogram out;
  while (active > 1) {
    if (stop.method == ClusterMethod::kFixedK && active <= static_cast<std::size_t>(stop.num_clusters)) break;

    int best_a = -1, best_b = -1;
    double best_link = 0.0;
    std::pair<int, int> best_key;
    for (std::size_t a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!alive[b]) continue;
        const double link =
            sums[a][b] / static_cast<double>(members[a].size() * members[b].size());
        const std::pair<int, int> key{std::min(members[a].front(), members[b].front()),
                                      std::max(members[a].back(), members[b].back())};
        const bool better = best_a < 0 || link < best_link - kLinkageTolerance ||
                            (link <= best_link + kLinkageTolerance && key < best_key);
        if (better) {
          best_a = static_cast<int>(a), best_b = static_cast<int>(b);
          best_link = link;
          best_key = key;
        }
      }
    }
    if (stop.method == ClusterMethod::kThreshold && best_link > stop.threshold + kLinkageTolerance) break;

    out.trace.push_back({members[best_a], members[best_b], best_link});
    auto& into = members[best_a];
    into.insert(into.end(), members[best_b].begin(), members[best_b].end());
    std::sort(into.begin(), into.end());
    members[best_b].clear();
    alive[best_b] = false;
    for (std::size_t c = 0; c < n; ++c) {
      if (!alive[c] || static_cast<int>(c) == best_a) continue;
      sums[best_a][c] += sums[best_b][c];
      sums[c][best_a] = sums[best_a][c];
    }
    --active;
  }

  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) out.clusters.push_back(members[i]);
  std::sort(out.clusters.begin(), out.clusters.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return out;
}

/// Partition of a hypothesis set. `members` holds input indices parallel to
/// `clusters`.
struct HypothesisClustering {
  std::vector<std::vector<Hypothesis>> clusters;
  std::vector<std::vector<int>> members;
  std::optional<double> threshold;
  ClusterMethod method = ClusterMethod::kThreshold;
  DistanceMatrix distances;
  std::vector<MergeStep> trace;

  std::size_t size() const { return clusters.size(); }
};

namespace detail {

inline HypothesisClustering materialize(std::span<const Hypothesis> hyps, DistanceMatrix dist, Dendrogram dendro,
                                        ClusterMethod method, std::optional<double> threshold) {
  HypothesisClustering hc;
  hc.method = method;
  hc.threshold = threshold;
  for (const auto& idx : dendro.clusters) {
    std::vector<Hypothesis> c;
    c.reserve(idx.size());
    for (int i : idx) c.push_back(hyps[i]);
    hc.clusters.push_back(std::move(c));
  }
  hc.members = std::move(dendro.clusters);
  hc.distances = std::move(dist);
  hc.trace = std::move(dendro.trace);
  return hc;
}

}  // namespace detail

/// Unknown speaker count: merge while the best average linkage is <= threshold.
template <typename Distance = TextDistance>
HypothesisClustering ahc_threshold(std::span<const Hypothesis> hyps, double threshold, Distance dist = {}) {
  if (hyps.empty()) throw ValidationError("no hypotheses");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0, 1]");
  auto m = pairwise_matrix(hyps, dist);
  auto d = agglomerate(m, {ClusterMethod::kThreshold, threshold, 1});
  return detail::materialize(hyps, std::move(m), std::move(d), ClusterMethod::kThreshold, threshold);
}

/// Known speaker count: same merge order, stop at exactly `k` clusters.
template <typename Distance = TextDistance>
HypothesisClustering cluster_fixed_k(std::span<const Hypothesis> hyps, int k, Distance dist = {}) {
  if (hyps.empty()) throw ValidationError("no hypotheses");
  if (k < 1 || static_cast<std::size_t>(k) > hyps.size())
    throw ValidationError("K=" + std::to_string(k) + " outside [1, " + std::to_string(hyps.size()) + "]");
  auto m = pairwise_matrix(hyps, dist);
  auto d = agglomerate(m, {ClusterMethod::kFixedK, 0.0, k});
  return detail::materialize(hyps, std::move(m), std::move(d), ClusterMethod::kFixedK, std::nullopt);
}

}  // namespace hcm
