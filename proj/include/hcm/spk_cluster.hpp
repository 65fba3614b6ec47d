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

// Speaker tokenization: k-means++ / Lloyd over L2-normalized speaker
// embeddings. The index of a centroid is the speaker token.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcm/errors.hpp"
#include "hcm/rng.hpp"
#include "hcm/textdist.hpp"

namespace hcm {

using Vec = std::vector<double>;

struct SpeakerEmbedding {
  std::string utt_id;
  Vec vector;
};

struct Codebook {
  int k = 0;
  int dim = 0;
  std::uint64_t seed = 0;
  std::vector<Vec> centroids;
};

struct KMeansOptions {
  int k = 1;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-6;
};

struct KMeansResult {
  Codebook codebook;
  /// Token of every training embedding under the final centroids.
  std::vector<int> assignment;
  /// Within-cluster sum of squares after each assignment step.
  std::vector<double> inertia_trace;
  int iterations = 0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Returns `v / |v|`. Rejects empty, non-finite or zero vectors.
inline Vec l2_normalized(std::span<const double> v) {
  if (v.empty()) throw ValidationError("embedding has dimension 0");
  double norm = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("embedding contains a non-finite value");
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) throw ValidationError("embedding has zero norm");
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

namespace detail {

struct Nearest {
  int index = 0;
  double dist2 = 0.0;
};

// Lowest index wins ties.
inline Nearest nearest_centroid(const std::vector<Vec>& centroids, std::span<const double> x) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c], x);
    if (d < best.dist2) best = {static_cast<int>(c), d};
  }
  return best;
}

inline std::vector<Vec> kmeanspp_seed(const std::vector<Vec>& points, int k, Rng& rng) {
  std::vector<Vec> centers;
  centers.reserve(k);
  centers.push_back(points[uniform_index(rng, points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    // Walk the cumulative D^2 mass; points already chosen have zero weight.
    const double target = uniform01(rng) * total;
    std::size_t pick = points.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i)
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
  }
  return centers;
}

}  // namespace detail

/// Trains a codebook with k-means++ seeding followed by Lloyd iterations.
/// Stops when no centroid moves by `tol` or more (Euclidean), when the
/// assignment is stable, or after `max_iters` updates. A cluster that goes
/// empty is re-seeded with the point farthest from its nearest centroid.
inline KMeansResult kmeans_fit(std::span<const SpeakerEmbedding> embeddings, const KMeansOptions& opt) {
  if (opt.k < 1) throw ValidationError("k must be >= 1");
  if (opt.max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(opt.tol >= 0.0)) throw ValidationError("tol must be >= 0");
  if (embeddings.size() < static_cast<std::size_t>(opt.k))
    throw ValidationError("insufficient distinct embeddings: " + std::to_string(embeddings.size()) +
                          " embeddings for k=" + std::to_string(opt.k));

  std::vector<Vec> points;
  points.reserve(embeddings.size());
  const std::size_t dim = embeddings.front().vector.size();
  for (const auto& e : embeddings) {
    if (e.vector.size() != dim)
      throw ValidationError("embedding '" + e.utt_id + "' has dimension " + std::to_string(e.vector.size()) +
                            ", expected " + std::to_string(dim));
    points.push_back(l2_normalized(e.vector));
  }
  const std::set<Vec> distinct(points.begin(), points.end());
  if (distinct.size() < static_cast<std::size_t>(opt.k))
    throw ValidationError("insufficient distinct embeddings: " + std::to_string(distinct.size()) +
                          " distinct points for k=" + std::to_string(opt.k));

  Rng rng(opt.seed);
  std::vector<Vec> centroids = detail::kmeanspp_seed(points, opt.k, rng);

  KMeansResult result;
  std::vector<int> assignment(points.size(), -1);
  const auto assign_all = [&]() {
    double inertia = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto near = detail::nearest_centroid(centroids, points[i]);
      changed |= assignment[i] != near.index;
      assignment[i] = near.index;
      inertia += near.dist2;
    }
    result.inertia_trace.push_back(inertia);
    return changed;
  };

  assign_all();
  for (int iter = 0; iter < opt.max_iters; ++iter) {
    std::vector<Vec> sums(opt.k, Vec(dim, 0.0));
    std::vector<int> counts(opt.k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      ++counts[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assignment[i]][d] += points[i][d];
    }
    std::vector<Vec> next(opt.k);
    std::vector<int> empty;
    for (int c = 0; c < opt.k; ++c) {
      if (counts[c] == 0) {
        next[c] = centroids[c];
        empty.push_back(c);
        continue;
      }
      next[c] = std::move(sums[c]);
      for (double& x : next[c]) x /= counts[c];
    }
    for (int c : empty) {
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        double d = std::numeric_limits<double>::infinity();
        for (int o = 0; o < opt.k; ++o)
          if (o != c) d = std::min(d, squared_distance(next[o], points[i]));
        if (d > far_d) far_d = d, far = i;
      }
      next[c] = points[far];
    }

    double max_shift = 0.0;
    for (int c = 0; c < opt.k; ++c)
      max_shift = std::max(max_shift, std::sqrt(squared_distance(next[c], centroids[c])));
    centroids = std::move(next);
    result.iterations = iter + 1;
    const bool changed = assign_all();
    if (!changed || max_shift < opt.tol) break;
  }

  result.assignment = std::move(assignment);
  result.codebook = Codebook{opt.k, static_cast<int>(dim), opt.seed, std::move(centroids)};
  return result;
}

inline Codebook kmeans_train(std::span<const SpeakerEmbedding> embeddings, int k, std::uint64_t seed = 0,
                             int max_iters = 100, double tol = 1e-6) {
  return kmeans_fit(embeddings, KMeansOptions{k, seed, max_iters, tol}).codebook;
}

/// Nearest-centroid token after L2 normalization; ties go to the lower index.
inline int assign_token(const Codebook& codebook, std::span<const double> embedding) {
  if (embedding.size() != static_cast<std::size_t>(codebook.dim))
    throw ValidationError("embedding dimension " + std::to_string(embedding.size()) +
                          " does not match codebook dimension " + std::to_string(codebook.dim));
  return detail::nearest_centroid(codebook.centroids, l2_normalized(embedding)).index;
}

inline int assign_token(const Codebook& codebook, const SpeakerEmbedding& embedding) {
  return assign_token(codebook, std::span<const double>(embedding.vector));
}

/// Structural checks on a codebook read from disk.
inline void validate_codebook(const Codebook& cb) {
  if (cb.k < 1) throw ValidationError("codebook k must be >= 1");
  if (cb.dim < 1) throw ValidationError("codebook dim must be >= 1");
  if (cb.centroids.size() != static_cast<std::size_t>(cb.k))
    throw ValidationError("codebook has " + std::to_string(cb.centroids.size()) + " centroids, expected k=" +
                          std::to_string(cb.k));
  for (const auto& c : cb.centroids) {
    if (c.size() != static_cast<std::size_t>(cb.dim)) throw ValidationError("codebook centroid dimension mismatch");
    for (double x : c)
      if (!std::isfinite(x)) throw ValidationError("codebook centroid contains a non-finite value");
  }
}

// ---------------------------------------------------------------------------
// Mixture records

struct MixtureSource {
  int token = 0;
  WordSeq transcript;
  double weight = 1.0;

  friend bool operator==(const MixtureSource&, const MixtureSource&) = default;
};

/// One overlapped-speech item. The waveform itself is only referenced.
struct MixtureRecord {
  std::string mix_id;
  std::vector<MixtureSource> sources;
  std::optional<std::string> audio_ref;

  friend bool operator==(const MixtureRecord&, const MixtureRecord&) = default;
};

struct Utterance {
  std::string utt_id;
  WordSeq transcript;
  Vec embedding;
};

/// Utterances to overlap. Empty `weights` means sample them.
struct MixtureGroup {
  std::string mix_id;
  std::vector<std::string> utt_ids;
  std::vector<double> weights;
};

/// Range for sampled mixing weights. Each group draws from its own stream
/// derived from (seed, mix_id), so results do not depend on group order.
struct WeightRange {
  double lo = 0.5;
  double hi = 1.0;
  std::uint64_t seed = 0;
};

/// Decoder training target: the speaker token followed by the transcript.
inline WordSeq training_label(const MixtureSource& source) {
  WordSeq label{format_speaker_token(source.token)};
  label.insert(label.end(), source.transcript.begin(), source.transcript.end());
  return label;
}

inline void validate_mixture(const MixtureRecord& rec, int k) {
  if (rec.sources.empty()) throw ValidationError("mixture '" + rec.mix_id + "' has no sources");
  for (const auto& s : rec.sources) {
    if (s.token < 0 || s.token >= k)
      throw ValidationError("mixture '" + rec.mix_id + "' has token " + std::to_string(s.token) +
                            " outside [0, " + std::to_string(k) + ")");
    if (!(s.weight > 0.0) || !std::isfinite(s.weight))
      throw ValidationError("mixture '" + rec.mix_id + "' has a non-positive mixing weight");
  }
}

inline std::vector<MixtureRecord> build_mixture_records(std::span<const Utterance> utterances,
                                                        std::span<const MixtureGroup> groups,
                                                        const Codebook& codebook, const WeightRange& range = {}) {
  if (!(range.lo > 0.0) || !(range.hi >= range.lo))
    throw ValidationError("weight range must satisfy 0 < lo <= hi");
  std::unordered_map<std::string, const Utterance*> by_id;
  for (const auto& u : utterances) by_id.emplace(u.utt_id, &u);

  std::vector<MixtureRecord> records;
  records.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.utt_ids.empty()) throw ValidationError("mixture group '" + g.mix_id + "' is empty");
    if (!g.weights.empty() && g.weights.size() != g.utt_ids.size())
      throw ValidationError("mixture group '" + g.mix_id + "' has " + std::to_string(g.weights.size()) +
                            " weights for " + std::to_string(g.utt_ids.size()) + " utterances");
    Rng rng(mix_seed(range.seed, hash_string(g.mix_id)));
    MixtureRecord rec;
    rec.mix_id = g.mix_id;
    for (std::size_t i = 0; i < g.utt_ids.size(); ++i) {
      const auto it = by_id.find(g.utt_ids[i]);
      if (it == by_id.end()) throw ValidationError("unknown utt_id '" + g.utt_ids[i] + "'");
      const double w = g.weights.empty() ? uniform(rng, range.lo, range.hi) : g.weights[i];
      rec.sources.push_back({assign_token(codebook, it->second->embedding), it->second->transcript, w});
    }
    validate_mixture(rec, codebook.k);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace hcm
