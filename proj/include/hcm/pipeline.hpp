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

// End-to-end hypothesis clustering and merging for one mixture:
//   token posterior -> N candidate tokens -> N prompted hypotheses
//   -> clustering -> one transcription per cluster.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hcm/errors.hpp"
#include "hcm/hyp_cluster.hpp"
#include "hcm/merge.hpp"
#include "hcm/rng.hpp"

namespace hcm {

/// P(token | mixture) as produced by an upstream model.
struct TokenDistribution {
  std::string mix_id;
  std::map<int, double> probs;
};

/// `k` <= 0 skips the token-range check.
inline void validate_distribution(const TokenDistribution& d, int k = 0) {
  if (d.probs.empty()) throw ValidationError("token distribution for '" + d.mix_id + "' is empty");
  double sum = 0.0;
  for (const auto& [tok, p] : d.probs) {
    if (tok < 0 || (k > 0 && tok >= k))
      throw ValidationError("token distribution for '" + d.mix_id + "' has token " + std::to_string(tok) +
                            " outside the codebook");
    if (!(p >= 0.0) || !std::isfinite(p))
      throw ValidationError("token distribution for '" + d.mix_id + "' has an invalid probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ValidationError("token distribution for '" + d.mix_id + "' sums to " + std::to_string(sum));
}

enum class SelectionMode { kTopN, kRandom };

/// Top-N: highest probability first, ties by ascending token id; the seed
/// is ignored. Random: N distinct tokens drawn uniformly from the support,
/// ignoring probabilities, from a stream derived from (seed, mix_id).
inline std::vector<int> select_candidates(const TokenDistribution& dist, int n, SelectionMode mode,
                                          std::uint64_t seed = 0) {
  if (n < 1) throw ValidationError("N must be >= 1");
  if (static_cast<std::size_t>(n) > dist.probs.size())
    throw ValidationError("N=" + std::to_string(n) + " exceeds the " + std::to_string(dist.probs.size()) +
                          " tokens available for '" + dist.mix_id + "'");
  std::vector<std::pair<int, double>> items(dist.probs.begin(), dist.probs.end());
  std::vector<int> out;
  if (mode == SelectionMode::kTopN) {
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (int i = 0; i < n; ++i) out.push_back(items[i].first);
    return out;
  }
  Rng rng(mix_seed(seed, hash_string(dist.mix_id)));
  for (int i = 0; i < n; ++i) {
    const auto j = i + uniform_index(rng, items.size() - i);
    std::swap(items[i], items[j]);
    out.push_back(items[i].first);
  }
  return out;
}

/// A decoder prompted with one speaker token. Implementations must be
/// deterministic and safe to call from several threads at once.
class HypothesisProvider {
 public:
  virtual ~HypothesisProvider() = default;
  /// Throws DataError when (mix_id, token) cannot be answered.
  virtual Hypothesis hypothesize(const std::string& mix_id, int token) const = 0;
};

/// Hypotheses looked up from a precomputed table.
class TableProvider : public HypothesisProvider {
 public:
  struct Row {
    std::string mix_id;
    int token = 0;
    WordSeq text;
    double score = 0.0;
  };

  TableProvider() = default;
  explicit TableProvider(std::vector<Row> rows) {
    for (auto& r : rows) add(std::move(r));
  }

  void add(Row row) {
    if (!std::isfinite(row.score))
      throw ValidationError("hypothesis for ('" + row.mix_id + "', " + std::to_string(row.token) +
                            ") has a non-finite score");
    auto& per_mix = table_[row.mix_id];
    const int tok = row.token;
    if (!per_mix.emplace(tok, std::move(row)).second)
      throw ValidationError("duplicate hypothesis row for ('" + per_mix.at(tok).mix_id + "', " +
                            std::to_string(tok) + ")");
  }

  Hypothesis hypothesize(const std::string& mix_id, int token) const override {
    const auto m = table_.find(mix_id);
    if (m != table_.end())
      if (const auto r = m->second.find(token); r != m->second.end())
        return Hypothesis{token, r->second.text, r->second.score, 0};
    throw DataError("no hypothesis for ('" + mix_id + "', " + std::to_string(token) + ")");
  }

 private:
  std::unordered_map<std::string, std::map<int, Row>> table_;
};

enum class MergeMethod { kRover, kSimple };

struct HcmConfig {
  int num_candidates = 8;
  SelectionMode mode = SelectionMode::kTopN;
  /// Known speaker count. Unset means threshold AHC.
  std::optional<int> num_speakers;
  double threshold = 0.5;
  MergeMethod method = MergeMethod::kRover;
  std::uint64_t seed = 0;
};

inline void validate_config(const HcmConfig& cfg) {
  if (cfg.num_candidates < 1) throw ValidationError("N must be >= 1");
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) throw ValidationError("threshold must lie in [0, 1]");
  if (cfg.num_speakers && *cfg.num_speakers < 1) throw ValidationError("K must be >= 1");
  if (cfg.method == MergeMethod::kSimple && !cfg.num_speakers) throw ValidationError("simple voting requires K");
}

struct HcmResult {
  std::string mix_id;
  std::vector<int> candidates;
  std::vector<Hypothesis> hypotheses;
  std::optional<HypothesisClustering> clustering;  // ROVER path only
  MergedOutput merged;
  /// Fewer outputs than the requested K (N < K, or too few distinct texts).
  bool shortfall = false;

  int estimated_speakers() const { return static_cast<int>(merged.transcriptions.size()); }
};

inline HcmResult run_hcm(const TokenDistribution& dist, const HypothesisProvider& provider, const HcmConfig& cfg) {
  validate_config(cfg);
  HcmResult r;
  r.mix_id = dist.mix_id;
  r.candidates = select_candidates(dist, cfg.num_candidates, cfg.mode, cfg.seed);
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const int tok = r.candidates[i];
    Hypothesis h;
    try {
      h = provider.hypothesize(dist.mix_id, tok);
    } catch (const std::exception& e) {
      throw DataError("provider failed for ('" + dist.mix_id + "', " + std::to_string(tok) + "): " + e.what());
    }
    h.speaker_token = tok;
    h.text = strip_speaker_tokens(std::move(h.text));
    h.source_rank = static_cast<int>(i);
    if (!std::isfinite(h.score))
      throw DataError("provider returned a non-finite score for ('" + dist.mix_id + "', " + std::to_string(tok) +
                      ")");
    r.hypotheses.push_back(std::move(h));
  }

  if (cfg.method == MergeMethod::kSimple) {
    auto vote = simple_vote(r.hypotheses, *cfg.num_speakers);
    r.shortfall = vote.shortfall;
    for (auto& e : vote.entries)
      r.merged.transcriptions.push_back({std::move(e.text), e.count, std::move(e.tokens), e.mean_score});
    return r;
  }

  if (cfg.num_speakers) {
    const int k = std::min<int>(*cfg.num_speakers, static_cast<int>(r.hypotheses.size()));
    r.shortfall = k < *cfg.num_speakers;
    r.clustering = cluster_fixed_k(r.hypotheses, k);
  } else {
    r.clustering = ahc_threshold(r.hypotheses, cfg.threshold);
  }
  r.merged = merge_clusters(*r.clustering);
  return r;
}

/// Runs every mixture on up to `workers` threads. Results come back sorted
/// by mix_id whatever the completion order. If any mixture fails, the error
/// of the earliest failing input position is rethrown.
inline std::vector<HcmResult> run_hcm_batch(std::span<const TokenDistribution> dists,
                                            const HypothesisProvider& provider, const HcmConfig& cfg,
                                            int workers = 1) {
  validate_config(cfg);
  std::vector<HcmResult> results(dists.size());
  std::vector<std::exception_ptr> errors(dists.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < dists.size(); i = next.fetch_add(1)) {
      try {
        results[i] = run_hcm(dists[i], provider, cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const int n = std::max(1, std::min<int>(workers, static_cast<int>(dists.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::stable_sort(results.begin(), results.end(),
                   [](const HcmResult& a, const HcmResult& b) { return a.mix_id < b.mix_id; });
  return results;
}

}  // namespace hcm
