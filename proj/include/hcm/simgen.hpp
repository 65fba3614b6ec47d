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

// Synthetic corpora with known ground truth, and a decoder stand-in that
// answers speaker-token prompts from them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcm/errors.hpp"
#include "hcm/pipeline.hpp"
#include "hcm/rng.hpp"
#include "hcm/scoring.hpp"
#include "hcm/spk_cluster.hpp"

namespace hcm {

struct SimConfig {
  int num_speakers_pool = 50;
  int embedding_dim = 16;
  double blob_sigma = 0.01;
  int vocab_size = 1000;
  int utt_len_min = 5;
  int utt_len_max = 15;
  std::vector<int> mix_sizes = {1, 2, 3};
  int num_mixes = 300;
  /// Per-word corruption rate of the simulated decoder.
  double noise_rate = 0.0;
  double softmax_temp = 0.1;
  std::uint64_t seed = 0;
  /// Codebook size.
  int num_tokens = 32;
  int train_utts_per_speaker = 4;
  double weight_min = 0.5;
  double weight_max = 1.0;
};

inline void validate_sim_config(const SimConfig& c) {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("invalid simulation config: ") + what);
  };
  require(c.num_speakers_pool >= 1, "num_speakers_pool must be >= 1");
  require(c.embedding_dim >= 1, "embedding_dim must be >= 1");
  require(c.blob_sigma >= 0.0 && std::isfinite(c.blob_sigma), "blob_sigma must be >= 0");
  require(c.vocab_size >= 2, "vocab_size must be >= 2");
  require(c.utt_len_min >= 1 && c.utt_len_max >= c.utt_len_min, "utterance length range must satisfy 1 <= min <= max");
  require(!c.mix_sizes.empty(), "mix_sizes must not be empty");
  for (int s : c.mix_sizes) {
    require(s >= 1, "mix sizes must be >= 1");
    require(s <= c.num_speakers_pool, "mix size exceeds the speaker pool");
  }
  require(c.num_mixes >= 0, "num_mixes must be >= 0");
  require(c.noise_rate >= 0.0 && c.noise_rate < 1.0, "noise_rate must lie in [0, 1)");
  require(c.softmax_temp > 0.0 && std::isfinite(c.softmax_temp), "softmax_temp must be > 0");
  require(c.num_tokens >= 1, "num_tokens must be >= 1");
  require(c.train_utts_per_speaker >= 1, "train_utts_per_speaker must be >= 1");
  require(c.weight_min > 0.0 && c.weight_max >= c.weight_min, "weight range must satisfy 0 < min <= max");
}

inline std::string vocab_word(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%04d", i);
  return buf;
}

inline std::string mix_name(int i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "mix%06d", i);
  return buf;
}

struct SimCorpus {
  SimConfig config;
  std::vector<SpeakerEmbedding> train_embeddings;
  Codebook codebook;
  /// Source utterances of the mixtures, "<mix_id>_s<i>".
  std::vector<Utterance> utterances;
  std::vector<MixtureGroup> groups;
  std::vector<MixtureRecord> mixtures;
  std::vector<ReferenceSet> references;
  std::vector<TokenDistribution> distributions;
};

namespace detail {

inline Vec random_unit(Rng& rng, int dim) {
  for (;;) {
    Vec v(dim);
    for (double& x : v) x = standard_normal(rng);
    double n = 0.0;
    for (double x : v) n += x * x;
    if (n > 1e-12) return l2_normalized(v);
  }
}

inline Vec jitter(const Vec& center, double sigma, Rng& rng) {
  Vec v = center;
  if (sigma > 0.0)
    for (double& x : v) x += sigma * standard_normal(rng);
  return l2_normalized(v);
}

// Index of the source nearest to `point`; lowest index on ties.
inline std::size_t nearest_source(std::span<const Vec> sources, std::span<const double> point) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const double d = squared_distance(sources[s], point);
    if (d < best_d) best_d = d, best = s;
  }
  return best;
}

}  // namespace detail

/// Token posterior for a mixture: softmax over tokens of
/// -(distance from the token centroid to the closest source) / temperature.
inline TokenDistribution token_distribution(const std::string& mix_id, const Codebook& codebook,
                                            std::span<const Vec> sources, double temperature) {
  std::vector<double> logits(codebook.k);
  double top = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < codebook.k; ++t) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : sources) d = std::min(d, std::sqrt(squared_distance(codebook.centroids[t], s)));
    logits[t] = -d / temperature;
    top = std::max(top, logits[t]);
  }
  double z = 0.0;
  for (double& l : logits) z += (l = std::exp(l - top));
  TokenDistribution dist{mix_id, {}};
  for (int t = 0; t < codebook.k; ++t) dist.probs[t] = logits[t] / z;
  return dist;
}

/// Builds a corpus from `cfg`:
///  * speaker centers uniform on the unit sphere; each utterance is its
///    center plus N(0, blob_sigma^2) jitter, re-normalized;
///  * a codebook trained on `train_utts_per_speaker` utterances per speaker;
///  * mixture i overlaps mix_sizes[i % size] distinct speakers with uniform
///    random transcripts.
/// Speaker sets are redrawn until every source is the source closest to its
/// own token's centroid, so each true speaker is reachable by prompting
/// with its own token.
inline SimCorpus generate_corpus(const SimConfig& cfg) {
  validate_sim_config(cfg);
  SimCorpus c;
  c.config = cfg;

  Rng speaker_rng(mix_seed(cfg.seed, hash_string("speakers")));
  std::vector<Vec> centers;
  for (int s = 0; s < cfg.num_speakers_pool; ++s) centers.push_back(detail::random_unit(speaker_rng, cfg.embedding_dim));

  char buf[48];
  for (int s = 0; s < cfg.num_speakers_pool; ++s)
    for (int u = 0; u < cfg.train_utts_per_speaker; ++u) {
      std::snprintf(buf, sizeof buf, "spk%04d_train%03d", s, u);
      c.train_embeddings.push_back({buf, detail::jitter(centers[s], cfg.blob_sigma, speaker_rng)});
    }
  c.codebook = kmeans_train(c.train_embeddings, cfg.num_tokens, cfg.seed);

  Rng mix_rng(mix_seed(cfg.seed, hash_string("mixtures")));
  constexpr int kMaxDraws = 1000;
  std::vector<int> pool(cfg.num_speakers_pool);
  for (int i = 0; i < cfg.num_mixes; ++i) {
    const int size = cfg.mix_sizes[i % cfg.mix_sizes.size()];
    const std::string mix_id = mix_name(i);
    std::vector<Vec> embs;
    for (int draw = 0;; ++draw) {
      if (draw == kMaxDraws)
        throw ValidationError("infeasible simulation config: cannot draw " + std::to_string(size) +
                              " speakers with distinguishable tokens");
      for (int s = 0; s < cfg.num_speakers_pool; ++s) pool[s] = s;
      embs.clear();
      for (int j = 0; j < size; ++j) {
        const auto pick = j + uniform_index(mix_rng, pool.size() - j);
        std::swap(pool[j], pool[pick]);
        embs.push_back(detail::jitter(centers[pool[j]], cfg.blob_sigma, mix_rng));
      }
      bool ok = true;
      for (int j = 0; j < size && ok; ++j) {
        const int tok = assign_token(c.codebook, embs[j]);
        ok = detail::nearest_source(embs, c.codebook.centroids[tok]) == static_cast<std::size_t>(j);
      }
      if (ok) break;
    }

    MixtureGroup g{mix_id, {}, {}};
    ReferenceSet refs{mix_id, {}};
    for (int j = 0; j < size; ++j) {
      const int len = cfg.utt_len_min + static_cast<int>(uniform_index(mix_rng, cfg.utt_len_max - cfg.utt_len_min + 1));
      WordSeq words;
      for (int w = 0; w < len; ++w) words.push_back(vocab_word(static_cast<int>(uniform_index(mix_rng, cfg.vocab_size))));
      const std::string utt_id = mix_id + "_s" + std::to_string(j);
      c.utterances.push_back({utt_id, words, embs[j]});
      g.utt_ids.push_back(utt_id);
      g.weights.push_back(uniform(mix_rng, cfg.weight_min, cfg.weight_max));
      refs.refs.push_back({assign_token(c.codebook, embs[j]), words});
    }
    c.distributions.push_back(token_distribution(mix_id, c.codebook, embs, cfg.softmax_temp));
    c.groups.push_back(std::move(g));
    c.references.push_back(std::move(refs));
  }
  c.mixtures = build_mixture_records(c.utterances, c.groups, c.codebook);
  return c;
}

/// Decoder stand-in. A prompt token is answered with the transcript of the
/// mixture source nearest that token's centroid, each word corrupted with
/// probability `noise_rate` by an equiprobable substitution, deletion or
/// insertion. The score is the log-likelihood of the corruption pattern
/// (log(1-e) per clean word, log(e) per corrupted word).
class SyntheticProvider : public HypothesisProvider {
 public:
  struct Detail {
    Hypothesis hypothesis;
    int source_index = 0;
    int source_words = 0;
    int corrupted_words = 0;
  };

  SyntheticProvider(const SimCorpus& corpus, double noise_rate, std::uint64_t seed = 0)
      : codebook_(corpus.codebook), vocab_size_(corpus.config.vocab_size), noise_(noise_rate), seed_(seed) {
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw ValidationError("noise rate must lie in [0, 1)");
    std::unordered_map<std::string, const Utterance*> utts;
    for (const auto& u : corpus.utterances) utts.emplace(u.utt_id, &u);
    for (const auto& g : corpus.groups) {
      auto& sources = mixes_[g.mix_id];
      for (const auto& id : g.utt_ids) {
        const auto it = utts.find(id);
        if (it == utts.end()) throw DataError("mixture '" + g.mix_id + "' references unknown utterance '" + id + "'");
        sources.embeddings.push_back(l2_normalized(it->second->embedding));
        sources.transcripts.push_back(it->second->transcript);
      }
    }
  }

  Hypothesis hypothesize(const std::string& mix_id, int token) const override {
    return generate(mix_id, token).hypothesis;
  }

  Detail generate(const std::string& mix_id, int token) const {
    const auto it = mixes_.find(mix_id);
    if (it == mixes_.end()) throw DataError("unknown mixture '" + mix_id + "'");
    if (token < 0 || token >= codebook_.k)
      throw DataError("token " + std::to_string(token) + " outside the codebook for '" + mix_id + "'");
    const auto& src = it->second;

    Detail d;
    d.source_index = static_cast<int>(detail::nearest_source(src.embeddings, codebook_.centroids[token]));
    const WordSeq& clean = src.transcripts[d.source_index];
    d.source_words = static_cast<int>(clean.size());

    Rng rng(mix_seed(mix_seed(seed_, hash_string(mix_id)), static_cast<std::uint64_t>(token)));
    WordSeq out;
    for (const auto& w : clean) {
      if (noise_ == 0.0 || uniform01(rng) >= noise_) {
        out.push_back(w);
        continue;
      }
      ++d.corrupted_words;
      switch (uniform_index(rng, 3)) {
        case 0: {  // substitution with a different word
          std::string sub = w;
          while (sub == w) sub = vocab_word(static_cast<int>(uniform_index(rng, vocab_size_)));
          out.push_back(std::move(sub));
          break;
        }
        case 1:  // deletion
          break;
        default:  // insertion after the word
          out.push_back(w);
          out.push_back(vocab_word(static_cast<int>(uniform_index(rng, vocab_size_))));
          break;
      }
    }
    double score = (d.source_words - d.corrupted_words) * std::log1p(-noise_);
    if (d.corrupted_words > 0) score += d.corrupted_words * std::log(noise_);
    d.hypothesis = Hypothesis{token, std::move(out), score, 0};
    return d;
  }

 private:
  struct Sources {
    std::vector<Vec> embeddings;
    std::vector<WordSeq> transcripts;
  };

  Codebook codebook_;
  int vocab_size_;
  double noise_;
  std::uint64_t seed_;
  std::unordered_map<std::string, Sources> mixes_;
};

}  // namespace hcm
