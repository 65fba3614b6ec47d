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

#include <gtest/gtest.h>

#include "generators.hpp"
#include "hcm/pipeline.hpp"

namespace hcm {
namespace {

TokenDistribution dist_of(std::string mix, std::map<int, double> p) { return {std::move(mix), std::move(p)}; }

TEST(SelectCandidates, TopN) {
  const auto d = dist_of("m", {{3, 0.5}, {1, 0.3}, {2, 0.2}});
  EXPECT_EQ(select_candidates(d, 2, SelectionMode::kTopN, 0), (std::vector<int>{3, 1}));
  EXPECT_EQ(select_candidates(d, 3, SelectionMode::kTopN, 0), (std::vector<int>{3, 1, 2}));
}

TEST(SelectCandidates, TieGoesToLowerToken) {
  const auto d = dist_of("m", {{9, 0.4}, {4, 0.4}, {1, 0.2}});
  EXPECT_EQ(select_candidates(d, 1, SelectionMode::kTopN, 0), (std::vector<int>{4}));
}

TEST(SelectCandidates, RandomIgnoresProbabilities) {
  std::map<int, double> p;
  for (int t = 0; t < 32; ++t) p[t] = t == 0 ? 1.0 - 31 * 1e-4 : 1e-4;
  const auto d = dist_of("mix", p);
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto c = select_candidates(d, 4, SelectionMode::kRandom, seed);
    ASSERT_EQ(c.size(), 4u);
    ASSERT_EQ(std::set<int>(c.begin(), c.end()).size(), 4u);
    ASSERT_EQ(c, select_candidates(d, 4, SelectionMode::kRandom, seed));
    seen.insert(c.begin(), c.end());
  }
  EXPECT_GT(seen.size(), 24u);
}

TEST(SelectCandidates, Errors) {
  const auto d = dist_of("m", {{0, 0.5}, {1, 0.5}});
  EXPECT_THROW(select_candidates(d, 0, SelectionMode::kTopN, 0), ValidationError);
  EXPECT_THROW(select_candidates(d, 3, SelectionMode::kTopN, 0), ValidationError);
  EXPECT_THROW(validate_distribution(dist_of("m", {{0, 0.5}, {1, 0.4}})), ValidationError);
  EXPECT_THROW(validate_distribution(dist_of("m", {{0, 1.2}, {1, -0.2}})), ValidationError);
  EXPECT_NO_THROW(validate_distribution(d));
}

// Two speakers: tokens 0..3 answer "a b c d", tokens 4..7 answer "w x y z".
TableProvider two_speaker_table(const std::string& mix) {
  TableProvider t;
  for (int tok = 0; tok < 8; ++tok)
    t.add({mix, tok, split_words(tok < 4 ? "a b c d" : "w x y z"), -1.0 * tok});
  return t;
}

TokenDistribution uniform_dist(const std::string& mix, int k) {
  std::map<int, double> p;
  for (int t = 0; t < k; ++t) p[t] = 1.0 / k;
  return {mix, p};
}

TEST(RunHcm, NoiselessTwoSpeakers) {
  const auto prov = two_speaker_table("m");
  HcmConfig cfg;
  cfg.num_candidates = 8;
  cfg.threshold = 0.5;
  const auto r = run_hcm(uniform_dist("m", 8), prov, cfg);
  ASSERT_EQ(r.estimated_speakers(), 2);
  std::set<WordSeq> texts;
  for (const auto& t : r.merged.transcriptions) texts.insert(t.text);
  EXPECT_EQ(texts, (std::set<WordSeq>{split_words("a b c d"), split_words("w x y z")}));
  EXPECT_EQ(r.merged.transcriptions[0].support, 4);
  EXPECT_FALSE(r.shortfall);
}

TEST(RunHcm, SingleCandidate) {
  const auto prov = two_speaker_table("m");
  HcmConfig cfg;
  cfg.num_candidates = 1;
  const auto r = run_hcm(uniform_dist("m", 8), prov, cfg);
  ASSERT_EQ(r.estimated_speakers(), 1);
  EXPECT_EQ(r.merged.transcriptions[0].text, split_words("a b c d"));
}

TEST(RunHcm, SimpleVotingWithK) {
  const auto prov = two_speaker_table("m");
  HcmConfig cfg;
  cfg.method = MergeMethod::kSimple;
  cfg.num_speakers = 2;
  const auto r = run_hcm(uniform_dist("m", 8), prov, cfg);
  ASSERT_EQ(r.estimated_speakers(), 2);
  EXPECT_EQ(r.merged.transcriptions[0].text, split_words("a b c d"));
  EXPECT_EQ(r.merged.transcriptions[1].text, split_words("w x y z"));
  EXPECT_FALSE(r.clustering.has_value());

  cfg.num_speakers.reset();
  EXPECT_THROW(run_hcm(uniform_dist("m", 8), prov, cfg), ValidationError);
}

TEST(RunHcm, FixedKClipsToN) {
  const auto prov = two_speaker_table("m");
  HcmConfig cfg;
  cfg.num_candidates = 2;
  cfg.num_speakers = 3;
  const auto r = run_hcm(uniform_dist("m", 8), prov, cfg);
  EXPECT_TRUE(r.shortfall);
  EXPECT_EQ(r.estimated_speakers(), 2);
}

TEST(RunHcm, ProviderFailureNamesMixAndToken) {
  TableProvider t;
  t.add({"m", 0, split_words("a"), 0.0});
  HcmConfig cfg;
  cfg.num_candidates = 2;
  try {
    run_hcm(dist_of("m", {{0, 0.6}, {5, 0.4}}), t, cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("('m', 5)"), std::string::npos) << e.what();
  }
}

TEST(RunHcm, SpeakerTokensStrippedFromHypotheses) {
  TableProvider t;
  t.add({"m", 0, split_words("<spk_0> a b"), 0.0});
  t.add({"m", 1, split_words("a b"), 0.0});
  HcmConfig cfg;
  cfg.num_candidates = 2;
  const auto r = run_hcm(dist_of("m", {{0, 0.5}, {1, 0.5}}), t, cfg);
  ASSERT_EQ(r.estimated_speakers(), 1);
  EXPECT_EQ(r.merged.transcriptions[0].text, split_words("a b"));
}

TEST(TableProviderTest, RejectsDuplicatesAndNonFinite) {
  TableProvider t;
  t.add({"m", 0, {}, 0.0});
  EXPECT_THROW(t.add({"m", 0, {}, 0.0}), ValidationError);
  EXPECT_THROW(t.add({"m", 1, {}, std::nan("")}), ValidationError);
  EXPECT_THROW(t.hypothesize("x", 0), DataError);
}

TEST(RunHcmProperty, RedundancyCollapsesAndFixedKCount) {
  gen::Engine rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const int speakers = gen::uniform_int(rng, 1, 4);
    std::vector<WordSeq> texts;
    // Disjoint vocabularies keep cross-speaker distances at 1.
    for (int s = 0; s < speakers; ++s) {
      WordSeq w;
      const int len = gen::uniform_int(rng, 1, 8);
      for (int i = 0; i < len; ++i) w.push_back("s" + std::to_string(s) + "_" + std::to_string(gen::uniform_int(rng, 0, 3)));
      texts.push_back(w);
    }
    TableProvider t;
    std::map<int, double> p;
    const int k = 16;
    for (int tok = 0; tok < k; ++tok) {
      t.add({"m", tok, texts[tok % speakers], -0.1 * tok});
      p[tok] = 1.0 / k;
    }
    HcmConfig cfg;
    cfg.num_candidates = gen::uniform_int(rng, speakers, k);
    const auto r = run_hcm({"m", p}, t, cfg);
    ASSERT_EQ(r.estimated_speakers(), speakers);

    const int want = gen::uniform_int(rng, 1, 6);
    cfg.num_speakers = want;
    const auto f = run_hcm({"m", p}, t, cfg);
    ASSERT_EQ(f.estimated_speakers(), std::min(want, cfg.num_candidates));
  }
}

TEST(RunHcmBatch, WorkerCountDoesNotChangeResults) {
  std::vector<TokenDistribution> dists;
  TableProvider t;
  gen::Engine rng(99);
  for (int m = 0; m < 40; ++m) {
    const std::string id = "mix" + std::to_string(39 - m);  // deliberately unsorted
    std::map<int, double> p;
    for (int tok = 0; tok < 8; ++tok) {
      t.add({id, tok, gen::random_words(rng, 1, 6, 4), -0.5 * tok});
      p[tok] = 1.0 / 8;
    }
    dists.push_back({id, p});
  }
  HcmConfig cfg;
  const auto one = run_hcm_batch(dists, t, cfg, 1);
  const auto four = run_hcm_batch(dists, t, cfg, 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].mix_id, four[i].mix_id);
    EXPECT_EQ(one[i].merged.transcriptions, four[i].merged.transcriptions);
    if (i) {
      EXPECT_LT(one[i - 1].mix_id, one[i].mix_id);
    }
  }
}

TEST(RunHcmBatch, EarliestFailureIsReported) {
  TableProvider t;
  std::vector<TokenDistribution> dists;
  for (int m = 0; m < 10; ++m) {
    const std::string id = "m" + std::to_string(m);
    if (m != 3 && m != 7) t.add({id, 0, split_words("a"), 0.0});
    dists.push_back({id, {{0, 1.0}}});
  }
  HcmConfig cfg;
  cfg.num_candidates = 1;
  for (int workers : {1, 4}) {
    try {
      run_hcm_batch(dists, t, cfg, workers);
      FAIL();
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find("'m3'"), std::string::npos) << e.what();
    }
  }
}

}  // namespace
}  // namespace hcm
