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

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "generators.hpp"
#include "hcm/hcm.hpp"
#include "hcm_cli.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace {

using namespace hcm;
using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

void edit_distance_exhaustive() {
  std::vector<WordSeq> all{{}};
  for (std::size_t begin = 0, len = 0; len < 6; ++len) {
    const std::size_t end = all.size();
    for (std::size_t i = begin; i < end; ++i)
      for (const char* w : {"a", "b", "c"}) {
        auto s = all[i];
        s.push_back(w);
        all.push_back(std::move(s));
      }
    begin = end;
  }

  const auto t0 = Clock::now();
  std::vector<int> dp;
  dp.reserve(all.size() * all.size());
  for (const auto& x : all)
    for (const auto& y : all) dp.push_back(edit_distance(x, y).distance);
  const double dp_secs = seconds_since(t0);

  long long mismatches = 0;
  std::size_t k = 0;
  for (const auto& x : all)
    for (const auto& y : all) mismatches += dp[k++] != oracle::naive_edit_distance(x, y);
  report(mismatches == 0 && dp_secs < 10.0, "edit-distance-oracle",
         fmt("%zu pairs, %lld mismatches, DP sweep %.2fs (limit 10s), total %.2fs", dp.size(), mismatches, dp_secs,
             seconds_since(t0)));
}

void normalized_distance_bounds() {
  gen::Engine rng(101);
  int violations = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto a = gen::random_words(rng, 0, 12, 5), b = gen::random_words(rng, 0, 12, 5);
    const double ab = normalized_edit_distance(a, b), ba = normalized_edit_distance(b, a);
    const bool ok = ab >= 0.0 && ab <= 1.0 && ab == ba && (a != b || ab == 0.0) && (a == b || ab > 0.0);
    violations += !ok;
  }
  report(violations == 0, "normalized-distance-bounds", fmt("10000 pairs, %d violations", violations));
}

void ahc_two_blobs() {
  gen::Engine rng(202);
  int recovered = 0, agreement = 0;
  for (int t = 0; t < 200; ++t) {
    const auto tb = gen::two_blobs(rng);
    const auto hc = ahc_threshold(tb.hyps, 0.5);
    bool ok = hc.size() == 2;
    for (const auto& members : hc.members) {
      for (int m : members) ok = ok && tb.group[m] == tb.group[members.front()];
    }
    recovered += ok;

    const auto fixed = cluster_fixed_k(tb.hyps, static_cast<int>(hc.size()));
    agreement += fixed.members == hc.members;
  }
  report(recovered == 200 && agreement == 200, "ahc-two-blobs",
         fmt("recovered %d/200, fixed-K agreement %d/200", recovered, agreement));
}

void rover_majority() {
  gen::Engine rng(303);
  int dominance = 0, unanimity = 0, idempotence = 0;
  for (int t = 0; t < 500; ++t) {
    const auto mc = gen::majority_cluster(rng);
    dominance += merge_cluster(mc.hyps).text == mc.majority;

    std::vector<Hypothesis> same(mc.hyps.size(), mc.hyps[t % mc.hyps.size()]);
    unanimity += merge_cluster(same).text == same[0].text;

    const auto once = merge_cluster(mc.hyps).text;
    idempotence += merge_cluster(std::vector<Hypothesis>{{0, once, 0.0, 0}}).text == once;
  }
  report(dominance == 500 && unanimity == 500 && idempotence == 500, "rover-majority",
         fmt("dominance %d/500, unanimity %d/500, idempotence %d/500", dominance, unanimity, idempotence));
}

void permutation_wer() {
  gen::Engine rng(404);
  int exact = 0;
  for (int t = 0; t < 1000; ++t) {
    const int no = gen::uniform_int(rng, 0, 4), nr = gen::uniform_int(rng, 1, 4);
    std::vector<WordSeq> outs;
    ReferenceSet refs{"m", {}};
    for (int i = 0; i < no; ++i) outs.push_back(gen::random_words(rng, 0, 8, 6));
    for (int i = 0; i < nr; ++i) refs.refs.push_back({std::nullopt, gen::random_words(rng, 0, 8, 6)});
    const int n = std::max(no, nr);
    std::vector<std::vector<int>> cost(n, std::vector<int>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        cost[i][j] = oracle::naive_edit_distance(j < nr ? refs.refs[j].text : WordSeq{}, i < no ? outs[i] : WordSeq{});
    exact += score_wer(outs, refs).errors() == oracle::brute_force_assignment(cost);
  }
  report(exact == 1000, "permutation-wer", fmt("exact %d/1000", exact));
}

// ---------------------------------------------------------------------------

struct Scores {
  WerReport wer;
  CountReport counts;
};

Scores evaluate(const SimCorpus& corpus, const HypothesisProvider& provider, const HcmConfig& base,
                bool oracle_k = false) {
  std::vector<WerEntry> entries;
  std::vector<SpeakerCountRun> runs;
  for (std::size_t i = 0; i < corpus.distributions.size(); ++i) {
    HcmConfig cfg = base;
    const int actual = static_cast<int>(corpus.references[i].refs.size());
    if (oracle_k) cfg.num_speakers = actual;
    const auto r = run_hcm(corpus.distributions[i], provider, cfg);
    entries.push_back(score_wer(r.merged, corpus.references[i]));
    runs.push_back({r.estimated_speakers(), actual});
  }
  return {summarize_wer(std::move(entries)), count_accuracy(runs)};
}

bool diagonal_is_100(const CountReport& r) {
  for (const auto& row : r.rows) {
    const int b = count_bucket(row.actual);
    if (row.percent[b] != 100.0) return false;
  }
  return !r.rows.empty();
}

void noiseless_end_to_end() {
  const auto t0 = Clock::now();
  SimConfig sc;  // pool 50, k=32, sizes 1/2/3, 300 mixtures, sigma 0.01
  const auto corpus = generate_corpus(sc);
  const SyntheticProvider provider(corpus, 0.0);
  HcmConfig cfg;
  cfg.num_candidates = 8;
  cfg.threshold = 0.5;
  const auto results = run_hcm_batch(corpus.distributions, provider, cfg, 1);
  std::vector<WerEntry> entries;
  std::vector<SpeakerCountRun> runs;
  for (std::size_t i = 0; i < results.size(); ++i) {
    entries.push_back(score_wer(results[i].merged, corpus.references[i]));
    runs.push_back({results[i].estimated_speakers(), static_cast<int>(corpus.references[i].refs.size())});
  }
  const auto wer = summarize_wer(std::move(entries));
  const auto counts = count_accuracy(runs);
  const double secs = seconds_since(t0);
  report(wer.aggregate_wer == 0.0 && diagonal_is_100(counts) && secs < 60.0, "noiseless-end-to-end",
         fmt("%zu mixtures, WER %.2f%%, counting diagonal %s, %.2fs (limit 60s)", results.size(), wer.aggregate_wer,
             diagonal_is_100(counts) ? "100%" : "below 100%", secs));
}

std::string wer_row(const char* method, int n, const char* mode, const WerReport& r) {
  std::string s = fmt("  %-6s N=%-2d %-6s", method, n, mode);
  for (int k = 1; k <= 3; ++k) s += fmt(" %6.2f", wer_for_speaker_count(r, k).value_or(0.0));
  return s + fmt(" %6.2f\n", r.aggregate_wer);
}

void selection_and_merging_trends() {
  SimConfig sc;
  sc.num_mixes = 500;
  sc.noise_rate = 0.1;
  sc.seed = 7;
  const auto corpus = generate_corpus(sc);
  const SyntheticProvider provider(corpus, sc.noise_rate, 7);

  std::map<std::tuple<MergeMethod, SelectionMode, int>, double> wer;
  std::string table = "  method N    select    1mix   2mix   3mix    all\n";
  for (MergeMethod method : {MergeMethod::kSimple, MergeMethod::kRover}) {
    const char* name = method == MergeMethod::kRover ? "ROVER" : "SIMPLE";
    for (SelectionMode mode : {SelectionMode::kRandom, SelectionMode::kTopN})
      for (int n : {4, 8, 16, 32}) {
        if (mode == SelectionMode::kRandom && n > 8) continue;
        HcmConfig cfg;
        cfg.num_candidates = n;
        cfg.mode = mode;
        cfg.method = method;
        cfg.threshold = 0.5;
        cfg.seed = 7;
        const auto s = evaluate(corpus, provider, cfg, method == MergeMethod::kSimple);
        wer[{method, mode, n}] = s.wer.aggregate_wer;
        table += wer_row(name, n, mode == SelectionMode::kTopN ? "top-N" : "random", s.wer);
      }
  }
  std::cout << table;

  const auto seq = [&](MergeMethod m) {
    std::string out;
    for (int n : {4, 8, 16, 32}) out += fmt("%s%.2f", n == 4 ? "" : " -> ", wer[{m, SelectionMode::kTopN, n}]);
    return out;
  };
  bool a = true, b = true;
  for (MergeMethod m : {MergeMethod::kSimple, MergeMethod::kRover}) {
    for (int n : {4, 8}) a = a && wer[{m, SelectionMode::kTopN, n}] <= wer[{m, SelectionMode::kRandom, n}];
    for (int n : {8, 16, 32}) b = b && wer[{m, SelectionMode::kTopN, n}] <= wer[{m, SelectionMode::kTopN, n / 2}];
  }
  const bool c = wer[{MergeMethod::kRover, SelectionMode::kTopN, 32}] <= wer[{MergeMethod::kSimple, SelectionMode::kTopN, 32}];
  report(a, "trend-topn-vs-random", "top-N WER <= random WER at N=4,8 for both merges");
  report(b, "trend-more-hypotheses",
         "WER over N=4,8,16,32: ROVER " + seq(MergeMethod::kRover) + "; SIMPLE " + seq(MergeMethod::kSimple));
  report(c, "trend-rover-vs-simple",
         fmt("N=32: ROVER %.2f%% vs SIMPLE %.2f%%", wer[{MergeMethod::kRover, SelectionMode::kTopN, 32}],
             wer[{MergeMethod::kSimple, SelectionMode::kTopN, 32}]));

  // Not gating: how the threshold interacts with N on the same corpus.
  for (double tau : {0.6, 0.7}) {
    std::string line = fmt("  info: ROVER top-N tau=%.1f WER", tau);
    for (int n : {4, 8, 16, 32}) {
      HcmConfig cfg;
      cfg.num_candidates = n;
      cfg.threshold = tau;
      line += fmt(" %.2f", evaluate(corpus, provider, cfg).wer.aggregate_wer);
    }
    std::cout << line << "\n";
  }
}

void speaker_counting() {
  SimConfig sc;
  sc.num_mixes = 500;
  sc.noise_rate = 0.05;
  sc.seed = 11;
  const auto corpus = generate_corpus(sc);
  const SyntheticProvider provider(corpus, sc.noise_rate, 11);
  HcmConfig cfg;
  cfg.num_candidates = 8;
  cfg.threshold = 0.5;
  const auto s = evaluate(corpus, provider, cfg);
  const auto table = format_count_table(s.counts);
  std::cout << table;

  std::map<int, double> diag;
  for (const auto& row : s.counts.rows) diag[row.actual] = row.percent[count_bucket(row.actual)];
  const bool layout = table.find("actual       1       2       3    more") != std::string::npos;
  const bool ok = diag[1] >= 95.0 && diag[2] >= 95.0 && diag[3] >= 80.0 && layout;
  report(ok, "speaker-counting",
         fmt("diagonal 1: %.2f%% (>=95), 2: %.2f%% (>=95), 3: %.2f%% (>=80), layout %s", diag[1], diag[2], diag[3],
             layout ? "ok" : "wrong"));
}

// ---------------------------------------------------------------------------

std::map<std::string, std::uint64_t> pipeline_hashes(const testing::TempDir& dir) {
  const auto run = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    if (cli::run(std::move(args), out, err) != 0) throw std::runtime_error(err.str());
  };
  const std::string c = dir.str("corpus");
  run({"simulate", "-o", c, "--mixes", "120", "--epsilon", "0.1", "--seed", "3", "--write-hypotheses"});
  run({"merge", "--corpus", c, "--epsilon", "0.1", "--seed", "3", "-N", "16", "--mode", "random", "--workers", "4",
       "--diagnostics", dir.str("diag.jsonl"), "-o", dir.str("merged.jsonl")});
  run({"merge", "--dists", c + "/token_dists.jsonl", "--provider", c + "/hypotheses.jsonl", "--method", "simple",
       "-K", "2", "-o", dir.str("simple.jsonl")});
  run({"score-wer", "--merged", dir.str("merged.jsonl"), "--refs", c + "/references.jsonl", "-o", dir.str("wer.json"),
       "--table", dir.str("wer.txt")});
  run({"count-speakers", "--merged", dir.str("merged.jsonl"), "--refs", c + "/references.jsonl", "-o",
       dir.str("count.json"), "--table", dir.str("count.txt")});

  std::map<std::string, std::uint64_t> hashes;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path()))
    if (e.is_regular_file())
      hashes[std::filesystem::relative(e.path(), dir.path()).string()] = hash_string(testing::slurp(e.path()));
  return hashes;
}

void determinism() {
  testing::TempDir a, b;
  const auto ha = pipeline_hashes(a), hb = pipeline_hashes(b);
  report(ha == hb && ha.size() >= 14, "determinism",
         fmt("%zu output files, %s", ha.size(), ha == hb ? "all hashes identical" : "hashes differ"));
}

}  // namespace

int main() {
  const std::pair<const char*, void (*)()> criteria[] = {
      {"edit-distance-oracle", edit_distance_exhaustive},
      {"normalized-distance-bounds", normalized_distance_bounds},
      {"ahc-two-blobs", ahc_two_blobs},
      {"rover-majority", rover_majority},
      {"permutation-wer", permutation_wer},
      {"noiseless-end-to-end", noiseless_end_to_end},
      {"trends", selection_and_merging_trends},
      {"speaker-counting", speaker_counting},
      {"determinism", determinism},
  };
  for (const auto& [name, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
