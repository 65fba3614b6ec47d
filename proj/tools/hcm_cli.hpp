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

// The `hcm` command line. `run` is kept separate from main() so tests can
// drive subcommands in-process.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hcm/hcm.hpp"

namespace hcm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitData = 3;

namespace fs = std::filesystem;

namespace detail {

// Folds a --config JSON object into the argument list. Keys are long option
// names without dashes; explicit flags win, unknown keys fail the parse.
inline std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (!path) return args;

  const auto cfg = io::read_json(*path);
  if (!cfg.is_object()) throw ValidationError(*path + ": config must be a JSON object");
  const auto given = [&](const std::string& key) {
    for (const auto& a : args)
      if (a == "--" + key || a.starts_with("--" + key + "=")) return true;
    return false;
  };
  const auto scalar = [&](const io::json& v, const std::string& key) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number() || v.is_boolean()) return v.dump();
    throw ValidationError(*path + ": unsupported value for '" + key + "'");
  };
  for (const auto& [key, value] : cfg.items()) {
    if (key == "config" || given(key)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
      continue;
    }
    args.push_back("--" + key);
    if (value.is_array()) {
      for (const auto& v : value) args.push_back(scalar(v, key));
    } else {
      args.push_back(scalar(value, key));
    }
  }
  return args;
}

inline SelectionMode parse_mode(const std::string& s) {
  if (s == "top-n") return SelectionMode::kTopN;
  if (s == "random") return SelectionMode::kRandom;
  throw ValidationError("unknown selection mode '" + s + "' (expected top-n or random)");
}

inline MergeMethod parse_method(const std::string& s) {
  if (s == "rover") return MergeMethod::kRover;
  if (s == "simple") return MergeMethod::kSimple;
  throw ValidationError("unknown merge method '" + s + "' (expected rover or simple)");
}

// Pairs merged records with references by mix_id; both sides must cover the
// same mixtures.
struct Paired {
  std::vector<const io::MergedRecord*> merged;
  std::vector<const ReferenceSet*> refs;
};

inline Paired pair_by_mix(const std::vector<io::MergedRecord>& merged, const std::vector<ReferenceSet>& refs) {
  std::map<std::string, const io::MergedRecord*> by_id;
  for (const auto& m : merged)
    if (!by_id.emplace(m.mix_id, &m).second) throw DataError("duplicate merged record for '" + m.mix_id + "'");
  Paired p;
  std::set<std::string> seen;
  for (const auto& r : refs) {
    if (!seen.insert(r.mix_id).second) throw DataError("duplicate reference set for '" + r.mix_id + "'");
    const auto it = by_id.find(r.mix_id);
    if (it == by_id.end()) throw DataError("no merged output for '" + r.mix_id + "'");
    p.merged.push_back(it->second);
    p.refs.push_back(&r);
  }
  if (seen.size() != by_id.size()) {
    for (const auto& [id, _] : by_id)
      if (!seen.count(id)) throw DataError("no references for '" + id + "'");
  }
  return p;
}

}  // namespace detail

/// Runs one invocation; `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Hypothesis clustering and merging for multi-talker ASR outputs", "hcm"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int workers = 1;
  std::string config_path;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--workers", workers, "Worker threads for per-mixture work")->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "JSON file of option values; explicit flags take precedence");

  // kmeans-train
  auto* km = app.add_subcommand("kmeans-train", "Train a speaker-token codebook from embeddings");
  std::string km_emb, km_out;
  int km_k = 0, km_iters = 100;
  double km_tol = 1e-6;
  km->add_option("--embeddings", km_emb, "Embeddings JSON-lines")->required();
  km->add_option("-k,--num-classes", km_k, "Number of speaker tokens")->required();
  km->add_option("--max-iters", km_iters)->capture_default_str();
  km->add_option("--tol", km_tol)->capture_default_str();
  km->add_option("-o,--out", km_out, "Codebook JSON")->required();

  // assign-tokens
  auto* at = app.add_subcommand("assign-tokens", "Map embeddings to their nearest speaker token");
  std::string at_cb, at_emb, at_out;
  at->add_option("--codebook", at_cb)->required();
  at->add_option("--embeddings", at_emb)->required();
  at->add_option("-o,--out", at_out)->required();

  // make-mixtures
  auto* mm = app.add_subcommand("make-mixtures", "Build mixture records from utterance groups");
  std::string mm_cb, mm_emb, mm_txt, mm_groups, mm_out;
  double mm_wmin = 0.5, mm_wmax = 1.0;
  bool mm_labels = false;
  mm->add_option("--codebook", mm_cb)->required();
  mm->add_option("--embeddings", mm_emb)->required();
  mm->add_option("--transcripts", mm_txt, "JSON-lines {utt_id, text}")->required();
  mm->add_option("--groups", mm_groups, "JSON-lines {mix_id, utt_ids, weights?}")->required();
  mm->add_option("--weight-min", mm_wmin)->capture_default_str();
  mm->add_option("--weight-max", mm_wmax)->capture_default_str();
  mm->add_flag("--with-labels", mm_labels, "Add token-prefixed training labels to each source");
  mm->add_option("-o,--out", mm_out)->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Write a synthetic corpus with known ground truth");
  SimConfig sc;
  std::string sim_dir;
  double sim_eps = 0.0;
  bool sim_hyps = false;
  sim->add_option("-o,--out-dir", sim_dir)->required();
  sim->add_option("--speakers", sc.num_speakers_pool)->capture_default_str();
  sim->add_option("--dim", sc.embedding_dim)->capture_default_str();
  sim->add_option("--sigma", sc.blob_sigma)->capture_default_str();
  sim->add_option("--vocab", sc.vocab_size)->capture_default_str();
  sim->add_option("--min-len", sc.utt_len_min)->capture_default_str();
  sim->add_option("--max-len", sc.utt_len_max)->capture_default_str();
  sim->add_option("--mix-sizes", sc.mix_sizes)->delimiter(',')->capture_default_str();
  sim->add_option("--mixes", sc.num_mixes)->capture_default_str();
  sim->add_option("-k,--num-classes", sc.num_tokens)->capture_default_str();
  sim->add_option("--temperature", sc.softmax_temp)->capture_default_str();
  sim->add_option("--train-utts", sc.train_utts_per_speaker)->capture_default_str();
  sim->add_option("--epsilon", sim_eps, "Decoder corruption rate for --write-hypotheses")->capture_default_str();
  sim->add_flag("--write-hypotheses", sim_hyps, "Also write a provider file answering every (mixture, token)");

  // select-candidates
  auto* sel = app.add_subcommand("select-candidates", "Pick N prompt tokens per mixture");
  std::string sel_dists, sel_out, sel_mode = "top-n";
  int sel_n = 8;
  sel->add_option("--dists", sel_dists)->required();
  sel->add_option("-N,--num-hyps", sel_n)->capture_default_str();
  sel->add_option("--mode", sel_mode, "top-n or random")->capture_default_str();
  sel->add_option("-o,--out", sel_out)->required();

  // merge
  auto* mg = app.add_subcommand("merge", "Cluster and merge prompted hypotheses into per-speaker transcriptions");
  std::string mg_dists, mg_provider, mg_corpus, mg_out, mg_diag, mg_mode = "top-n", mg_method = "rover";
  int mg_n = 8;
  std::optional<int> mg_k;
  double mg_tau = 0.5, mg_eps = 0.0;
  bool mg_norm = false;
  mg->add_option("--dists", mg_dists, "Token distributions (defaults to the corpus file with --corpus)");
  auto* prov_opt = mg->add_option("--provider", mg_provider, "Hypothesis table JSON-lines");
  auto* corpus_opt = mg->add_option("--corpus", mg_corpus, "Simulated corpus directory answered in-process");
  prov_opt->excludes(corpus_opt);
  mg->add_option("--epsilon", mg_eps, "Corruption rate of the simulated decoder")->capture_default_str();
  mg->add_option("-N,--num-hyps", mg_n)->capture_default_str();
  mg->add_option("--mode", mg_mode, "top-n or random")->capture_default_str();
  mg->add_option("--threshold", mg_tau, "AHC stopping threshold")->capture_default_str();
  mg->add_option("-K,--speakers", mg_k, "Known speaker count (fixed-K clustering / simple voting)");
  mg->add_option("--method", mg_method, "rover or simple")->capture_default_str();
  mg->add_option("--diagnostics", mg_diag, "Write clustering diagnostics JSON-lines");
  mg->add_flag("--normalize-text", mg_norm, "Lowercase and strip punctuation from provider texts");
  mg->add_option("-o,--out", mg_out)->required();

  // score-wer
  auto* sw = app.add_subcommand("score-wer", "Permutation-optimal multi-speaker WER");
  std::string sw_merged, sw_refs, sw_out, sw_table;
  bool sw_norm = false;
  sw->add_option("--merged", sw_merged)->required();
  sw->add_option("--refs", sw_refs)->required();
  sw->add_option("-o,--out", sw_out, "WER report JSON");
  sw->add_option("--table", sw_table, "Also write the text table here");
  sw->add_flag("--normalize-text", sw_norm);

  // count-speakers
  auto* cs = app.add_subcommand("count-speakers", "Speaker-counting accuracy table");
  std::string cs_merged, cs_refs, cs_out, cs_table;
  cs->add_option("--merged", cs_merged)->required();
  cs->add_option("--refs", cs_refs)->required();
  cs->add_option("-o,--out", cs_out, "Count report JSON");
  cs->add_option("--table", cs_table, "Also write the text table here");

  try {
    args = detail::apply_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (km->parsed()) {
      const auto embs = io::read_embeddings(km_emb);
      const auto cb = kmeans_train(embs, km_k, seed, km_iters, km_tol);
      io::write_json(km_out, io::to_json(cb));
      out << "trained " << cb.k << " centroids of dimension " << cb.dim << " from " << embs.size()
          << " embeddings\n";
    } else if (at->parsed()) {
      const auto cb = io::read_codebook(at_cb);
      io::LineWriter w(at_out);
      for (const auto& e : io::read_embeddings(at_emb))
        w.write(io::ojson{{"utt_id", e.utt_id}, {"token", assign_token(cb, e)}});
    } else if (mm->parsed()) {
      const auto cb = io::read_codebook(mm_cb);
      const auto embs = io::read_embeddings(mm_emb);
      std::map<std::string, WordSeq> texts;
      for (auto& t : io::read_transcripts(mm_txt)) texts[t.utt_id] = std::move(t.text);
      std::vector<Utterance> utts;
      for (const auto& e : embs) {
        const auto it = texts.find(e.utt_id);
        if (it == texts.end()) throw DataError("no transcript for utterance '" + e.utt_id + "'");
        utts.push_back({e.utt_id, it->second, e.vector});
      }
      const auto groups = io::read_groups(mm_groups);
      const auto records = build_mixture_records(utts, groups, cb, WeightRange{mm_wmin, mm_wmax, seed});
      io::LineWriter w(mm_out);
      for (const auto& r : records) w.write(io::to_json(r, mm_labels));
    } else if (sim->parsed()) {
      sc.seed = seed;
      sc.noise_rate = sim_eps;
      const auto corpus = generate_corpus(sc);
      io::save_corpus(corpus, sim_dir);
      if (sim_hyps) {
        const SyntheticProvider provider(corpus, sim_eps, seed);
        io::LineWriter w(fs::path(sim_dir) / io::corpus_files::kHypotheses);
        for (const auto& d : corpus.distributions)
          for (const auto& [tok, p] : d.probs) {
            const auto h = provider.hypothesize(d.mix_id, tok);
            w.write(io::to_json(TableProvider::Row{d.mix_id, tok, h.text, h.score}));
          }
      }
      out << "wrote " << corpus.mixtures.size() << " mixtures to " << sim_dir << "\n";
    } else if (sel->parsed()) {
      const auto mode = detail::parse_mode(sel_mode);
      io::LineWriter w(sel_out);
      for (const auto& d : io::read_distributions(sel_dists))
        w.write(io::ojson{{"mix_id", d.mix_id}, {"tokens", select_candidates(d, sel_n, mode, seed)}});
    } else if (mg->parsed()) {
      HcmConfig cfg;
      cfg.num_candidates = mg_n;
      cfg.mode = detail::parse_mode(mg_mode);
      cfg.num_speakers = mg_k;
      cfg.threshold = mg_tau;
      cfg.method = detail::parse_method(mg_method);
      cfg.seed = seed;
      validate_config(cfg);
      if (mg_provider.empty() == mg_corpus.empty()) throw ValidationError("exactly one of --provider or --corpus is required");

      std::vector<TokenDistribution> dists;
      std::optional<SimCorpus> corpus;
      std::optional<SyntheticProvider> synthetic;
      std::optional<TableProvider> table;
      if (!mg_corpus.empty()) {
        corpus = io::load_corpus(mg_corpus);
        synthetic.emplace(*corpus, mg_eps, seed);
        dists = mg_dists.empty() ? corpus->distributions : io::read_distributions(mg_dists);
      } else {
        if (mg_dists.empty()) throw ValidationError("--dists is required with --provider");
        table = io::read_provider(mg_provider, io::TextOptions{mg_norm});
        dists = io::read_distributions(mg_dists);
      }
      const HypothesisProvider& provider =
          synthetic ? static_cast<const HypothesisProvider&>(*synthetic) : static_cast<const HypothesisProvider&>(*table);
      const auto results = run_hcm_batch(dists, provider, cfg, workers);

      io::LineWriter w(mg_out);
      std::optional<io::LineWriter> diag;
      if (!mg_diag.empty()) diag.emplace(mg_diag);
      int shortfalls = 0;
      for (const auto& r : results) {
        w.write(io::to_json(io::MergedRecord{r.mix_id, r.merged}));
        if (diag && r.clustering) diag->write(io::clustering_diagnostics(r.mix_id, *r.clustering));
        shortfalls += r.shortfall;
      }
      out << "merged " << results.size() << " mixtures\n";
      if (shortfalls) err << "warning: " << shortfalls << " mixtures produced fewer than K transcriptions\n";
    } else if (sw->parsed()) {
      const io::TextOptions opt{sw_norm};
      const auto merged = io::read_merged(sw_merged, opt);
      const auto refs = io::read_references(sw_refs, opt);
      const auto paired = detail::pair_by_mix(merged, refs);
      std::vector<WerEntry> entries;
      for (std::size_t i = 0; i < paired.refs.size(); ++i)
        entries.push_back(score_wer(paired.merged[i]->output, *paired.refs[i]));
      const auto report = summarize_wer(std::move(entries));
      const auto table = format_wer_table(report);
      if (!sw_out.empty()) io::write_json(sw_out, io::to_json(report));
      if (!sw_table.empty()) io::write_text(sw_table, table);
      out << table;
    } else if (cs->parsed()) {
      const auto merged = io::read_merged(cs_merged);
      const auto refs = io::read_references(cs_refs);
      const auto paired = detail::pair_by_mix(merged, refs);
      std::vector<SpeakerCountRun> runs;
      for (std::size_t i = 0; i < paired.refs.size(); ++i)
        runs.push_back({static_cast<int>(paired.merged[i]->output.transcriptions.size()),
                        static_cast<int>(paired.refs[i]->refs.size())});
      const auto report = count_accuracy(runs);
      const auto table = format_count_table(report);
      if (!cs_out.empty()) io::write_json(cs_out, io::to_json(report));
      if (!cs_table.empty()) io::write_text(cs_table, table);
      out << table;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

}  // namespace hcm::cli
