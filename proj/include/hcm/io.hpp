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

// File formats. Everything except the codebook, the reports and the corpus
// manifest is JSON-lines, one object per line. Readers stream line by line
// and report the file and line number of the first malformed record.
// Writers emit keys in a fixed order so output bytes are reproducible.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcm/errors.hpp"
#include "hcm/hyp_cluster.hpp"
#include "hcm/merge.hpp"
#include "hcm/pipeline.hpp"
#include "hcm/scoring.hpp"
#include "hcm/simgen.hpp"
#include "hcm/spk_cluster.hpp"

namespace hcm::io {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

/// Text preprocessing applied when reading transcripts.
struct TextOptions {
  bool normalize = false;
};

inline WordSeq parse_text(const std::string& text, const TextOptions& opt = {}) {
  WordSeq w = strip_speaker_tokens(split_words(text));
  return opt.normalize ? normalize_words(w) : w;
}

// ---------------------------------------------------------------------------
// Field access with typed errors

namespace detail {

inline const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  return *it;
}

inline std::string get_string(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline long long get_int(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw ValidationError(std::string("field '") + key + "' must be an integer");
  return v.get<long long>();
}

inline double get_real(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

inline const json& get_array(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_array()) throw ValidationError(std::string("field '") + key + "' must be an array");
  return v;
}

inline Vec to_vec(const json& arr) {
  Vec v;
  for (const auto& x : arr) {
    if (!x.is_number()) throw ValidationError("vector entries must be numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

inline int to_token(long long v) {
  if (v < 0 || v > std::numeric_limits<int>::max()) throw ValidationError("token out of range");
  return static_cast<int>(v);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// JSON-lines plumbing

/// Calls `fn(object)` for each non-blank line of `path`.
inline void read_jsonl(const std::filesystem::path& path, const std::function<void(const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
}

class LineWriter {
 public:
  explicit LineWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot write '" + path.string() + "'");
  }
  void write(const ojson& j) { out_ << j.dump() << '\n'; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const ojson& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// Embeddings: {"utt_id": string, "vector": [real, ...]}

inline ojson to_json(const SpeakerEmbedding& e) { return ojson{{"utt_id", e.utt_id}, {"vector", e.vector}}; }

inline SpeakerEmbedding embedding_from_json(const json& j) {
  SpeakerEmbedding e{detail::get_string(j, "utt_id"), detail::to_vec(detail::get_array(j, "vector"))};
  for (double x : e.vector)
    if (!std::isfinite(x)) throw ValidationError("embedding '" + e.utt_id + "' contains a non-finite value");
  return e;
}

inline std::vector<SpeakerEmbedding> read_embeddings(const std::filesystem::path& path) {
  std::vector<SpeakerEmbedding> out;
  read_jsonl(path, [&](const json& j) {
    out.push_back(embedding_from_json(j));
    if (out.size() > 1 && out.back().vector.size() != out.front().vector.size())
      throw ValidationError("embedding '" + out.back().utt_id + "' has dimension " +
                            std::to_string(out.back().vector.size()) + ", expected " +
                            std::to_string(out.front().vector.size()));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Codebook: {"k": int, "dim": int, "seed": int, "centroids": [[real, ...], ...]}

inline ojson to_json(const Codebook& cb) {
  return ojson{{"k", cb.k}, {"dim", cb.dim}, {"seed", cb.seed}, {"centroids", cb.centroids}};
}

inline Codebook codebook_from_json(const json& j) {
  Codebook cb;
  cb.k = static_cast<int>(detail::get_int(j, "k"));
  cb.dim = static_cast<int>(detail::get_int(j, "dim"));
  const auto& seed = detail::field(j, "seed");
  if (!seed.is_number_integer()) throw ValidationError("field 'seed' must be an integer");
  cb.seed = seed.get<std::uint64_t>();
  for (const auto& c : detail::get_array(j, "centroids")) {
    if (!c.is_array()) throw ValidationError("centroids must be arrays");
    cb.centroids.push_back(detail::to_vec(c));
  }
  validate_codebook(cb);
  return cb;
}

inline Codebook read_codebook(const std::filesystem::path& path) {
  try {
    return codebook_from_json(read_json(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Transcripts: {"utt_id": string, "text": string}

struct TranscriptRow {
  std::string utt_id;
  WordSeq text;
};

inline std::vector<TranscriptRow> read_transcripts(const std::filesystem::path& path, const TextOptions& opt = {}) {
  std::vector<TranscriptRow> out;
  read_jsonl(path, [&](const json& j) {
    out.push_back({detail::get_string(j, "utt_id"), parse_text(detail::get_string(j, "text"), opt)});
  });
  return out;
}

inline ojson to_json(const TranscriptRow& t) { return ojson{{"utt_id", t.utt_id}, {"text", join_words(t.text)}}; }

// ---------------------------------------------------------------------------
// Mixture groups: {"mix_id": string, "utt_ids": [string, ...], "weights": [real, ...]?}

inline ojson to_json(const MixtureGroup& g) {
  ojson j{{"mix_id", g.mix_id}, {"utt_ids", g.utt_ids}};
  if (!g.weights.empty()) j["weights"] = g.weights;
  return j;
}

inline std::vector<MixtureGroup> read_groups(const std::filesystem::path& path) {
  std::vector<MixtureGroup> out;
  read_jsonl(path, [&](const json& j) {
    MixtureGroup g;
    g.mix_id = detail::get_string(j, "mix_id");
    for (const auto& id : detail::get_array(j, "utt_ids")) {
      if (!id.is_string()) throw ValidationError("utt_ids must be strings");
      g.utt_ids.push_back(id.get<std::string>());
    }
    if (j.contains("weights")) g.weights = detail::to_vec(detail::get_array(j, "weights"));
    out.push_back(std::move(g));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Mixture records:
// {"mix_id": string, "sources": [{"token": int, "text": string, "weight": real}],
//  "audio_ref": string|null}
// With `with_labels`, each source also carries "label": the token-prefixed text.

inline ojson to_json(const MixtureRecord& r, bool with_labels = false) {
  ojson sources = ojson::array();
  for (const auto& s : r.sources) {
    ojson o{{"token", s.token}, {"text", join_words(s.transcript)}, {"weight", s.weight}};
    if (with_labels) o["label"] = join_words(training_label(s));
    sources.push_back(std::move(o));
  }
  return ojson{{"mix_id", r.mix_id},
               {"sources", std::move(sources)},
               {"audio_ref", r.audio_ref ? ojson(*r.audio_ref) : ojson(nullptr)}};
}

inline MixtureRecord mixture_from_json(const json& j) {
  MixtureRecord r;
  r.mix_id = detail::get_string(j, "mix_id");
  for (const auto& s : detail::get_array(j, "sources"))
    r.sources.push_back({detail::to_token(detail::get_int(s, "token")), parse_text(detail::get_string(s, "text")),
                         detail::get_real(s, "weight")});
  if (const auto it = j.find("audio_ref"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError("field 'audio_ref' must be a string or null");
    r.audio_ref = it->get<std::string>();
  }
  return r;
}

inline std::vector<MixtureRecord> read_mixtures(const std::filesystem::path& path) {
  std::vector<MixtureRecord> out;
  read_jsonl(path, [&](const json& j) { out.push_back(mixture_from_json(j)); });
  return out;
}

// ---------------------------------------------------------------------------
// Token distributions: {"mix_id": string, "probs": {"<token>": real, ...}}

inline ojson to_json(const TokenDistribution& d) {
  ojson probs = ojson::object();
  for (const auto& [tok, p] : d.probs) probs[std::to_string(tok)] = p;
  return ojson{{"mix_id", d.mix_id}, {"probs", std::move(probs)}};
}

inline TokenDistribution distribution_from_json(const json& j) {
  TokenDistribution d;
  d.mix_id = detail::get_string(j, "mix_id");
  const auto& probs = detail::field(j, "probs");
  if (!probs.is_object()) throw ValidationError("field 'probs' must be an object");
  for (const auto& [key, value] : probs.items()) {
    int tok = -1;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), tok);
    if (ec != std::errc{} || ptr != key.data() + key.size() || tok < 0)
      throw ValidationError("token key '" + key + "' is not a non-negative integer");
    if (!value.is_number()) throw ValidationError("probability for token " + key + " must be a number");
    d.probs[tok] = value.get<double>();
  }
  validate_distribution(d);
  return d;
}

inline std::vector<TokenDistribution> read_distributions(const std::filesystem::path& path) {
  std::vector<TokenDistribution> out;
  read_jsonl(path, [&](const json& j) { out.push_back(distribution_from_json(j)); });
  return out;
}

// ---------------------------------------------------------------------------
// Provider table: {"mix_id": string, "token": int, "text": string, "score": real}

inline ojson to_json(const TableProvider::Row& r) {
  return ojson{{"mix_id", r.mix_id}, {"token", r.token}, {"text", join_words(r.text)}, {"score", r.score}};
}

inline TableProvider read_provider(const std::filesystem::path& path, const TextOptions& opt = {}) {
  TableProvider p;
  read_jsonl(path, [&](const json& j) {
    p.add({detail::get_string(j, "mix_id"), detail::to_token(detail::get_int(j, "token")),
           parse_text(detail::get_string(j, "text"), opt), detail::get_real(j, "score")});
  });
  return p;
}

// ---------------------------------------------------------------------------
// References: {"mix_id": string, "refs": [{"token": int|null, "text": string}]}

inline ojson to_json(const ReferenceSet& r) {
  ojson refs = ojson::array();
  for (const auto& ref : r.refs)
    refs.push_back(ojson{{"token", ref.token ? ojson(*ref.token) : ojson(nullptr)}, {"text", join_words(ref.text)}});
  return ojson{{"mix_id", r.mix_id}, {"refs", std::move(refs)}};
}

inline std::vector<ReferenceSet> read_references(const std::filesystem::path& path, const TextOptions& opt = {}) {
  std::vector<ReferenceSet> out;
  read_jsonl(path, [&](const json& j) {
    ReferenceSet r;
    r.mix_id = detail::get_string(j, "mix_id");
    for (const auto& ref : detail::get_array(j, "refs")) {
      Reference x;
      const auto& tok = detail::field(ref, "token");
      if (!tok.is_null()) {
        if (!tok.is_number_integer()) throw ValidationError("field 'token' must be an integer or null");
        x.token = detail::to_token(tok.get<long long>());
      }
      x.text = parse_text(detail::get_string(ref, "text"), opt);
      r.refs.push_back(std::move(x));
    }
    if (r.refs.empty()) throw ValidationError("reference set for '" + r.mix_id + "' is empty");
    out.push_back(std::move(r));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Merged outputs: {"mix_id": string, "outputs": [{"text": string, "support": int, "tokens": [int]}]}

struct MergedRecord {
  std::string mix_id;
  MergedOutput output;
};

inline ojson to_json(const MergedRecord& r) {
  ojson outs = ojson::array();
  for (const auto& t : r.output.transcriptions)
    outs.push_back(ojson{{"text", join_words(t.text)}, {"support", t.support}, {"tokens", t.tokens}});
  return ojson{{"mix_id", r.mix_id}, {"outputs", std::move(outs)}};
}

inline std::vector<MergedRecord> read_merged(const std::filesystem::path& path, const TextOptions& opt = {}) {
  std::vector<MergedRecord> out;
  read_jsonl(path, [&](const json& j) {
    MergedRecord r;
    r.mix_id = detail::get_string(j, "mix_id");
    for (const auto& o : detail::get_array(j, "outputs")) {
      MergedTranscription t;
      t.text = parse_text(detail::get_string(o, "text"), opt);
      t.support = static_cast<int>(detail::get_int(o, "support"));
      for (const auto& tok : detail::get_array(o, "tokens")) {
        if (!tok.is_number_integer()) throw ValidationError("tokens must be integers");
        t.tokens.push_back(detail::to_token(tok.get<long long>()));
      }
      r.output.transcriptions.push_back(std::move(t));
    }
    out.push_back(std::move(r));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Clustering diagnostics: distance matrix, merge trace, final partition.

inline ojson clustering_diagnostics(const std::string& mix_id, const HypothesisClustering& hc) {
  ojson matrix = ojson::array();
  for (std::size_t i = 0; i < hc.distances.size(); ++i) {
    ojson row = ojson::array();
    for (std::size_t j = 0; j < hc.distances.size(); ++j) row.push_back(hc.distances(i, j));
    matrix.push_back(std::move(row));
  }
  ojson merges = ojson::array();
  for (const auto& m : hc.trace) merges.push_back(ojson{{"left", m.left}, {"right", m.right}, {"linkage", m.linkage}});
  return ojson{{"mix_id", mix_id},
               {"method", hc.method == ClusterMethod::kThreshold ? "threshold" : "fixed_k"},
               {"threshold", hc.threshold ? ojson(*hc.threshold) : ojson(nullptr)},
               {"distance_matrix", std::move(matrix)},
               {"merges", std::move(merges)},
               {"partition", hc.members}};
}

// ---------------------------------------------------------------------------
// Reports

inline ojson to_json(const WerReport& r) {
  ojson per = ojson::array();
  for (const auto& e : r.per_mix) {
    ojson assign = ojson::array();
    for (const auto& [o, ref] : e.assignment)
      assign.push_back(ojson{{"output", o < 0 ? ojson(nullptr) : ojson(o)}, {"ref", ref < 0 ? ojson(nullptr) : ojson(ref)}});
    per.push_back(ojson{{"mix_id", e.mix_id},
                        {"assignment", std::move(assign)},
                        {"S", e.substitutions},
                        {"I", e.insertions},
                        {"D", e.deletions},
                        {"ref_words", e.ref_words}});
  }
  return ojson{{"aggregate_wer", r.aggregate_wer},
               {"total_errors", r.total_errors},
               {"total_ref_words", r.total_ref_words},
               {"per_mix", std::move(per)}};
}

inline ojson to_json(const CountReport& r) {
  ojson rows = ojson::array();
  for (const auto& row : r.rows)
    rows.push_back(ojson{{"actual", row.actual},
                         {"runs", row.runs},
                         {"estimated", ojson{{"1", row.percent[0]},
                                             {"2", row.percent[1]},
                                             {"3", row.percent[2]},
                                             {"more", row.percent[3]}}}});
  return ojson{{"rows", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// Simulation manifest and corpus directories

inline ojson to_json(const SimConfig& c) {
  return ojson{{"num_speakers_pool", c.num_speakers_pool},
               {"embedding_dim", c.embedding_dim},
               {"blob_sigma", c.blob_sigma},
               {"vocab_size", c.vocab_size},
               {"utt_len_min", c.utt_len_min},
               {"utt_len_max", c.utt_len_max},
               {"mix_sizes", c.mix_sizes},
               {"num_mixes", c.num_mixes},
               {"noise_rate", c.noise_rate},
               {"softmax_temp", c.softmax_temp},
               {"seed", c.seed},
               {"num_tokens", c.num_tokens},
               {"train_utts_per_speaker", c.train_utts_per_speaker},
               {"weight_min", c.weight_min},
               {"weight_max", c.weight_max}};
}

inline SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  c.num_speakers_pool = static_cast<int>(detail::get_int(j, "num_speakers_pool"));
  c.embedding_dim = static_cast<int>(detail::get_int(j, "embedding_dim"));
  c.blob_sigma = detail::get_real(j, "blob_sigma");
  c.vocab_size = static_cast<int>(detail::get_int(j, "vocab_size"));
  c.utt_len_min = static_cast<int>(detail::get_int(j, "utt_len_min"));
  c.utt_len_max = static_cast<int>(detail::get_int(j, "utt_len_max"));
  c.mix_sizes.clear();
  for (const auto& s : detail::get_array(j, "mix_sizes")) {
    if (!s.is_number_integer()) throw ValidationError("mix_sizes must be integers");
    c.mix_sizes.push_back(s.get<int>());
  }
  c.num_mixes = static_cast<int>(detail::get_int(j, "num_mixes"));
  c.noise_rate = detail::get_real(j, "noise_rate");
  c.softmax_temp = detail::get_real(j, "softmax_temp");
  c.seed = detail::field(j, "seed").get<std::uint64_t>();
  c.num_tokens = static_cast<int>(detail::get_int(j, "num_tokens"));
  c.train_utts_per_speaker = static_cast<int>(detail::get_int(j, "train_utts_per_speaker"));
  c.weight_min = detail::get_real(j, "weight_min");
  c.weight_max = detail::get_real(j, "weight_max");
  validate_sim_config(c);
  return c;
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& items) {
  LineWriter w(path);
  for (const auto& x : items) w.write(to_json(x));
}

/// File names inside a corpus directory.
namespace corpus_files {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kTrainEmbeddings = "train_embeddings.jsonl";
inline constexpr const char* kCodebook = "codebook.json";
inline constexpr const char* kUttEmbeddings = "utt_embeddings.jsonl";
inline constexpr const char* kTranscripts = "transcripts.jsonl";
inline constexpr const char* kGroups = "groups.jsonl";
inline constexpr const char* kMixtures = "mixtures.jsonl";
inline constexpr const char* kReferences = "references.jsonl";
inline constexpr const char* kDistributions = "token_dists.jsonl";
inline constexpr const char* kHypotheses = "hypotheses.jsonl";
}  // namespace corpus_files

inline void save_corpus(const SimCorpus& c, const std::filesystem::path& dir) {
  namespace f = corpus_files;
  std::filesystem::create_directories(dir);
  write_json(dir / f::kManifest, to_json(c.config));
  write_jsonl(dir / f::kTrainEmbeddings, c.train_embeddings);
  write_json(dir / f::kCodebook, to_json(c.codebook));
  {
    LineWriter emb(dir / f::kUttEmbeddings), txt(dir / f::kTranscripts);
    for (const auto& u : c.utterances) {
      emb.write(to_json(SpeakerEmbedding{u.utt_id, u.embedding}));
      txt.write(to_json(TranscriptRow{u.utt_id, u.transcript}));
    }
  }
  write_jsonl(dir / f::kGroups, c.groups);
  {
    LineWriter w(dir / f::kMixtures);
    for (const auto& m : c.mixtures) w.write(to_json(m));
  }
  write_jsonl(dir / f::kReferences, c.references);
  write_jsonl(dir / f::kDistributions, c.distributions);
}

inline SimCorpus load_corpus(const std::filesystem::path& dir) {
  namespace f = corpus_files;
  SimCorpus c;
  c.config = sim_config_from_json(read_json(dir / f::kManifest));
  c.train_embeddings = read_embeddings(dir / f::kTrainEmbeddings);
  c.codebook = read_codebook(dir / f::kCodebook);
  const auto embs = read_embeddings(dir / f::kUttEmbeddings);
  const auto texts = read_transcripts(dir / f::kTranscripts);
  if (embs.size() != texts.size()) throw DataError("utterance embeddings and transcripts differ in length");
  for (std::size_t i = 0; i < embs.size(); ++i) {
    if (embs[i].utt_id != texts[i].utt_id) throw DataError("utterance files disagree at '" + embs[i].utt_id + "'");
    c.utterances.push_back({embs[i].utt_id, texts[i].text, embs[i].vector});
  }
  c.groups = read_groups(dir / f::kGroups);
  c.mixtures = read_mixtures(dir / f::kMixtures);
  c.references = read_references(dir / f::kReferences);
  c.distributions = read_distributions(dir / f::kDistributions);
  return c;
}

}  // namespace hcm::io
