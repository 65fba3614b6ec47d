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

// Multi-speaker WER under the optimal output/reference pairing, and
// speaker-count accuracy tables.

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcm/errors.hpp"
#include "hcm/merge.hpp"
#include "hcm/textdist.hpp"

namespace hcm {

struct Assignment {
  std::vector<int> row_to_col;
  long long cost = 0;
};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(n^3)).
inline Assignment solve_assignment(const std::vector<std::vector<int>>& cost) {
  const int n = static_cast<int>(cost.size());
  Assignment out;
  out.row_to_col.assign(n, -1);
  if (n == 0) return out;
  for (const auto& row : cost)
    if (static_cast<int>(row.size()) != n) throw ValidationError("assignment cost matrix must be square");

  constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
  // 1-based: u/v are row/column potentials, p[j] the row matched to column j.
  std::vector<long long> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<long long> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      long long delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long long cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= n; ++j) out.row_to_col[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) out.cost += cost[i][out.row_to_col[i]];
  return out;
}

struct Reference {
  std::optional<int> token;
  WordSeq text;
};

struct ReferenceSet {
  std::string mix_id;
  std::vector<Reference> refs;
};

struct WerEntry {
  std::string mix_id;
  /// (output index, reference index); -1 marks an empty padding side.
  std::vector<std::pair<int, int>> assignment;
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int ref_words = 0;
  int num_outputs = 0;
  int num_refs = 0;

  int errors() const { return substitutions + insertions + deletions; }
};

/// Pads the shorter side with empty transcriptions and scores the
/// minimum-total-edit-distance pairing.
inline WerEntry score_wer(std::span<const WordSeq> outputs, const ReferenceSet& refs) {
  if (refs.refs.empty()) throw ValidationError("reference set for '" + refs.mix_id + "' is empty");
  const std::size_t n = std::max(outputs.size(), refs.refs.size());
  static const WordSeq kEmpty;
  const auto out_at = [&](std::size_t i) -> const WordSeq& { return i < outputs.size() ? outputs[i] : kEmpty; };
  const auto ref_at = [&](std::size_t j) -> const WordSeq& { return j < refs.refs.size() ? refs.refs[j].text : kEmpty; };

  std::vector<std::vector<EditStats>> stats(n, std::vector<EditStats>(n));
  std::vector<std::vector<int>> cost(n, std::vector<int>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      stats[i][j] = edit_distance(ref_at(j), out_at(i));
      cost[i][j] = stats[i][j].distance;
    }
  const auto a = solve_assignment(cost);

  WerEntry e;
  e.mix_id = refs.mix_id;
  e.num_outputs = static_cast<int>(outputs.size());
  e.num_refs = static_cast<int>(refs.refs.size());
  for (const auto& r : refs.refs) e.ref_words += static_cast<int>(r.text.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = a.row_to_col[i];
    const int oi = i < outputs.size() ? static_cast<int>(i) : -1;
    const int rj = j < refs.refs.size() ? static_cast<int>(j) : -1;
    if (oi < 0 && rj < 0) continue;
    e.assignment.emplace_back(oi, rj);
    e.substitutions += stats[i][j].substitutions;
    e.insertions += stats[i][j].insertions;
    e.deletions += stats[i][j].deletions;
  }
  std::sort(e.assignment.begin(), e.assignment.end(), [](const auto& x, const auto& y) {
    // Real outputs first in index order, then padded outputs by reference.
    if ((x.first < 0) != (y.first < 0)) return x.first >= 0;
    return x.first != y.first ? x.first < y.first : x.second < y.second;
  });
  return e;
}

inline WerEntry score_wer(const MergedOutput& merged, const ReferenceSet& refs) {
  std::vector<WordSeq> texts;
  for (const auto& t : merged.transcriptions) texts.push_back(t.text);
  return score_wer(texts, refs);
}

struct WerReport {
  std::vector<WerEntry> per_mix;
  long long total_errors = 0;
  long long total_ref_words = 0;
  /// 100 * errors / reference words; 0 when there are no reference words.
  double aggregate_wer = 0.0;
};

inline WerReport summarize_wer(std::vector<WerEntry> entries) {
  WerReport r;
  r.per_mix = std::move(entries);
  for (const auto& e : r.per_mix) {
    r.total_errors += e.errors();
    r.total_ref_words += e.ref_words;
  }
  if (r.total_ref_words > 0)
    r.aggregate_wer = 100.0 * static_cast<double>(r.total_errors) / static_cast<double>(r.total_ref_words);
  return r;
}

/// Aggregate WER over the entries whose reference count equals `num_refs`.
inline std::optional<double> wer_for_speaker_count(const WerReport& report, int num_refs) {
  long long err = 0, words = 0;
  bool any = false;
  for (const auto& e : report.per_mix) {
    if (e.num_refs != num_refs) continue;
    any = true;
    err += e.errors();
    words += e.ref_words;
  }
  if (!any) return std::nullopt;
  return words ? 100.0 * static_cast<double>(err) / static_cast<double>(words) : 0.0;
}

/// Per-mix-size WER table: one column per reference count plus "all".
inline std::string format_wer_table(const WerReport& report) {
  std::map<int, bool> sizes;
  for (const auto& e : report.per_mix) sizes[e.num_refs] = true;
  std::string head = "        ", row = "WER (%) ";
  char buf[64];
  for (const auto& [n, _] : sizes) {
    std::snprintf(buf, sizeof buf, "%8s", (std::to_string(n) + "mix").c_str());
    head += buf;
    std::snprintf(buf, sizeof buf, "%8.2f", *wer_for_speaker_count(report, n));
    row += buf;
  }
  std::snprintf(buf, sizeof buf, "%8s", "all");
  head += buf;
  std::snprintf(buf, sizeof buf, "%8.2f", report.aggregate_wer);
  row += buf;
  return head + "\n" + row + "\n";
}

// ---------------------------------------------------------------------------
// Speaker counting

struct SpeakerCountRun {
  int estimated = 0;
  int actual = 0;
};

struct CountRow {
  int actual = 0;
  int runs = 0;
  /// Percent of runs estimating 1, 2, 3 and 4 or more speakers.
  std::array<double, 4> percent{};
};

struct CountReport {
  std::vector<CountRow> rows;  // ascending actual count
};

inline int count_bucket(int estimated) { return estimated >= 4 ? 3 : estimated - 1; }

inline CountReport count_accuracy(std::span<const SpeakerCountRun> runs) {
  std::map<int, std::array<int, 4>> tally;
  for (const auto& r : runs) {
    if (r.estimated < 1 || r.actual < 1)
      throw ValidationError("speaker counts must be >= 1 (estimated " + std::to_string(r.estimated) + ", actual " +
                            std::to_string(r.actual) + ")");
    ++tally[r.actual][count_bucket(r.estimated)];
  }
  CountReport report;
  for (const auto& [actual, buckets] : tally) {
    CountRow row;
    row.actual = actual;
    for (int b : buckets) row.runs += b;
    for (int i = 0; i < 4; ++i) row.percent[i] = 100.0 * buckets[i] / row.runs;
    report.rows.push_back(row);
  }
  return report;
}

/// Plain-text table in the layout
///
///            estimated # speakers
///   actual      1      2      3   more
///        1 100.00   0.00   0.00   0.00
inline std::string format_count_table(const CountReport& report) {
  std::string out = "         estimated # speakers\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%6s %7s %7s %7s %7s\n", "actual", "1", "2", "3", "more");
  out += buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%6d %7.2f %7.2f %7.2f %7.2f\n", r.actual, r.percent[0], r.percent[1],
                  r.percent[2], r.percent[3]);
    out += buf;
  }
  return out;
}

}  // namespace hcm
