// eval.cc
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

#include "ctcbias/eval.h"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "json.hpp"

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"

namespace ctcbias {

double WerStats::Wer() const {
  if (ref_len == 0) {
    throw Error(ErrorKind::kUndefined, "WER undefined for empty reference");
  }
  return 100.0 * static_cast<double>(Errors()) / static_cast<double>(ref_len);
}

WerStats& WerStats::operator+=(const WerStats& o) {
  substitutions += o.substitutions;
  insertions += o.insertions;
  deletions += o.deletions;
  ref_len += o.ref_len;
  return *this;
}

std::vector<AlignedPair> AlignWords(const WordSeq& ref, const WordSeq& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<size_t>> d(n + 1, std::vector<size_t>(m + 1));
  for (size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      size_t diag = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  std::vector<AlignedPair> out;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      bool same = ref[i - 1] == hyp[j - 1];
      if (d[i - 1][j - 1] + (same ? 0 : 1) == d[i][j]) {
        out.push_back({same ? EditOp::kMatch : EditOp::kSubstitute,
                       static_cast<int>(i - 1), static_cast<int>(j - 1)});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && d[i - 1][j] + 1 == d[i][j]) {
      out.push_back({EditOp::kDelete, static_cast<int>(i - 1), -1});
      --i;
    } else {
      out.push_back({EditOp::kInsert, -1, static_cast<int>(j - 1)});
      --j;
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

WerStats EditCounts(const WordSeq& ref, const WordSeq& hyp) {
  WerStats s;
  s.ref_len = ref.size();
  for (const auto& p : AlignWords(ref, hyp)) {
    switch (p.op) {
      case EditOp::kSubstitute: ++s.substitutions; break;
      case EditOp::kInsert: ++s.insertions; break;
      case EditOp::kDelete: ++s.deletions; break;
      case EditOp::kMatch: break;
    }
  }
  return s;
}

WerStats Wer(const WordSeq& ref, const WordSeq& hyp) {
  if (ref.empty()) {
    throw Error(ErrorKind::kUndefined, "WER undefined for empty reference");
  }
  return EditCounts(ref, hyp);
}

bool EntityRecognized(const std::vector<AlignedPair>& alignment, size_t begin,
                      size_t end) {
  bool inside = false;
  for (const auto& p : alignment) {
    if (p.ref >= 0) {
      auto r = static_cast<size_t>(p.ref);
      if (r < begin) continue;
      if (r >= end) break;
      if (p.op != EditOp::kMatch) return false;
      inside = r + 1 < end;  // still before the last spanned word
    } else if (inside) {
      return false;  // insertion strictly inside the span
    }
  }
  return true;
}

std::optional<double> CeerResult::Ceer() const {
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(misrecognized) /
         static_cast<double>(total);
}

namespace {

void CheckHypotheses(const std::vector<Utterance>& corpus,
                     const HypothesisMap& hyps, bool subset_a_only) {
  std::vector<std::string> missing;
  for (const auto& u : corpus) {
    if (subset_a_only && !u.InSubsetA()) continue;
    if (!hyps.count(u.id)) missing.push_back(u.id);
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::kPrecondition,
                "missing hypotheses for: " + Join(missing, ", "));
  }
}

}  // namespace

CeerResult Ceer(const std::vector<Utterance>& corpus,
                const HypothesisMap& hyps) {
  CheckHypotheses(corpus, hyps, /*subset_a_only=*/true);
  CeerResult result;
  for (const auto& u : corpus) {
    if (!u.InSubsetA()) continue;
    auto alignment = AlignWords(u.words, hyps.at(u.id));
    for (const auto& e : u.entities) {
      bool ok = EntityRecognized(alignment, e.begin, e.end);
      ++result.total;
      if (!ok) ++result.misrecognized;
      result.outcomes.push_back({u.id, e.cls, e.surface, ok});
    }
  }
  return result;
}

EvalReport Evaluate(const std::vector<Utterance>& corpus,
                    const HypothesisMap& hyps) {
  CheckHypotheses(corpus, hyps, /*subset_a_only=*/false);
  EvalReport report;
  for (const auto& u : corpus) {
    WerStats s = EditCounts(u.words, hyps.at(u.id));
    report.all += s;
    (u.InSubsetA() ? report.a : report.b) += s;
  }
  report.ceer = Ceer(corpus, hyps);
  return report;
}

std::optional<double> WerOrNull(const WerStats& stats) {
  if (!stats.Defined()) return std::nullopt;
  return stats.Wer();
}

std::string FormatPercent(const std::optional<double>& value) {
  if (!value) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *value);
  return buf;
}

void WriteReportTsv(
    const std::vector<std::pair<std::string, EvalReport>>& rows,
    std::ostream& out) {
  out << "system\twer_all\twer_a\twer_b\tceer\n";
  for (const auto& [name, r] : rows) {
    out << name << '\t' << FormatPercent(WerOrNull(r.all)) << '\t'
        << FormatPercent(WerOrNull(r.a)) << '\t'
        << FormatPercent(WerOrNull(r.b)) << '\t'
        << FormatPercent(r.ceer.Ceer()) << '\n';
  }
}

namespace {

nlohmann::ordered_json StatsJson(const WerStats& s) {
  nlohmann::ordered_json j;
  j["substitutions"] = s.substitutions;
  j["insertions"] = s.insertions;
  j["deletions"] = s.deletions;
  j["ref_len"] = s.ref_len;
  auto w = WerOrNull(s);
  j["wer"] = w ? nlohmann::ordered_json(*w) : nlohmann::ordered_json();
  return j;
}

}  // namespace

void WriteReportJson(const std::string& system, const EvalReport& report,
                     std::ostream& out) {
  nlohmann::ordered_json j;
  j["system"] = system;
  j["wer_all"] = StatsJson(report.all);
  j["wer_a"] = StatsJson(report.a);
  j["wer_b"] = StatsJson(report.b);
  auto c = report.ceer.Ceer();
  j["ceer"] = c ? nlohmann::ordered_json(*c) : nlohmann::ordered_json();
  j["contacts_total"] = report.ceer.total;
  j["contacts_misrecognized"] = report.ceer.misrecognized;
  auto outcomes = nlohmann::ordered_json::array();
  for (const auto& o : report.ceer.outcomes) {
    outcomes.push_back({{"utterance", o.utterance},
                        {"class", o.cls},
                        {"surface", o.surface},
                        {"correct", o.correct}});
  }
  j["entities"] = std::move(outcomes);
  out << j.dump(2) << '\n';
}

}  // namespace ctcbias
