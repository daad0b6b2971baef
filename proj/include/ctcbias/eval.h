// ctcbias/eval.h
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

#ifndef CTCBIAS_EVAL_H_
#define CTCBIAS_EVAL_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctcbias/corpus.h"

namespace ctcbias {

using WordSeq = std::vector<std::string>;

struct WerStats {
  size_t substitutions = 0;
  size_t insertions = 0;
  size_t deletions = 0;
  size_t ref_len = 0;

  size_t Errors() const { return substitutions + insertions + deletions; }
  bool Defined() const { return ref_len > 0; }
  // Percentage; throws Error(kUndefined) when ref_len is zero.
  double Wer() const;
  WerStats& operator+=(const WerStats& o);
};

enum class EditOp { kMatch, kSubstitute, kInsert, kDelete };

struct AlignedPair {
  EditOp op;
  int ref = -1;  // index into the reference, -1 for insertions
  int hyp = -1;  // index into the hypothesis, -1 for deletions
};

/// Minimum unit-cost edit alignment in reference order. Among optimal
/// alignments the traceback prefers a match or substitution, then a
/// deletion, then an insertion.
std::vector<AlignedPair> AlignWords(const WordSeq& ref, const WordSeq& hyp);

// Throws Error(kUndefined) for an empty reference.
WerStats Wer(const WordSeq& ref, const WordSeq& hyp);

// Counts without the empty-reference check (an empty reference scores its
// hypothesis words as insertions).
WerStats EditCounts(const WordSeq& ref, const WordSeq& hyp);

/// An entity span is recognized iff every reference word in it is matched to
/// an identical hypothesis word and no hypothesis word is inserted between
/// its first and last reference words.
bool EntityRecognized(const std::vector<AlignedPair>& alignment,
                      size_t begin, size_t end);

struct EntityOutcome {
  std::string utterance;
  std::string cls;
  std::string surface;
  bool correct = false;
};

struct CeerResult {
  size_t total = 0;
  size_t misrecognized = 0;
  std::vector<EntityOutcome> outcomes;
  // Percentage; empty when there are no entity occurrences.
  std::optional<double> Ceer() const;
};

using HypothesisMap = std::map<std::string, WordSeq>;

// Throws Error(kPrecondition) naming every subset-A id without a hypothesis.
CeerResult Ceer(const std::vector<Utterance>& corpus, const HypothesisMap& hyps);

struct EvalReport {
  WerStats all, a, b;
  CeerResult ceer;
};

// Throws Error(kPrecondition) naming every id without a hypothesis.
EvalReport Evaluate(const std::vector<Utterance>& corpus,
                    const HypothesisMap& hyps);

// Two decimals; "NA" for undefined values.
std::string FormatPercent(const std::optional<double>& value);
std::optional<double> WerOrNull(const WerStats& stats);

// `system<TAB>wer_all<TAB>wer_a<TAB>wer_b<TAB>ceer` with a header row.
void WriteReportTsv(
    const std::vector<std::pair<std::string, EvalReport>>& rows,
    std::ostream& out);
// JSON with counts, percentages (null when undefined) and per-entity
// outcomes.
void WriteReportJson(const std::string& system, const EvalReport& report,
                     std::ostream& out);

}  // namespace ctcbias

#endif  // CTCBIAS_EVAL_H_
