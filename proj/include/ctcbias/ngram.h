// ctcbias/ngram.h
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

#ifndef CTCBIAS_NGRAM_H_
#define CTCBIAS_NGRAM_H_

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctcbias/symbol_table.h"
#include "ctcbias/wfst.h"

namespace ctcbias {

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

using Ngram = std::vector<Label>;

// Natural-log probability and, for n-grams that prefix a longer stored
// n-gram, the natural-log backoff weight of the n-gram used as a history.
struct NgramEntry {
  double logprob = 0.0;
  std::optional<double> backoff;
};

/// Backoff n-gram model. Histories reduce to their longest stored suffix, so
/// the model doubles as a finite-state scorer through StartState()/Score().
class NgramModel {
 public:
  NgramModel(int order, std::shared_ptr<const SymbolTable> vocab);

  int Order() const { return order_; }
  const SymbolTable& Vocab() const { return *vocab_; }
  const std::shared_ptr<const SymbolTable>& VocabPtr() const { return vocab_; }
  Label Bos() const { return bos_; }
  Label Eos() const { return eos_; }
  Label Unk() const { return unk_; }
  // Vocabulary id, or <unk> (kNoLabel when the model has no <unk>).
  Label Lookup(std::string_view token) const;

  // Entries of order k (1-based), keyed by the full n-gram.
  const std::map<Ngram, NgramEntry>& Entries(int k) const {
    return entries_.at(k - 1);
  }
  const NgramEntry* Find(std::span<const Label> ngram) const;
  size_t NumEntries() const;

  // Tokens that carry probability mass: everything except epsilon and <s>.
  std::vector<Label> PredictedTokens() const;

  // Natural-log P(token | history); only the last order-1 history tokens
  // matter. Standard backoff recursion.
  double LogProb(std::span<const Label> history, Label token) const;
  // Natural-log backoff weight of a history (0 when not stored).
  double LogBackoff(std::span<const Label> history) const;
  // Natural-log probability of a sentence with <s>/</s> added.
  double SentenceLogProb(std::span<const Label> tokens) const;
  // Sum of P(w | history) over PredictedTokens().
  double TotalProbability(std::span<const Label> history) const;

  // Histories usable as scoring states: the empty history plus every stored
  // n-gram that prefixes a longer stored n-gram.
  int NumStates() const { return static_cast<int>(contexts_.size()); }
  int StartState() const { return start_state_; }
  int NullState() const { return 0; }
  const Ngram& StateHistory(int state) const { return contexts_.at(state); }
  // State of the longest suffix of `history` that is a scoring state.
  int StateFor(std::span<const Label> history) const;
  // Cost (negative natural log) of token in a state; sets the next state.
  double Score(int state, Label token, int* next_state) const;

  // Mutation, for trainers and pruners. Call Finalize() afterwards.
  void SetEntry(const Ngram& ngram, double logprob);
  void SetBackoff(const Ngram& ngram, double log_backoff);
  void RemoveEntry(const Ngram& ngram);
  // With renormalize, recomputes every backoff weight so each history sums
  // to one and drops backoffs from n-grams that no longer prefix anything;
  // always rebuilds the scoring states.
  void Finalize(bool renormalize = true);

 private:
  void RecomputeBackoffs();
  void BuildStates();

  int order_;
  std::shared_ptr<const SymbolTable> vocab_;
  std::vector<std::map<Ngram, NgramEntry>> entries_;
  Label bos_ = kNoLabel;
  Label eos_ = kNoLabel;
  Label unk_ = kNoLabel;
  std::vector<Ngram> contexts_;
  std::map<Ngram, int> context_ids_;
  int start_state_ = 0;
};

struct ClassSpan {
  size_t begin = 0;  // first word of the span
  size_t end = 0;    // one past the last word
  std::string cls;   // placeholder token, e.g. @CONTACT
};

struct TrainingSentence {
  std::vector<std::string> tokens;
  double weight = 1.0;
  std::vector<ClassSpan> spans;
};

struct NgramTrainOptions {
  int order = 3;
  bool sentence_boundaries = true;
  bool include_unk = true;
  // Extra vocabulary entries that receive smoothed mass even when unseen.
  std::vector<std::string> vocabulary;
};

// Weighted n-gram counts per order (index k-1), keyed by token strings,
// after class substitution and boundary padding.
using NgramCounts = std::vector<std::map<std::vector<std::string>, double>>;
NgramCounts CountNgrams(const std::vector<TrainingSentence>& corpus,
                        const NgramTrainOptions& options);

// Replaces each span by its class placeholder.
std::vector<std::string> SubstituteClasses(
    const std::vector<std::string>& tokens, const std::vector<ClassSpan>& spans);

/// Witten-Bell smoothed backoff model (interpolated estimates stored in
/// backoff form). Counts are the sentence weights, so fractional counts work.
/// Throws ConfigError when order < 1 or the corpus is empty.
NgramModel TrainNgram(const std::vector<TrainingSentence>& corpus,
                      const NgramTrainOptions& options);

/// Relative-entropy pruning of n-grams of order >= 2, highest order first.
/// An entry is dropped when removing it (and renormalizing its history's
/// backoff) changes the model by less than `threshold`, weighted by the
/// history probability. N-grams still needed as histories are kept.
NgramModel EntropyPrune(const NgramModel& model, double threshold);

// The weighted relative-entropy change of removing one stored n-gram.
double PruningDelta(const NgramModel& model, const Ngram& ngram);
// Probability of a history under the model, with a leading <s> given mass 1.
double HistoryProbability(const NgramModel& model,
                          std::span<const Label> history);

/// Backoff topology FST: one state per scoring state, token arcs weighted by
/// costs, epsilon arcs carrying backoff costs, </s> as final weights.
Wfst NgramToFst(const NgramModel& model);

// ARPA text (log10 probabilities, tab separated, six fractional digits).
void WriteArpa(const NgramModel& model, std::ostream& out);
void WriteArpaFile(const NgramModel& model, const std::string& path);
NgramModel ReadArpa(std::istream& in);
NgramModel ReadArpaFile(const std::string& path);

/// Unigram wordpiece costs (negative natural log) estimated on wordpiece
/// text; covers the whole inventory and sums to one over it.
class PriorTable {
 public:
  PriorTable() = default;
  static PriorTable Estimate(
      const std::vector<std::vector<std::string>>& piece_corpus,
      const std::vector<std::string>& inventory);

  bool Contains(const std::string& piece) const {
    return costs_.count(piece) > 0;
  }
  double Cost(const std::string& piece) const;
  void Set(const std::string& piece, double cost) { costs_[piece] = cost; }
  const std::map<std::string, double>& Costs() const { return costs_; }

  // TSV `piece<TAB>cost`.
  void Write(std::ostream& out) const;
  static PriorTable Read(std::istream& in);

 private:
  std::map<std::string, double> costs_;
};

// Pieces per cost bin [k*width, (k+1)*width); only non-empty bins, ascending.
std::vector<std::pair<double, int>> PriorHistogram(const PriorTable& prior,
                                                   double bin_width);
// TSV `bin_low<TAB>count`.
void WriteHistogram(const std::vector<std::pair<double, int>>& histogram,
                    std::ostream& out);

}  // namespace ctcbias

#endif  // CTCBIAS_NGRAM_H_
