// ctcbias/jointseq.h
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

#ifndef CTCBIAS_JOINTSEQ_H_
#define CTCBIAS_JOINTSEQ_H_

#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "ctcbias/ngram.h"

namespace ctcbias {

class WordpieceModel;

// A unit maps 1..max_input input symbols to exactly one output symbol. Its
// vocabulary symbol joins the inputs with '|' and appends '}' and the output.
struct PairUnit {
  std::vector<std::string> input;
  std::string output;

  std::string Symbol() const;
  static PairUnit Parse(const std::string& symbol);
  friend bool operator<(const PairUnit& a, const PairUnit& b) {
    return std::tie(a.input, a.output) < std::tie(b.input, b.output);
  }
  friend bool operator==(const PairUnit& a, const PairUnit& b) {
    return a.input == b.input && a.output == b.output;
  }
};

struct TrainingPair {
  std::string word;  // informational
  std::vector<std::string> input;
  std::vector<std::string> output;
  double weight = 1.0;
};

struct AlignOptions {
  int max_input = 4;
  int max_iters = 10;
  double tol = 1e-6;  // relative log-likelihood improvement
};

struct AlignedSequence {
  std::vector<PairUnit> units;
  double weight = 1.0;
};

struct AlignResult {
  std::vector<AlignedSequence> aligned;  // one per alignable pair, in order
  std::vector<double> log_likelihoods;   // per EM iteration
  size_t skipped = 0;                    // unalignable pairs
  std::map<std::string, double> unit_logprobs;  // final unigram estimates
};

struct ExpectedCounts {
  std::map<std::string, double> counts;  // unit symbol -> expected count
  double log_likelihood = 0.0;
};

// Every unit that can appear in some segmentation of the pair.
std::vector<PairUnit> CandidateUnits(const TrainingPair& pair, int max_input);

/// E-step: forward-backward over monotone segmentations of every pair into
/// units, using unigram unit log probabilities (missing units score -inf).
/// Counts are scaled by the pair weights. Unalignable pairs are ignored.
ExpectedCounts ComputeExpectedCounts(
    const std::vector<TrainingPair>& pairs,
    const std::map<std::string, double>& unit_logprobs, int max_input);

/// EM alignment from a uniform start; returns each pair's Viterbi
/// segmentation under the final estimates. Pairs with more outputs than
/// inputs are skipped and counted. Throws ConfigError on bad options.
AlignResult Align(const std::vector<TrainingPair>& pairs,
                  const AlignOptions& options);

/// Joint-sequence model: a backoff n-gram over unit symbols.
class JointModel {
 public:
  struct UnitRef {
    Label label;
    std::string output;
    int length;  // input symbols consumed
  };

  explicit JointModel(NgramModel lm);

  const NgramModel& Lm() const { return lm_; }
  int MaxInput() const { return max_input_; }
  size_t NumUnits() const { return num_units_; }
  size_t NumEntries() const { return lm_.NumEntries(); }
  // Units whose input is exactly `inputs` joined by '|'; null when none.
  const std::vector<UnitRef>* UnitsFor(const std::string& input_key) const;
  // Unigram cost (negative natural log) of a unit label.
  double UnigramCost(Label unit) const;

 private:
  NgramModel lm_;
  int max_input_ = 0;
  size_t num_units_ = 0;
  std::unordered_map<std::string, std::vector<UnitRef>> by_input_;
};

/// Witten-Bell n-gram over the aligned unit sequences with fractional
/// weights. Throws ConfigError on empty input.
JointModel TrainJoint(const std::vector<AlignedSequence>& aligned, int order);

// Relative-entropy pruning of the underlying n-gram.
JointModel PruneJointEntropy(const JointModel& model, double threshold);

/// Keeps, per distinct unit input, only units whose unigram cost is within
/// `beam` of the best one; entries referencing dropped units are removed and
/// the model is renormalized.
JointModel PruneUnits(const JointModel& model, double beam);

struct Transduction {
  std::vector<std::string> output;
  double cost = 0.0;  // negative natural-log joint probability, with </s>
};

struct NbestOptions {
  size_t max_expansions = 200000;
};

/// The n cheapest distinct output sequences for `input`, best first (exact
/// uniform-cost search over positions, n-gram states and partial outputs;
/// stops early only if max_expansions is reached). When some input position
/// cannot be covered, returns empty and sets `diagnostic`.
std::vector<Transduction> Nbest(const JointModel& model,
                                const std::vector<std::string>& input,
                                size_t n, std::string* diagnostic = nullptr,
                                const NbestOptions& options = {});

// TSV `word<TAB>frequency<TAB>in1 in2 ...[<TAB>out1 out2 ...]`. Missing
// output columns are filled by orthographic tokenization (wp required then).
std::vector<TrainingPair> ReadTrainingPairs(std::istream& in,
                                            const WordpieceModel* wp);
std::vector<TrainingPair> ReadTrainingPairsFile(const std::string& path,
                                                const WordpieceModel* wp);

void WriteJointModel(const JointModel& model, std::ostream& out);
void WriteJointModelFile(const JointModel& model, const std::string& path);
JointModel ReadJointModel(std::istream& in);
JointModel ReadJointModelFile(const std::string& path);

}  // namespace ctcbias

#endif  // CTCBIAS_JOINTSEQ_H_
