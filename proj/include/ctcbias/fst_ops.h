// ctcbias/fst_ops.h
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

#ifndef CTCBIAS_FST_OPS_H_
#define CTCBIAS_FST_OPS_H_

#include <map>
#include <utility>
#include <vector>

#include "ctcbias/wfst.h"

namespace ctcbias {

/// Composition with the three-state epsilon filter, so each pair of matched
/// paths yields exactly one composed path. The result is connected.
/// Throws ConfigError when a's output table differs from b's input table.
Wfst Compose(const Wfst& a, const Wfst& b);

/// Removes arcs that are epsilon on both sides, folding epsilon-closure
/// distances into the remaining arcs and final weights.
/// Throws kDivergence on a negative-weight epsilon cycle.
Wfst RemoveEpsilons(const Wfst& fst);

/// Maps (ilabel, olabel) pairs onto a fresh label alphabet so a transducer
/// can be processed as an acceptor. Code 0 is reserved for (eps, eps).
class LabelPairEncoder {
 public:
  LabelPairEncoder();

  Wfst Encode(const Wfst& fst);
  Wfst Decode(const Wfst& encoded) const;
  std::pair<Label, Label> PairOf(Label code) const { return pairs_.at(code); }
  size_t NumCodes() const { return pairs_.size(); }

 private:
  std::map<std::pair<Label, Label>, Label> codes_;
  std::vector<std::pair<Label, Label>> pairs_;
  Wfst::SymbolsPtr isyms_;
  Wfst::SymbolsPtr osyms_;
};

/// Weighted determinization of an acyclic FST. Transducers are determinized
/// over encoded label pairs, so the result is deterministic on pairs (and on
/// input labels for acceptors). Throws kUnsupported for cyclic input.
Wfst Determinize(const Wfst& fst);

/// Minimization of a pair-deterministic FST after pushing weights towards the
/// start state. States are numbered canonically (breadth first, arcs in label
/// order). Throws kPrecondition when the input is not pair-deterministic.
Wfst Minimize(const Wfst& fst);

struct WeightedPath {
  std::vector<Label> input;   // epsilons removed
  std::vector<Label> output;  // epsilons removed
  Weight weight;
};

/// The n cheapest accepting paths, ordered by weight and then
/// lexicographically by output and input label ids. Acyclic input only.
std::vector<WeightedPath> ShortestPaths(const Wfst& fst, size_t n);

/// Shortest distance from every state to a final state (Zero() if none).
/// Throws kDivergence when a negative cycle is reachable.
std::vector<Weight> ShortestDistanceToFinal(const Wfst& fst);

}  // namespace ctcbias

#endif  // CTCBIAS_FST_OPS_H_
