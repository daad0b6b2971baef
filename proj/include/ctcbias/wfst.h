// ctcbias/wfst.h
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

#ifndef CTCBIAS_WFST_H_
#define CTCBIAS_WFST_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ctcbias/symbol_table.h"
#include "ctcbias/weight.h"

namespace ctcbias {

using StateId = int32_t;
constexpr StateId kNoState = -1;

struct Arc {
  Label ilabel = kEpsilon;
  Label olabel = kEpsilon;
  Weight weight = Weight::One();
  StateId nextstate = kNoState;

  Arc() = default;
  Arc(Label i, Label o, Weight w, StateId next)
      : ilabel(i), olabel(o), weight(w), nextstate(next) {}
  Arc(Label i, Label o, double w, StateId next)
      : ilabel(i), olabel(o), weight(w), nextstate(next) {}
};

/// Mutable vector-backed transducer over the tropical semiring. Once built,
/// instances are treated as values: every algorithm returns a new Wfst.
class Wfst {
 public:
  using SymbolsPtr = std::shared_ptr<const SymbolTable>;

  Wfst() = default;
  Wfst(SymbolsPtr isyms, SymbolsPtr osyms)
      : isyms_(std::move(isyms)), osyms_(std::move(osyms)) {}

  StateId AddState() {
    states_.emplace_back();
    return static_cast<StateId>(states_.size() - 1);
  }
  void SetStart(StateId s) { start_ = s; }
  void SetFinal(StateId s, Weight w) { states_.at(s).final = w; }
  void AddArc(StateId s, const Arc& arc) { states_.at(s).arcs.push_back(arc); }
  void ReserveStates(size_t n) { states_.reserve(n); }

  StateId Start() const { return start_; }
  size_t NumStates() const { return states_.size(); }
  Weight Final(StateId s) const { return states_[s].final; }
  bool IsFinal(StateId s) const { return !states_[s].final.IsZero(); }
  std::span<const Arc> Arcs(StateId s) const { return states_[s].arcs; }
  std::vector<Arc>& MutableArcs(StateId s) { return states_.at(s).arcs; }
  size_t NumArcs(StateId s) const { return states_[s].arcs.size(); }
  size_t NumArcs() const;
  bool Empty() const { return start_ == kNoState || states_.empty(); }

  const SymbolsPtr& InputSymbols() const { return isyms_; }
  const SymbolsPtr& OutputSymbols() const { return osyms_; }
  void SetInputSymbols(SymbolsPtr s) { isyms_ = std::move(s); }
  void SetOutputSymbols(SymbolsPtr s) { osyms_ = std::move(s); }

 private:
  struct State {
    std::vector<Arc> arcs;
    Weight final = Weight::Zero();
  };
  std::vector<State> states_;
  StateId start_ = kNoState;
  SymbolsPtr isyms_;
  SymbolsPtr osyms_;
};

// Keeps only states that are reachable from the start and can reach a final
// state; state order is preserved. A result with no such state is empty.
Wfst Connect(const Wfst& fst);

// Sorts each state's arcs by (ilabel, olabel, nextstate, weight).
void ArcSort(Wfst* fst);

// Topological order of all states, or nullopt when the FST has a cycle.
std::optional<std::vector<StateId>> TopologicalOrder(const Wfst& fst);
bool IsAcyclic(const Wfst& fst);

bool IsAcceptor(const Wfst& fst);

// No epsilon input labels and no state with two arcs sharing an input label.
// With `pairs` set, labels are the (ilabel, olabel) pairs instead, which is
// the determinism notion used for label-encoded transducers.
bool IsDeterministic(const Wfst& fst, bool pairs = false);

// Acceptor for a single label sequence with zero weights.
Wfst StringAcceptor(std::span<const Label> labels,
                    Wfst::SymbolsPtr syms = nullptr);

// Swaps input and output labels and tables.
Wfst Invert(const Wfst& fst);

// Copies output labels onto input labels (or vice versa).
Wfst ProjectOutput(const Wfst& fst);

bool SameSymbols(const Wfst::SymbolsPtr& a, const Wfst::SymbolsPtr& b);

}  // namespace ctcbias

#endif  // CTCBIAS_WFST_H_
