// wfst.cc
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

#include "ctcbias/wfst.h"

#include <algorithm>
#include <set>
#include <tuple>
#include <utility>

namespace ctcbias {

size_t Wfst::NumArcs() const {
  size_t n = 0;
  for (const auto& s : states_) n += s.arcs.size();
  return n;
}

Wfst Connect(const Wfst& fst) {
  Wfst out(fst.InputSymbols(), fst.OutputSymbols());
  const size_t n = fst.NumStates();
  if (fst.Start() == kNoState || n == 0) return out;

  std::vector<char> access(n, 0), coaccess(n, 0);
  std::vector<StateId> stack{fst.Start()};
  access[fst.Start()] = 1;
  std::vector<std::vector<StateId>> reverse(n);
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (const Arc& arc : fst.Arcs(s)) {
      reverse[arc.nextstate].push_back(s);
      if (!access[arc.nextstate]) {
        access[arc.nextstate] = 1;
        stack.push_back(arc.nextstate);
      }
    }
  }
  for (size_t s = 0; s < n; ++s) {
    if (access[s] && fst.IsFinal(static_cast<StateId>(s))) {
      coaccess[s] = 1;
      stack.push_back(static_cast<StateId>(s));
    }
  }
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (StateId p : reverse[s]) {
      if (!coaccess[p]) {
        coaccess[p] = 1;
        stack.push_back(p);
      }
    }
  }
  if (!coaccess[fst.Start()]) return out;

  std::vector<StateId> remap(n, kNoState);
  for (size_t s = 0; s < n; ++s) {
    if (access[s] && coaccess[s]) remap[s] = out.AddState();
  }
  out.SetStart(remap[fst.Start()]);
  for (size_t s = 0; s < n; ++s) {
    if (remap[s] == kNoState) continue;
    StateId ns = remap[s];
    out.SetFinal(ns, fst.Final(static_cast<StateId>(s)));
    for (const Arc& arc : fst.Arcs(static_cast<StateId>(s))) {
      if (remap[arc.nextstate] == kNoState) continue;
      out.AddArc(ns, Arc(arc.ilabel, arc.olabel, arc.weight,
                         remap[arc.nextstate]));
    }
  }
  return out;
}

void ArcSort(Wfst* fst) {
  for (size_t s = 0; s < fst->NumStates(); ++s) {
    auto& arcs = fst->MutableArcs(static_cast<StateId>(s));
    std::stable_sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) {
      return std::make_tuple(a.ilabel, a.olabel, a.nextstate,
                             a.weight.Value()) <
             std::make_tuple(b.ilabel, b.olabel, b.nextstate,
                             b.weight.Value());
    });
  }
}

std::optional<std::vector<StateId>> TopologicalOrder(const Wfst& fst) {
  const size_t n = fst.NumStates();
  std::vector<int> indegree(n, 0);
  for (size_t s = 0; s < n; ++s) {
    for (const Arc& arc : fst.Arcs(static_cast<StateId>(s))) {
      ++indegree[arc.nextstate];
    }
  }
  std::vector<StateId> order;
  order.reserve(n);
  std::vector<StateId> ready;
  for (size_t s = n; s-- > 0;) {
    if (indegree[s] == 0) ready.push_back(static_cast<StateId>(s));
  }
  while (!ready.empty()) {
    StateId s = ready.back();
    ready.pop_back();
    order.push_back(s);
    for (const Arc& arc : fst.Arcs(s)) {
      if (--indegree[arc.nextstate] == 0) ready.push_back(arc.nextstate);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

bool IsAcyclic(const Wfst& fst) { return TopologicalOrder(fst).has_value(); }

bool IsAcceptor(const Wfst& fst) {
  for (size_t s = 0; s < fst.NumStates(); ++s) {
    for (const Arc& arc : fst.Arcs(static_cast<StateId>(s))) {
      if (arc.ilabel != arc.olabel) return false;
    }
  }
  return true;
}

bool IsDeterministic(const Wfst& fst, bool pairs) {
  for (size_t s = 0; s < fst.NumStates(); ++s) {
    std::set<std::pair<Label, Label>> seen;
    for (const Arc& arc : fst.Arcs(static_cast<StateId>(s))) {
      if (pairs) {
        if (arc.ilabel == kEpsilon && arc.olabel == kEpsilon) return false;
        if (!seen.emplace(arc.ilabel, arc.olabel).second) return false;
      } else {
        if (arc.ilabel == kEpsilon) return false;
        if (!seen.emplace(arc.ilabel, 0).second) return false;
      }
    }
  }
  return true;
}

Wfst StringAcceptor(std::span<const Label> labels, Wfst::SymbolsPtr syms) {
  Wfst out(syms, syms);
  StateId s = out.AddState();
  out.SetStart(s);
  for (Label l : labels) {
    StateId next = out.AddState();
    out.AddArc(s, Arc(l, l, Weight::One(), next));
    s = next;
  }
  out.SetFinal(s, Weight::One());
  return out;
}

Wfst Invert(const Wfst& fst) {
  Wfst out(fst.OutputSymbols(), fst.InputSymbols());
  for (size_t s = 0; s < fst.NumStates(); ++s) out.AddState();
  out.SetStart(fst.Start());
  for (size_t s = 0; s < fst.NumStates(); ++s) {
    auto id = static_cast<StateId>(s);
    out.SetFinal(id, fst.Final(id));
    for (const Arc& arc : fst.Arcs(id)) {
      out.AddArc(id, Arc(arc.olabel, arc.ilabel, arc.weight, arc.nextstate));
    }
  }
  return out;
}

Wfst ProjectOutput(const Wfst& fst) {
  Wfst out(fst.OutputSymbols(), fst.OutputSymbols());
  for (size_t s = 0; s < fst.NumStates(); ++s) out.AddState();
  out.SetStart(fst.Start());
  for (size_t s = 0; s < fst.NumStates(); ++s) {
    auto id = static_cast<StateId>(s);
    out.SetFinal(id, fst.Final(id));
    for (const Arc& arc : fst.Arcs(id)) {
      out.AddArc(id, Arc(arc.olabel, arc.olabel, arc.weight, arc.nextstate));
    }
  }
  return out;
}

bool SameSymbols(const Wfst::SymbolsPtr& a, const Wfst::SymbolsPtr& b) {
  if (!a || !b) return true;
  if (a == b) return true;
  return *a == *b;
}

}  // namespace ctcbias
