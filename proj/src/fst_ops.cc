// fst_ops.cc
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

#include "ctcbias/fst_ops.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <tuple>
#include <unordered_map>

#include "ctcbias/errors.h"

namespace ctcbias {
namespace {

struct ComposeKey {
  StateId s1;
  StateId s2;
  int filter;
  bool operator==(const ComposeKey& o) const {
    return s1 == o.s1 && s2 == o.s2 && filter == o.filter;
  }
};

struct ComposeKeyHash {
  size_t operator()(const ComposeKey& k) const {
    uint64_t h = static_cast<uint32_t>(k.s1);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<uint32_t>(k.s2);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<uint32_t>(k.filter);
    return static_cast<size_t>(h ^ (h >> 29));
  }
};

// Per-state arc lists sorted by input label, for label lookups.
std::vector<std::vector<Arc>> SortedByInput(const Wfst& fst) {
  std::vector<std::vector<Arc>> out(fst.NumStates());
  for (size_t s = 0; s < fst.NumStates(); ++s) {
    auto arcs = fst.Arcs(static_cast<StateId>(s));
    out[s].assign(arcs.begin(), arcs.end());
    std::stable_sort(out[s].begin(), out[s].end(),
                     [](const Arc& a, const Arc& b) {
                       return a.ilabel < b.ilabel;
                     });
  }
  return out;
}

std::pair<std::vector<Arc>::const_iterator, std::vector<Arc>::const_iterator>
MatchInput(const std::vector<Arc>& arcs, Label label) {
  return std::equal_range(
      arcs.begin(), arcs.end(), Arc(label, 0, Weight::One(), 0),
      [](const Arc& a, const Arc& b) { return a.ilabel < b.ilabel; });
}

// Weights are compared on a grid of this size when deciding whether two
// residual weights (or pushed arc weights) are the same.
constexpr double kQuantum = 1e-7;

long long Quantize(Weight w) {
  if (w.IsZero()) return std::numeric_limits<long long>::max();
  return std::llround(w.Value() / kQuantum);
}

}  // namespace

Wfst Compose(const Wfst& a, const Wfst& b) {
  if (!SameSymbols(a.OutputSymbols(), b.InputSymbols())) {
    throw ConfigError("compose: output symbols of the left FST differ from "
                      "input symbols of the right FST");
  }
  Wfst out(a.InputSymbols(), b.OutputSymbols());
  if (a.Empty() || b.Empty()) return out;

  const auto b_arcs = SortedByInput(b);
  std::unordered_map<ComposeKey, StateId, ComposeKeyHash> ids;
  std::deque<ComposeKey> queue;
  auto state_of = [&](StateId s1, StateId s2, int f) {
    ComposeKey key{s1, s2, f};
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    StateId id = out.AddState();
    ids.emplace(key, id);
    queue.push_back(key);
    return id;
  };
  out.SetStart(state_of(a.Start(), b.Start(), 0));

  while (!queue.empty()) {
    ComposeKey key = queue.front();
    queue.pop_front();
    const StateId id = ids.at(key);
    if (a.IsFinal(key.s1) && b.IsFinal(key.s2)) {
      out.SetFinal(id, Times(a.Final(key.s1), b.Final(key.s2)));
    }
    const auto& barcs = b_arcs[key.s2];
    auto [beps_begin, beps_end] = MatchInput(barcs, kEpsilon);
    for (const Arc& e1 : a.Arcs(key.s1)) {
      if (e1.olabel == kEpsilon) {
        if (key.filter != 2) {
          StateId next = state_of(e1.nextstate, key.s2, 1);
          out.AddArc(id, Arc(e1.ilabel, kEpsilon, e1.weight, next));
        }
        if (key.filter == 0) {
          for (auto it = beps_begin; it != beps_end; ++it) {
            StateId next = state_of(e1.nextstate, it->nextstate, 0);
            out.AddArc(id, Arc(e1.ilabel, it->olabel,
                               Times(e1.weight, it->weight), next));
          }
        }
      } else {
        auto [begin, end] = MatchInput(barcs, e1.olabel);
        for (auto it = begin; it != end; ++it) {
          StateId next = state_of(e1.nextstate, it->nextstate, 0);
          out.AddArc(id, Arc(e1.ilabel, it->olabel,
                             Times(e1.weight, it->weight), next));
        }
      }
    }
    if (key.filter != 1) {
      for (auto it = beps_begin; it != beps_end; ++it) {
        StateId next = state_of(key.s1, it->nextstate, 2);
        out.AddArc(id, Arc(kEpsilon, it->olabel, it->weight, next));
      }
    }
  }
  return Connect(out);
}

Wfst RemoveEpsilons(const Wfst& fst) {
  const size_t n = fst.NumStates();
  Wfst out(fst.InputSymbols(), fst.OutputSymbols());
  if (fst.Empty()) return out;
  for (size_t s = 0; s < n; ++s) out.AddState();
  out.SetStart(fst.Start());

  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> relax_count(n, 0);
  std::vector<char> in_queue(n, 0);
  std::vector<StateId> touched;
  for (size_t p = 0; p < n; ++p) {
    // Shortest distances over epsilon:epsilon arcs from p (queue relaxation;
    // non-negative cycles converge, negative ones are detected).
    for (StateId t : touched) {
      dist[t] = std::numeric_limits<double>::infinity();
      relax_count[t] = 0;
    }
    touched.clear();
    std::deque<StateId> queue{static_cast<StateId>(p)};
    dist[p] = 0.0;
    in_queue[p] = 1;
    touched.push_back(static_cast<StateId>(p));
    while (!queue.empty()) {
      StateId q = queue.front();
      queue.pop_front();
      in_queue[q] = 0;
      for (const Arc& arc : fst.Arcs(q)) {
        if (arc.ilabel != kEpsilon || arc.olabel != kEpsilon) continue;
        double nd = dist[q] + arc.weight.Value();
        if (nd < dist[arc.nextstate]) {
          if (std::isinf(dist[arc.nextstate])) touched.push_back(arc.nextstate);
          dist[arc.nextstate] = nd;
          if (++relax_count[arc.nextstate] > static_cast<int>(n) + 1) {
            throw Error(ErrorKind::kDivergence,
                        "negative-weight epsilon cycle");
          }
          if (!in_queue[arc.nextstate]) {
            in_queue[arc.nextstate] = 1;
            queue.push_back(arc.nextstate);
          }
        }
      }
    }
    if (dist[p] < 0.0) {
      throw Error(ErrorKind::kDivergence, "negative-weight epsilon cycle");
    }

    std::sort(touched.begin(), touched.end());
    Weight final = Weight::Zero();
    std::map<std::tuple<Label, Label, StateId>, Weight> merged;
    std::vector<std::tuple<Label, Label, StateId>> order;
    for (StateId q : touched) {
      Weight dq(dist[q]);
      final = Plus(final, Times(dq, fst.Final(q)));
      for (const Arc& arc : fst.Arcs(q)) {
        if (arc.ilabel == kEpsilon && arc.olabel == kEpsilon) continue;
        auto key = std::make_tuple(arc.ilabel, arc.olabel, arc.nextstate);
        Weight w = Times(dq, arc.weight);
        auto [it, inserted] = merged.emplace(key, w);
        if (inserted) {
          order.push_back(key);
        } else {
          it->second = Plus(it->second, w);
        }
      }
    }
    auto ps = static_cast<StateId>(p);
    out.SetFinal(ps, final);
    for (const auto& key : order) {
      out.AddArc(ps, Arc(std::get<0>(key), std::get<1>(key), merged.at(key),
                         std::get<2>(key)));
    }
  }
  return Connect(out);
}

LabelPairEncoder::LabelPairEncoder() {
  codes_.emplace(std::make_pair(kEpsilon, kEpsilon), 0);
  pairs_.emplace_back(kEpsilon, kEpsilon);
}

Wfst LabelPairEncoder::Encode(const Wfst& fst) {
  isyms_ = fst.InputSymbols();
  osyms_ = fst.OutputSymbols();
  Wfst out;
  for (size_t s = 0; s < fst.NumStates(); ++s) out.AddState();
  out.SetStart(fst.Start());
  for (size_t s = 0; s < fst.NumStates(); ++s) {
    auto id = static_cast<StateId>(s);
    out.SetFinal(id, fst.Final(id));
    for (const Arc& arc : fst.Arcs(id)) {
      auto key = std::make_pair(arc.ilabel, arc.olabel);
      auto it = codes_.find(key);
      Label code;
      if (it == codes_.end()) {
        code = static_cast<Label>(pairs_.size());
        codes_.emplace(key, code);
        pairs_.push_back(key);
      } else {
        code = it->second;
      }
      out.AddArc(id, Arc(code, code, arc.weight, arc.nextstate));
    }
  }
  return out;
}

Wfst LabelPairEncoder::Decode(const Wfst& encoded) const {
  Wfst out(isyms_, osyms_);
  for (size_t s = 0; s < encoded.NumStates(); ++s) out.AddState();
  out.SetStart(encoded.Start());
  for (size_t s = 0; s < encoded.NumStates(); ++s) {
    auto id = static_cast<StateId>(s);
    out.SetFinal(id, encoded.Final(id));
    for (const Arc& arc : encoded.Arcs(id)) {
      auto [il, ol] = pairs_.at(arc.ilabel);
      out.AddArc(id, Arc(il, ol, arc.weight, arc.nextstate));
    }
  }
  return out;
}

namespace {

using Subset = std::vector<std::pair<StateId, double>>;

struct SubsetKeyHash {
  size_t operator()(const std::vector<std::pair<StateId, long long>>& k) const {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& [s, r] : k) {
      h = (h ^ static_cast<uint32_t>(s)) * 1099511628211ULL;
      h = (h ^ static_cast<uint64_t>(r)) * 1099511628211ULL;
    }
    return static_cast<size_t>(h);
  }
};

// Subset construction for an epsilon-free acyclic acceptor.
Wfst DeterminizeAcceptor(const Wfst& fst) {
  Wfst out;
  if (fst.Empty()) return out;
  std::unordered_map<std::vector<std::pair<StateId, long long>>, StateId,
                     SubsetKeyHash>
      ids;
  std::vector<Subset> subsets;
  std::deque<StateId> queue;

  auto state_of = [&](Subset subset) {
    std::sort(subset.begin(), subset.end());
    std::vector<std::pair<StateId, long long>> key;
    key.reserve(subset.size());
    for (const auto& [s, r] : subset) {
      key.emplace_back(s, std::llround(r / kQuantum));
    }
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    StateId id = out.AddState();
    ids.emplace(std::move(key), id);
    subsets.push_back(std::move(subset));
    queue.push_back(id);
    return id;
  };
  out.SetStart(state_of({{fst.Start(), 0.0}}));

  while (!queue.empty()) {
    StateId id = queue.front();
    queue.pop_front();
    const Subset subset = subsets[id];
    Weight final = Weight::Zero();
    std::map<Label, std::map<StateId, double>> by_label;
    for (const auto& [q, residual] : subset) {
      final = Plus(final, Times(Weight(residual), fst.Final(q)));
      for (const Arc& arc : fst.Arcs(q)) {
        double w = residual + arc.weight.Value();
        auto& targets = by_label[arc.ilabel];
        auto [it, inserted] = targets.emplace(arc.nextstate, w);
        if (!inserted) it->second = std::min(it->second, w);
      }
    }
    out.SetFinal(id, final);
    for (const auto& [label, targets] : by_label) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [q, w] : targets) best = std::min(best, w);
      Subset next;
      for (const auto& [q, w] : targets) next.emplace_back(q, w - best);
      StateId next_id = state_of(std::move(next));
      out.AddArc(id, Arc(label, label, Weight(best), next_id));
    }
  }
  return out;
}

}  // namespace

Wfst Determinize(const Wfst& fst) {
  if (!IsAcyclic(fst)) {
    throw Error(ErrorKind::kUnsupported,
                "determinize: cyclic input is not supported");
  }
  LabelPairEncoder encoder;
  Wfst encoded = RemoveEpsilons(encoder.Encode(fst));
  Wfst det = DeterminizeAcceptor(encoded);
  Wfst out = encoder.Decode(det);
  ArcSort(&out);
  return out;
}

std::vector<Weight> ShortestDistanceToFinal(const Wfst& fst) {
  const size_t n = fst.NumStates();
  std::vector<std::vector<std::pair<StateId, double>>> reverse(n);
  for (size_t s = 0; s < n; ++s) {
    for (const Arc& arc : fst.Arcs(static_cast<StateId>(s))) {
      reverse[arc.nextstate].emplace_back(static_cast<StateId>(s),
                                          arc.weight.Value());
    }
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> relax_count(n, 0);
  std::vector<char> in_queue(n, 0);
  std::deque<StateId> queue;
  for (size_t s = 0; s < n; ++s) {
    if (fst.IsFinal(static_cast<StateId>(s))) {
      dist[s] = fst.Final(static_cast<StateId>(s)).Value();
      queue.push_back(static_cast<StateId>(s));
      in_queue[s] = 1;
    }
  }
  while (!queue.empty()) {
    StateId q = queue.front();
    queue.pop_front();
    in_queue[q] = 0;
    for (const auto& [p, w] : reverse[q]) {
      double nd = dist[q] + w;
      if (nd < dist[p]) {
        dist[p] = nd;
        if (++relax_count[p] > static_cast<int>(n) + 1) {
          throw Error(ErrorKind::kDivergence, "negative-weight cycle");
        }
        if (!in_queue[p]) {
          in_queue[p] = 1;
          queue.push_back(p);
        }
      }
    }
  }
  std::vector<Weight> out(n);
  for (size_t s = 0; s < n; ++s) {
    out[s] = std::isinf(dist[s]) ? Weight::Zero() : Weight(dist[s]);
  }
  return out;
}

Wfst Minimize(const Wfst& fst) {
  LabelPairEncoder encoder;
  Wfst encoded = encoder.Encode(fst);
  if (!IsDeterministic(encoded, false)) {
    throw Error(ErrorKind::kPrecondition,
                "minimize: input is not deterministic");
  }
  encoded = Connect(encoded);
  Wfst empty_out = encoder.Decode(Wfst());
  if (encoded.Empty()) return empty_out;
  const size_t n = encoded.NumStates();

  // Push weights towards the start so equivalent suffixes carry identical
  // weights; the start's potential is reapplied after merging.
  const std::vector<Weight> potential = ShortestDistanceToFinal(encoded);
  struct PushedArc {
    Label label;
    long long qweight;
    Weight weight;
    StateId next;
  };
  std::vector<std::vector<PushedArc>> arcs(n);
  std::vector<Weight> finals(n);
  for (size_t s = 0; s < n; ++s) {
    auto id = static_cast<StateId>(s);
    finals[s] = Divide(encoded.Final(id), potential[s]);
    for (const Arc& arc : encoded.Arcs(id)) {
      Weight w = Divide(Times(arc.weight, potential[arc.nextstate]),
                        potential[s]);
      arcs[s].push_back({arc.ilabel, Quantize(w), w, arc.nextstate});
    }
    // Order by the decoded label pair so numbering does not depend on the
    // order in which codes were assigned.
    std::sort(arcs[s].begin(), arcs[s].end(),
              [&encoder](const PushedArc& a, const PushedArc& b) {
                return encoder.PairOf(a.label) < encoder.PairOf(b.label);
              });
  }

  // Moore-style partition refinement.
  std::vector<int> cls(n);
  {
    std::map<long long, int> ids;
    for (size_t s = 0; s < n; ++s) {
      auto [it, _] = ids.emplace(Quantize(finals[s]),
                                 static_cast<int>(ids.size()));
      cls[s] = it->second;
    }
  }
  size_t num_classes = 0;
  while (true) {
    using Signature =
        std::pair<int, std::vector<std::tuple<Label, long long, int>>>;
    std::map<Signature, int> ids;
    std::vector<int> next_cls(n);
    for (size_t s = 0; s < n; ++s) {
      Signature sig;
      sig.first = cls[s];
      for (const auto& a : arcs[s]) {
        sig.second.emplace_back(a.label, a.qweight, cls[a.next]);
      }
      auto [it, _] = ids.emplace(std::move(sig), static_cast<int>(ids.size()));
      next_cls[s] = it->second;
    }
    cls.swap(next_cls);
    if (ids.size() == num_classes) break;
    num_classes = ids.size();
  }

  std::vector<StateId> representative(num_classes, kNoState);
  std::vector<int> class_size(num_classes, 0);
  for (size_t s = 0; s < n; ++s) {
    if (representative[cls[s]] == kNoState) {
      representative[cls[s]] = static_cast<StateId>(s);
    }
    ++class_size[cls[s]];
  }

  // Canonical numbering: breadth first from the start, arcs in label order.
  const Weight initial = potential[encoded.Start()];
  const bool split_start = class_size[cls[encoded.Start()]] > 1 &&
                           initial != Weight::One();
  Wfst quotient;
  std::vector<StateId> number(num_classes, kNoState);
  std::deque<int> queue;
  auto visit = [&](int c) {
    if (number[c] == kNoState) {
      number[c] = quotient.AddState();
      queue.push_back(c);
    }
    return number[c];
  };
  auto emit_state = [&](StateId target, int c, Weight extra) {
    StateId rep = representative[c];
    quotient.SetFinal(target, Times(extra, finals[rep]));
    for (const auto& a : arcs[rep]) {
      StateId next = visit(cls[a.next]);
      quotient.AddArc(target, Arc(a.label, a.label, Times(extra, a.weight),
                                  next));
    }
  };
  const int start_class = cls[encoded.Start()];
  if (split_start) {
    StateId fresh = quotient.AddState();
    quotient.SetStart(fresh);
    emit_state(fresh, start_class, initial);
  } else {
    quotient.SetStart(visit(start_class));
  }
  while (!queue.empty()) {
    int c = queue.front();
    queue.pop_front();
    Weight extra = (!split_start && c == start_class) ? initial : Weight::One();
    emit_state(number[c], c, extra);
  }
  Wfst out = encoder.Decode(quotient);
  ArcSort(&out);
  return out;
}

std::vector<WeightedPath> ShortestPaths(const Wfst& fst, size_t n) {
  std::vector<WeightedPath> result;
  if (fst.Empty() || n == 0) return result;
  if (!IsAcyclic(fst)) {
    throw Error(ErrorKind::kUnsupported,
                "shortest_paths: cyclic input is not supported");
  }
  const std::vector<Weight> to_final = ShortestDistanceToFinal(fst);
  if (to_final[fst.Start()].IsZero()) return result;

  // A* over partial paths; the heuristic is exact so completed paths pop in
  // nondecreasing order. Ties at the n-th cost are all collected and then
  // ordered by output and input labels.
  struct Node {
    int parent;
    Label ilabel;
    Label olabel;
  };
  std::vector<Node> nodes;
  struct Item {
    double f;
    double g;
    StateId state;  // kNoState marks a completed path
    int node;
    long long seq;
  };
  auto cmp = [](const Item& a, const Item& b) {
    if (a.f != b.f) return a.f > b.f;
    return a.seq > b.seq;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> heap(cmp);
  long long seq = 0;
  heap.push({to_final[fst.Start()].Value(), 0.0, fst.Start(), -1, seq++});

  struct Done {
    double cost;
    int node;
  };
  std::vector<Done> done;
  double threshold = std::numeric_limits<double>::infinity();
  const double tie_tol = 1e-9;
  while (!heap.empty()) {
    Item item = heap.top();
    if (item.f > threshold + tie_tol) break;
    heap.pop();
    if (item.state == kNoState) {
      done.push_back({item.g, item.node});
      if (done.size() == n) threshold = item.f;
      continue;
    }
    if (fst.IsFinal(item.state)) {
      double g = item.g + fst.Final(item.state).Value();
      heap.push({g, g, kNoState, item.node, seq++});
    }
    for (const Arc& arc : fst.Arcs(item.state)) {
      if (to_final[arc.nextstate].IsZero()) continue;
      double g = item.g + arc.weight.Value();
      nodes.push_back({item.node, arc.ilabel, arc.olabel});
      heap.push({g + to_final[arc.nextstate].Value(), g, arc.nextstate,
                 static_cast<int>(nodes.size() - 1), seq++});
    }
  }

  for (const Done& d : done) {
    WeightedPath path;
    path.weight = Weight(d.cost);
    for (int i = d.node; i >= 0; i = nodes[i].parent) {
      if (nodes[i].ilabel != kEpsilon) path.input.push_back(nodes[i].ilabel);
      if (nodes[i].olabel != kEpsilon) path.output.push_back(nodes[i].olabel);
    }
    std::reverse(path.input.begin(), path.input.end());
    std::reverse(path.output.begin(), path.output.end());
    result.push_back(std::move(path));
  }
  std::stable_sort(result.begin(), result.end(),
                   [&](const WeightedPath& a, const WeightedPath& b) {
                     long long qa = std::llround(a.weight.Value() / tie_tol);
                     long long qb = std::llround(b.weight.Value() / tie_tol);
                     if (qa != qb) return qa < qb;
                     if (a.output != b.output) return a.output < b.output;
                     return a.input < b.input;
                   });
  if (result.size() > n) result.resize(n);
  return result;
}

}  // namespace ctcbias
