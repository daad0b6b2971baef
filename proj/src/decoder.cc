// decoder.cc
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

#include "ctcbias/decoder.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "json.hpp"

#include "ctcbias/errors.h"
#include "ctcbias/fst_ops.h"
#include "ctcbias/text_util.h"

namespace ctcbias {

namespace {

constexpr char kMagic[] = "CTCEM1";
constexpr double kInf = std::numeric_limits<double>::infinity();

void WriteU32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t ReadU32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error(ErrorKind::kIo, "emission file truncated");
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void CheckColumns(size_t columns, const SymbolTable& labels) {
  if (columns + 1 != labels.Size()) {
    throw ConfigError("emission width " + std::to_string(columns) +
                          " does not match the label table",
                      "labels");
  }
}

}  // namespace

EmissionMatrix::EmissionMatrix(size_t frames,
                               std::shared_ptr<const SymbolTable> labels)
    : frames_(frames),
      columns_(labels->Size() - 1),
      labels_(std::move(labels)),
      costs_(frames_ * columns_, 0.0f) {}

void WriteEmissionBinary(const EmissionMatrix& em, std::ostream& out) {
  out.write(kMagic, 6);
  WriteU32(out, static_cast<uint32_t>(em.NumFrames()));
  WriteU32(out, static_cast<uint32_t>(em.NumColumns()));
  for (float f : em.Data()) WriteU32(out, std::bit_cast<uint32_t>(f));
}

EmissionMatrix ReadEmissionBinary(std::istream& in,
                                  std::shared_ptr<const SymbolTable> labels) {
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0) {
    throw Error(ErrorKind::kIo, "not an emission file (bad magic)");
  }
  uint32_t frames = ReadU32(in);
  uint32_t columns = ReadU32(in);
  CheckColumns(columns, *labels);
  EmissionMatrix em(frames, std::move(labels));
  for (size_t t = 0; t < frames; ++t) {
    float* row = em.MutableRow(t);
    for (size_t c = 0; c < columns; ++c) {
      row[c] = std::bit_cast<float>(ReadU32(in));
    }
  }
  return em;
}

void WriteEmissionFile(const EmissionMatrix& em, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  WriteEmissionBinary(em, out);
}

EmissionMatrix ReadEmissionFile(const std::string& path,
                                std::shared_ptr<const SymbolTable> labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return ReadEmissionBinary(in, std::move(labels));
}

void WriteEmissionTsv(const EmissionMatrix& em, std::ostream& out) {
  out << '#';
  for (size_t c = 0; c < em.NumColumns(); ++c) {
    out << (c ? "\t" : "") << em.Labels()->Symbol(static_cast<Label>(c + 1));
  }
  out << '\n';
  char buf[32];
  for (size_t t = 0; t < em.NumFrames(); ++t) {
    const float* row = em.Row(t);
    for (size_t c = 0; c < em.NumColumns(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(row[c]));
      out << (c ? "\t" : "") << buf;
    }
    out << '\n';
  }
}

EmissionMatrix ReadEmissionTsv(std::istream& in,
                               std::shared_ptr<const SymbolTable> labels) {
  std::string line;
  std::vector<std::vector<float>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto syms = SplitTabs(line.substr(1));
      CheckColumns(syms.size(), *labels);
      for (size_t c = 0; c < syms.size(); ++c) {
        if (labels->Find(syms[c]) != static_cast<Label>(c + 1)) {
          throw ConfigError("emission header does not match the label table",
                            "labels");
        }
      }
      header = true;
      continue;
    }
    std::vector<float> row;
    for (const auto& cell : SplitTabs(line)) {
      row.push_back(static_cast<float>(ParseDouble(cell)));
    }
    CheckColumns(row.size(), *labels);
    rows.push_back(std::move(row));
  }
  if (!header) throw Error(ErrorKind::kIo, "emission TSV without header");
  EmissionMatrix em(rows.size(), std::move(labels));
  for (size_t t = 0; t < rows.size(); ++t) {
    std::copy(rows[t].begin(), rows[t].end(), em.MutableRow(t));
  }
  return em;
}

DecodingGraph BuildDecodingGraph(const Wfst& t, const Wfst& l,
                                 const NgramModel& g_uni) {
  if (!l.OutputSymbols() || !t.InputSymbols()) {
    throw ConfigError("decoding graph inputs need symbol tables", "symbols");
  }
  const SymbolTable& outs = *l.OutputSymbols();
  const SymbolTable& labels = *t.InputSymbols();
  DecodingGraph graph;
  const size_t n = outs.Size();
  graph.kinds.assign(n, DecodingGraph::OutKind::kNone);
  graph.uni_cost.assign(n, 0.0);
  graph.piece.assign(n, kNoLabel);
  graph.cls.assign(n, "");
  size_t num_words = 0;
  for (Label o = 1; o < static_cast<Label>(n); ++o) {
    const std::string& sym = outs.Symbol(o);
    if (IsClassName(sym)) {
      graph.kinds[o] = DecodingGraph::OutKind::kClassEntry;
      graph.cls[o] = sym;
    } else if (sym.size() > 3 && sym.rfind("</@", 0) == 0 && sym.back() == '>') {
      graph.kinds[o] = DecodingGraph::OutKind::kClassExit;
      graph.cls[o] = sym.substr(2, sym.size() - 3);
    } else if (sym.rfind(kPassThroughPrefix, 0) == 0) {
      graph.kinds[o] = DecodingGraph::OutKind::kPiece;
      graph.piece[o] = labels.Find(sym.substr(kPassThroughPrefix.size()));
      if (graph.piece[o] == kNoLabel) {
        throw ConfigError("pass-through symbol " + sym + " has no CTC label",
                          "symbols");
      }
    } else {
      graph.kinds[o] = DecodingGraph::OutKind::kWord;
      ++num_words;
    }
    if (graph.kinds[o] == DecodingGraph::OutKind::kWord ||
        graph.kinds[o] == DecodingGraph::OutKind::kClassEntry) {
      Label u = g_uni.Lookup(sym);
      graph.uni_cost[o] = u == kNoLabel ? kInf : -g_uni.LogProb({}, u);
    }
  }
  if (num_words == 0) throw ConfigError("lexicon has no words", "lexicon");
  graph.final_uni_cost = -g_uni.LogProb({}, g_uni.Eos());

  Wfst uni(l.OutputSymbols(), l.OutputSymbols());
  StateId s = uni.AddState();
  uni.SetStart(s);
  uni.SetFinal(s, Weight(graph.final_uni_cost));
  for (Label o = 1; o < static_cast<Label>(n); ++o) {
    if (std::isinf(graph.uni_cost[o])) continue;
    uni.AddArc(s, Arc(o, o, graph.uni_cost[o], s));
  }
  graph.fst = Compose(Compose(t, l), uni);
  if (graph.fst.Empty()) {
    throw ConfigError("decoding graph is empty", "lexicon");
  }
  ArcSort(&graph.fst);
  return graph;
}

void DecodeConfig::Validate() const {
  if (!(beam > 0.0)) throw ConfigError("beam must be > 0", "beam");
  if (max_active < 1) throw ConfigError("max_active must be >= 1", "max_active");
  if (!(lm_scale >= 0.0) || std::isinf(lm_scale)) {
    throw ConfigError("lm_scale must be finite and >= 0", "lm_scale");
  }
  if (nbest < 1) throw ConfigError("nbest must be >= 1", "nbest");
}

DecodeConfig DecodeConfig::Exhaustive() {
  DecodeConfig cfg;
  cfg.beam = kInf;
  cfg.max_active = std::numeric_limits<size_t>::max();
  return cfg;
}

namespace {

struct TokenKey {
  StateId graph;
  int lm;
  int cls;  // -1 outside class regions
  StateId bias;
  bool operator==(const TokenKey& o) const {
    return graph == o.graph && lm == o.lm && cls == o.cls && bias == o.bias;
  }
  bool operator<(const TokenKey& o) const {
    return std::tie(graph, lm, cls, bias) <
           std::tie(o.graph, o.lm, o.cls, o.bias);
  }
};

struct TokenKeyHash {
  size_t operator()(const TokenKey& k) const {
    uint64_t h = static_cast<uint32_t>(k.graph);
    h = h * 0x9E3779B97F4A7C15ULL + static_cast<uint32_t>(k.lm);
    h = h * 0x9E3779B97F4A7C15ULL + static_cast<uint32_t>(k.cls);
    h = h * 0x9E3779B97F4A7C15ULL + static_cast<uint32_t>(k.bias);
    return static_cast<size_t>(h ^ (h >> 29));
  }
};

struct Token {
  TokenKey key;
  double cost;
  double lm_delta;
  int32_t node;
};

// Traceback node: the frame label consumed (0 for epsilon moves) and at most
// one emitted word.
struct Node {
  enum Kind : uint8_t { kNone, kGraphWord, kBiasWord, kClassToken };
  int32_t parent;
  Label frame_label;
  Kind kind;
  int32_t cls;
  Label word;
};

class TokenSet {
 public:
  void Clear() {
    tokens_.clear();
    index_.clear();
  }
  // Returns the index when the token was inserted or improved, else -1.
  int Relax(const Token& tok) {
    auto [it, inserted] =
        index_.emplace(tok.key, static_cast<int>(tokens_.size()));
    if (inserted) {
      tokens_.push_back(tok);
      return it->second;
    }
    Token& cur = tokens_[it->second];
    if (tok.cost < cur.cost) {
      cur = tok;
      return it->second;
    }
    return -1;
  }
  std::vector<Token>& Tokens() { return tokens_; }

  // Beam and max_active pruning; keeps survivors in (cost, key) order.
  void Prune(double beam, size_t max_active) {
    if (tokens_.empty()) return;
    double best = kInf;
    for (const auto& t : tokens_) best = std::min(best, t.cost);
    std::vector<Token> kept;
    kept.reserve(tokens_.size());
    for (const auto& t : tokens_) {
      if (t.cost <= best + beam) kept.push_back(t);
    }
    std::sort(kept.begin(), kept.end(), [](const Token& a, const Token& b) {
      if (a.cost != b.cost) return a.cost < b.cost;
      return a.key < b.key;
    });
    if (kept.size() > max_active) kept.resize(max_active);
    tokens_.swap(kept);
    index_.clear();
  }

 private:
  std::vector<Token> tokens_;
  std::unordered_map<TokenKey, int, TokenKeyHash> index_;
};

class Search {
 public:
  Search(const EmissionMatrix& em, const DecodingGraph& graph,
         const NgramModel& g, const BiasMap& biases, const DecodeConfig& cfg)
      : em_(em), graph_(graph), g_(g), cfg_(cfg) {
    const SymbolTable& outs = graph.Outputs();
    glabel_.assign(outs.Size(), kNoLabel);
    class_of_.assign(outs.Size(), -1);
    for (Label o = 1; o < static_cast<Label>(outs.Size()); ++o) {
      auto kind = graph.kinds[o];
      if (kind == DecodingGraph::OutKind::kWord) {
        glabel_[o] = g.Lookup(outs.Symbol(o));
      } else if (kind == DecodingGraph::OutKind::kClassEntry ||
                 kind == DecodingGraph::OutKind::kClassExit) {
        const std::string& name = graph.cls[o];
        auto it = std::find(class_names_.begin(), class_names_.end(), name);
        if (it == class_names_.end()) {
          auto b = biases.find(name);
          if (b == biases.end() || b->second == nullptr) {
            throw Error(ErrorKind::kPrecondition,
                        "no bias FST for class " + name);
          }
          if (!SameSymbols(b->second->fst.InputSymbols(),
                           graph.fst.InputSymbols())) {
            throw ConfigError("bias FST for " + name +
                                  " uses a different wordpiece table",
                              "symbols");
          }
          class_names_.push_back(name);
          class_fst_.push_back(&b->second->fst);
          class_glabel_.push_back(g.Lookup(name));
          it = class_names_.end() - 1;
        }
        class_of_[o] = static_cast<int>(it - class_names_.begin());
      }
    }
  }

  std::vector<Hypothesis> Run() {
    TokenSet cur, next;
    nodes_.push_back({-1, kEpsilon, Node::kNone, -1, kNoLabel});
    cur.Relax({{graph_.fst.Start(), g_.StartState(), -1, kNoState}, 0.0, 0.0,
               0});
    Closure(&cur);
    cur.Prune(cfg_.beam, cfg_.max_active);

    const Label num_labels = static_cast<Label>(em_.NumColumns());
    std::vector<Label> active;
    for (size_t t = 0; t < em_.NumFrames(); ++t) {
      // Labels whose emission cost is within the beam of the frame's best.
      const float* row = em_.Row(t);
      double best_em = kInf;
      for (Label l = 1; l <= num_labels; ++l) {
        best_em = std::min(best_em, static_cast<double>(row[l - 1]));
      }
      active.clear();
      for (Label l = 1; l <= num_labels; ++l) {
        if (row[l - 1] <= best_em + cfg_.beam) active.push_back(l);
      }

      next.Clear();
      cutoff_ = kInf;
      for (const Token& tok : cur.Tokens()) {
        auto arcs = graph_.fst.Arcs(tok.key.graph);
        auto lo = arcs.begin();
        for (Label l : active) {
          lo = std::lower_bound(lo, arcs.end(), l,
                                [](const Arc& a, Label x) { return a.ilabel < x; });
          if (lo == arcs.end()) break;
          const double em_cost = row[l - 1];
          for (auto it = lo; it != arcs.end() && it->ilabel == l; ++it) {
            if (tok.cost + em_cost + it->weight.Value() > cutoff_) continue;
            Extend(tok, *it, em_cost, l, &next, nullptr);
          }
        }
      }
      Closure(&next);
      next.Prune(cfg_.beam, cfg_.max_active);
      std::swap(cur, next);
      if (cur.Tokens().empty()) break;
    }
    return Finish(cur);
  }

 private:
  // Applies one arc (and its output label) to a token. New or improved
  // tokens are relaxed into `out`; their indices go to `queue` if given.
  void Extend(const Token& tok, const Arc& arc, double add_cost,
              Label frame_label, TokenSet* out, std::deque<int>* queue) {
    const double base = tok.cost + add_cost + arc.weight.Value();
    Token nt{tok.key, base, tok.lm_delta, -1};
    nt.key.graph = arc.nextstate;
    Node node{tok.node, frame_label, Node::kNone, -1, kNoLabel};
    using K = DecodingGraph::OutKind;
    const K kind = arc.olabel == kEpsilon ? K::kNone : graph_.kinds[arc.olabel];
    switch (kind) {
      case K::kNone:
        break;
      case K::kWord: {
        if (tok.key.cls >= 0) return;
        const Label w = glabel_[arc.olabel];
        if (w == kNoLabel) return;
        int next_lm;
        const double c = g_.Score(tok.key.lm, w, &next_lm);
        if (std::isinf(c)) return;
        const double delta = cfg_.lm_scale * (c - graph_.uni_cost[arc.olabel]);
        nt.cost += delta;
        nt.lm_delta += delta;
        nt.key.lm = next_lm;
        node.kind = Node::kGraphWord;
        node.word = arc.olabel;
        break;
      }
      case K::kClassEntry: {
        if (tok.key.cls >= 0) return;
        const int c = class_of_[arc.olabel];
        nt.key.cls = c;
        nt.key.bias = class_fst_[c]->Start();
        if (nt.key.bias == kNoState) return;
        break;
      }
      case K::kPiece: {
        const int c = tok.key.cls;
        if (c < 0) return;
        const Wfst& bias = *class_fst_[c];
        const Label p = graph_.piece[arc.olabel];
        auto barcs = bias.Arcs(tok.key.bias);
        auto it = std::lower_bound(
            barcs.begin(), barcs.end(), p,
            [](const Arc& a, Label x) { return a.ilabel < x; });
        for (; it != barcs.end() && it->ilabel == p; ++it) {
          Token bt = nt;
          bt.cost += it->weight.Value();
          bt.key.bias = it->nextstate;
          Node bn = node;
          if (it->olabel != kEpsilon) {
            bn.kind = Node::kBiasWord;
            bn.cls = c;
            bn.word = it->olabel;
          }
          Commit(bt, bn, out, queue);
        }
        return;
      }
      case K::kClassExit: {
        const int c = tok.key.cls;
        if (c < 0 || c != class_of_[arc.olabel]) return;
        const Weight f = class_fst_[c]->Final(tok.key.bias);
        if (f.IsZero()) return;
        nt.cost += f.Value();
        const Label w = class_glabel_[c];
        if (w == kNoLabel) return;
        int next_lm;
        const double lc = g_.Score(tok.key.lm, w, &next_lm);
        if (std::isinf(lc)) return;
        // The class's G_uni cost was paid on the entry arc.
        const double delta = cfg_.lm_scale * (lc - UniCostOfClass(c));
        nt.cost += delta;
        nt.lm_delta += delta;
        nt.key.lm = next_lm;
        nt.key.cls = -1;
        nt.key.bias = kNoState;
        node.kind = Node::kClassToken;
        node.cls = c;
        break;
      }
    }
    Commit(nt, node, out, queue);
  }

  void Commit(Token tok, const Node& node, TokenSet* out,
              std::deque<int>* queue) {
    if (tok.cost > cutoff_) return;
    tok.node = static_cast<int32_t>(nodes_.size());
    int idx = out->Relax(tok);
    if (idx < 0) return;
    nodes_.push_back(node);
    cutoff_ = std::min(cutoff_, tok.cost + cfg_.beam);
    if (queue) queue->push_back(idx);
  }

  double UniCostOfClass(int c) const {
    const SymbolTable& outs = graph_.Outputs();
    return graph_.uni_cost[outs.Find(class_names_[c])];
  }

  // Follows epsilon-input arcs (class entry and exit) to a fixpoint.
  void Closure(TokenSet* set) {
    std::deque<int> queue;
    for (size_t i = 0; i < set->Tokens().size(); ++i) {
      queue.push_back(static_cast<int>(i));
    }
    while (!queue.empty()) {
      const Token tok = set->Tokens()[queue.front()];
      queue.pop_front();
      for (const Arc& arc : graph_.fst.Arcs(tok.key.graph)) {
        if (arc.ilabel != kEpsilon) break;
        Extend(tok, arc, 0.0, kEpsilon, set, &queue);
      }
    }
  }

  std::vector<Hypothesis> Finish(TokenSet& set) {
    struct Final {
      double cost;
      double lm_delta;
      int32_t node;
      int lm;
    };
    std::vector<Final> finals;
    for (const Token& tok : set.Tokens()) {
      if (tok.key.cls >= 0) continue;
      const Weight f = graph_.fst.Final(tok.key.graph);
      if (f.IsZero()) continue;
      int unused;
      const double eos = g_.Score(tok.key.lm, g_.Eos(), &unused);
      if (std::isinf(eos)) continue;
      const double delta = cfg_.lm_scale * (eos - graph_.final_uni_cost);
      finals.push_back({tok.cost + f.Value() + delta, tok.lm_delta + delta,
                        tok.node, tok.key.lm});
    }
    std::stable_sort(finals.begin(), finals.end(),
                     [](const Final& a, const Final& b) { return a.cost < b.cost; });
    std::vector<Hypothesis> out;
    for (const auto& f : finals) {
      Hypothesis h = Trace(f.node);
      h.cost = f.cost;
      h.lm_delta = f.lm_delta;
      bool dup = false;
      for (const auto& o : out) dup = dup || o.words == h.words;
      if (dup) continue;
      out.push_back(std::move(h));
      if (out.size() >= cfg_.nbest) break;
    }
    return out;
  }

  Hypothesis Trace(int32_t node) const {
    std::vector<const Node*> chain;
    for (int32_t n = node; n > 0; n = nodes_[n].parent) chain.push_back(&nodes_[n]);
    std::reverse(chain.begin(), chain.end());
    Hypothesis h;
    const SymbolTable& labels = *graph_.fst.InputSymbols();
    const Label blank = labels.Blank();
    Label prev = kNoLabel;
    for (const Node* n : chain) {
      if (n->frame_label != kEpsilon) {
        if (n->frame_label != prev && n->frame_label != blank) {
          h.pieces.push_back(labels.Symbol(n->frame_label));
        }
        prev = n->frame_label;
      }
      switch (n->kind) {
        case Node::kGraphWord: {
          const std::string& w = graph_.Outputs().Symbol(n->word);
          h.words.push_back(w);
          h.lm_tokens.push_back(w);
          break;
        }
        case Node::kBiasWord:
          h.words.push_back(class_fst_[n->cls]->OutputSymbols()->Symbol(n->word));
          break;
        case Node::kClassToken:
          h.lm_tokens.push_back(class_names_[n->cls]);
          break;
        case Node::kNone:
          break;
      }
    }
    return h;
  }

  const EmissionMatrix& em_;
  const DecodingGraph& graph_;
  const NgramModel& g_;
  const DecodeConfig& cfg_;
  std::vector<Label> glabel_;
  std::vector<int> class_of_;
  std::vector<std::string> class_names_;
  std::vector<const Wfst*> class_fst_;
  std::vector<Label> class_glabel_;
  std::vector<Node> nodes_;
  double cutoff_ = kInf;
};

}  // namespace

std::vector<Hypothesis> Decode(const EmissionMatrix& em,
                               const DecodingGraph& graph, const NgramModel& g,
                               const BiasMap& biases, const DecodeConfig& cfg) {
  cfg.Validate();
  if (!em.Labels() || !SameSymbols(em.Labels(), graph.fst.InputSymbols())) {
    throw ConfigError("emission label table differs from the graph's",
                      "labels");
  }
  if (graph.fst.Empty()) return {};
  Search search(em, graph, g, biases, cfg);
  return search.Run();
}

void WriteHypothesisJsonl(const std::string& id, const Hypothesis* hyp,
                          std::ostream& out) {
  nlohmann::ordered_json j;
  j["id"] = id;
  if (hyp) {
    j["text"] = Join(hyp->words, " ");
    j["cost"] = hyp->cost;
    j["pieces"] = hyp->pieces;
  } else {
    j["text"] = "";
    j["cost"] = nullptr;
    j["pieces"] = nlohmann::ordered_json::array();
  }
  out << j.dump() << '\n';
}

std::map<std::string, std::vector<std::string>> ReadHypothesesJsonl(
    std::istream& in) {
  std::map<std::string, std::vector<std::string>> hyps;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (NormalizeWhitespace(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      hyps[j.at("id").get<std::string>()] =
          SplitWhitespace(j.at("text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, "hypotheses line " + std::to_string(line_no) +
                                      ": " + e.what());
    }
  }
  return hyps;
}

}  // namespace ctcbias
