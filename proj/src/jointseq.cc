// jointseq.cc
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

#include "ctcbias/jointseq.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <queue>
#include <set>
#include <tuple>

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"
#include "ctcbias/tokenize.h"

namespace ctcbias {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr char kInputSep = '|';
constexpr char kOutputSep = '}';

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

bool Alignable(const TrainingPair& pair, int max_input) {
  const size_t n = pair.input.size();
  const size_t m = pair.output.size();
  return m >= 1 && m <= n && n <= m * static_cast<size_t>(max_input);
}

std::string UnitSymbol(const TrainingPair& pair, size_t begin, size_t len,
                       size_t out) {
  std::string s;
  for (size_t k = 0; k < len; ++k) {
    if (k) s += kInputSep;
    s += pair.input[begin + k];
  }
  s += kOutputSep;
  s += pair.output[out];
  return s;
}

void CheckSymbol(const std::string& sym) {
  if (sym.empty() || sym.find(kInputSep) != std::string::npos ||
      sym.find(kOutputSep) != std::string::npos ||
      sym.find_first_of(" \t\n") != std::string::npos) {
    throw ConfigError("symbol cannot be used in a pair unit: '" + sym + "'",
                      "pairs");
  }
}

// Log-space forward (alpha) and backward (beta) tables over
// (input position, output position).
struct Lattice {
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> beta;
};

template <typename ScoreFn>
Lattice ForwardBackward(const TrainingPair& pair, int max_input,
                        ScoreFn score) {
  const size_t n = pair.input.size();
  const size_t m = pair.output.size();
  Lattice lat;
  lat.alpha.assign(n + 1, std::vector<double>(m + 1, kNegInf));
  lat.beta.assign(n + 1, std::vector<double>(m + 1, kNegInf));
  lat.alpha[0][0] = 0.0;
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      for (size_t l = 1; l <= static_cast<size_t>(max_input) && l <= i; ++l) {
        double a = lat.alpha[i - l][j - 1];
        if (a == kNegInf) continue;
        lat.alpha[i][j] = LogAdd(lat.alpha[i][j], a + score(i - l, l, j - 1));
      }
    }
  }
  lat.beta[n][m] = 0.0;
  for (size_t i = n; i-- > 0;) {
    for (size_t j = m; j-- > 0;) {
      for (size_t l = 1; l <= static_cast<size_t>(max_input) && i + l <= n;
           ++l) {
        double b = lat.beta[i + l][j + 1];
        if (b == kNegInf) continue;
        lat.beta[i][j] = LogAdd(lat.beta[i][j], score(i, l, j) + b);
      }
    }
  }
  return lat;
}

void ValidateOptions(const AlignOptions& options) {
  if (options.max_input < 1) {
    throw ConfigError("max_input must be >= 1", "max_input");
  }
  if (options.max_iters < 1) {
    throw ConfigError("max_iters must be >= 1", "max_iters");
  }
  if (!(options.tol >= 0.0)) throw ConfigError("tol must be >= 0", "tol");
}

}  // namespace

std::string PairUnit::Symbol() const {
  if (input.empty()) throw ConfigError("pair unit without input", "unit");
  std::string s;
  for (size_t k = 0; k < input.size(); ++k) {
    CheckSymbol(input[k]);
    if (k) s += kInputSep;
    s += input[k];
  }
  CheckSymbol(output);
  s += kOutputSep;
  s += output;
  return s;
}

PairUnit PairUnit::Parse(const std::string& symbol) {
  auto brace = symbol.find(kOutputSep);
  if (brace == std::string::npos || brace == 0 || brace + 1 == symbol.size()) {
    throw Error(ErrorKind::kIo, "malformed pair unit symbol: " + symbol);
  }
  PairUnit unit;
  unit.output = symbol.substr(brace + 1);
  std::string in = symbol.substr(0, brace);
  size_t start = 0;
  while (true) {
    size_t bar = in.find(kInputSep, start);
    unit.input.push_back(in.substr(start, bar - start));
    if (unit.input.back().empty()) {
      throw Error(ErrorKind::kIo, "malformed pair unit symbol: " + symbol);
    }
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return unit;
}

std::vector<PairUnit> CandidateUnits(const TrainingPair& pair, int max_input) {
  std::vector<PairUnit> out;
  if (!Alignable(pair, max_input)) return out;
  Lattice lat = ForwardBackward(pair, max_input,
                                [](size_t, size_t, size_t) { return 0.0; });
  std::set<PairUnit> seen;
  const size_t n = pair.input.size();
  const size_t m = pair.output.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      if (lat.alpha[i][j] == kNegInf) continue;
      for (size_t l = 1; l <= static_cast<size_t>(max_input) && i + l <= n;
           ++l) {
        if (lat.beta[i + l][j + 1] == kNegInf) continue;
        PairUnit unit{{pair.input.begin() + static_cast<std::ptrdiff_t>(i),
                       pair.input.begin() + static_cast<std::ptrdiff_t>(i + l)},
                      pair.output[j]};
        if (seen.insert(unit).second) out.push_back(unit);
      }
    }
  }
  return out;
}

ExpectedCounts ComputeExpectedCounts(
    const std::vector<TrainingPair>& pairs,
    const std::map<std::string, double>& unit_logprobs, int max_input) {
  ExpectedCounts result;
  for (const TrainingPair& pair : pairs) {
    if (!Alignable(pair, max_input) || pair.weight <= 0.0) continue;
    auto score = [&](size_t begin, size_t len, size_t out) {
      auto it = unit_logprobs.find(UnitSymbol(pair, begin, len, out));
      return it == unit_logprobs.end() ? kNegInf : it->second;
    };
    Lattice lat = ForwardBackward(pair, max_input, score);
    const size_t n = pair.input.size();
    const size_t m = pair.output.size();
    const double z = lat.alpha[n][m];
    if (z == kNegInf) continue;
    result.log_likelihood += pair.weight * z;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < m; ++j) {
        if (lat.alpha[i][j] == kNegInf) continue;
        for (size_t l = 1; l <= static_cast<size_t>(max_input) && i + l <= n;
             ++l) {
          double b = lat.beta[i + l][j + 1];
          if (b == kNegInf) continue;
          double s = score(i, l, j);
          if (s == kNegInf) continue;
          double post = std::exp(lat.alpha[i][j] + s + b - z);
          result.counts[UnitSymbol(pair, i, l, j)] += pair.weight * post;
        }
      }
    }
  }
  return result;
}

AlignResult Align(const std::vector<TrainingPair>& pairs,
                  const AlignOptions& options) {
  ValidateOptions(options);
  AlignResult result;
  std::vector<TrainingPair> usable;
  for (const TrainingPair& pair : pairs) {
    if (pair.weight < 0.0 || std::isnan(pair.weight)) {
      throw ConfigError("pair weight must be >= 0", "weight");
    }
    for (const auto& s : pair.input) CheckSymbol(s);
    for (const auto& s : pair.output) CheckSymbol(s);
    if (Alignable(pair, options.max_input)) {
      usable.push_back(pair);
    } else {
      ++result.skipped;
    }
  }
  std::set<std::string> units;
  for (const TrainingPair& pair : usable) {
    for (const PairUnit& u : CandidateUnits(pair, options.max_input)) {
      units.insert(u.Symbol());
    }
  }
  std::map<std::string, double> logprobs;
  for (const auto& u : units) {
    logprobs[u] = -std::log(static_cast<double>(units.size()));
  }
  for (int it = 0; it < options.max_iters && !units.empty(); ++it) {
    ExpectedCounts ec =
        ComputeExpectedCounts(usable, logprobs, options.max_input);
    result.log_likelihoods.push_back(ec.log_likelihood);
    double total = 0.0;
    for (const auto& [u, c] : ec.counts) total += c;
    if (total <= 0.0) break;
    std::map<std::string, double> next;
    for (const auto& [u, c] : ec.counts) {
      if (c > 0.0) next[u] = std::log(c / total);
    }
    logprobs = std::move(next);
    if (it > 0) {
      double prev = result.log_likelihoods[it - 1];
      double gain = ec.log_likelihood - prev;
      if (gain <= options.tol * std::fabs(prev)) break;
    }
  }
  result.unit_logprobs = logprobs;

  for (const TrainingPair& pair : usable) {
    const size_t n = pair.input.size();
    const size_t m = pair.output.size();
    std::vector<std::vector<double>> best(n + 1,
                                          std::vector<double>(m + 1, kNegInf));
    std::vector<std::vector<size_t>> back(n + 1, std::vector<size_t>(m + 1, 0));
    best[0][0] = 0.0;
    for (size_t i = 1; i <= n; ++i) {
      for (size_t j = 1; j <= m; ++j) {
        for (size_t l = 1; l <= static_cast<size_t>(options.max_input) && l <= i;
             ++l) {
          double prev = best[i - l][j - 1];
          if (prev == kNegInf) continue;
          auto it = logprobs.find(UnitSymbol(pair, i - l, l, j - 1));
          if (it == logprobs.end()) continue;
          double s = prev + it->second;
          if (s > best[i][j]) {
            best[i][j] = s;
            back[i][j] = l;
          }
        }
      }
    }
    if (best[n][m] == kNegInf || pair.weight <= 0.0) {
      ++result.skipped;
      continue;
    }
    AlignedSequence seq;
    seq.weight = pair.weight;
    for (size_t i = n, j = m; j > 0; --j) {
      size_t l = back[i][j];
      seq.units.push_back(
          {{pair.input.begin() + static_cast<std::ptrdiff_t>(i - l),
            pair.input.begin() + static_cast<std::ptrdiff_t>(i)},
           pair.output[j - 1]});
      i -= l;
    }
    std::reverse(seq.units.begin(), seq.units.end());
    result.aligned.push_back(std::move(seq));
  }
  return result;
}

JointModel::JointModel(NgramModel lm) : lm_(std::move(lm)) {
  const SymbolTable& vocab = lm_.Vocab();
  for (Label id = 1; id < static_cast<Label>(vocab.Size()); ++id) {
    const std::string& sym = vocab.Symbol(id);
    if (sym == kBos || sym == kEos || sym == kUnk) continue;
    PairUnit unit = PairUnit::Parse(sym);
    const int len = static_cast<int>(unit.input.size());
    by_input_[Join(unit.input, std::string(1, kInputSep))].push_back(
        {id, unit.output, len});
    max_input_ = std::max(max_input_, len);
    ++num_units_;
  }
}

const std::vector<JointModel::UnitRef>* JointModel::UnitsFor(
    const std::string& input_key) const {
  auto it = by_input_.find(input_key);
  return it == by_input_.end() ? nullptr : &it->second;
}

double JointModel::UnigramCost(Label unit) const {
  return -lm_.LogProb({}, unit);
}

JointModel TrainJoint(const std::vector<AlignedSequence>& aligned, int order) {
  if (aligned.empty()) {
    throw ConfigError("no aligned sequences to train on", "aligned");
  }
  std::vector<TrainingSentence> corpus;
  for (const AlignedSequence& seq : aligned) {
    TrainingSentence sentence;
    for (const PairUnit& u : seq.units) sentence.tokens.push_back(u.Symbol());
    sentence.weight = seq.weight;
    corpus.push_back(std::move(sentence));
  }
  NgramTrainOptions options;
  options.order = order;
  options.include_unk = false;
  return JointModel(TrainNgram(corpus, options));
}

JointModel PruneJointEntropy(const JointModel& model, double threshold) {
  return JointModel(EntropyPrune(model.Lm(), threshold));
}

JointModel PruneUnits(const JointModel& model, double beam) {
  if (!(beam >= 0.0)) throw ConfigError("unit beam must be >= 0", "beam");
  const NgramModel& lm = model.Lm();
  const SymbolTable& vocab = lm.Vocab();
  // Best unigram cost per unit input.
  std::map<std::string, double> best;
  std::vector<std::string> key_of(vocab.Size());
  for (Label id = 1; id < static_cast<Label>(vocab.Size()); ++id) {
    const std::string& sym = vocab.Symbol(id);
    if (sym == kBos || sym == kEos || sym == kUnk) continue;
    PairUnit u = PairUnit::Parse(sym);
    key_of[id] = Join(u.input, std::string(1, kInputSep));
    double cost = model.UnigramCost(id);
    auto [it, inserted] = best.emplace(key_of[id], cost);
    if (!inserted) it->second = std::min(it->second, cost);
  }
  std::vector<bool> keep(vocab.Size(), true);
  bool dropped = false;
  for (Label id = 1; id < static_cast<Label>(vocab.Size()); ++id) {
    if (key_of[id].empty()) continue;
    if (model.UnigramCost(id) - best[key_of[id]] > beam) {
      keep[id] = false;
      dropped = true;
    }
  }
  if (!dropped) return model;

  auto new_vocab = std::make_shared<SymbolTable>();
  std::vector<Label> remap(vocab.Size(), kNoLabel);
  remap[kEpsilon] = kEpsilon;
  for (Label id = 1; id < static_cast<Label>(vocab.Size()); ++id) {
    if (keep[id]) remap[id] = new_vocab->AddSymbol(vocab.Symbol(id));
  }
  NgramModel pruned(lm.Order(), new_vocab);
  for (int k = 1; k <= lm.Order(); ++k) {
    for (const auto& [ng, e] : lm.Entries(k)) {
      Ngram mapped;
      for (Label w : ng) mapped.push_back(remap[w]);
      if (std::find(mapped.begin(), mapped.end(), kNoLabel) != mapped.end()) {
        continue;
      }
      pruned.SetEntry(mapped, e.logprob);
    }
  }
  // Renormalize any distribution whose stored entries now cover the whole
  // remaining vocabulary (the unigrams always do).
  const size_t predicted = pruned.PredictedTokens().size();
  for (int k = 1; k <= pruned.Order(); ++k) {
    std::map<Ngram, std::vector<std::pair<Ngram, double>>> groups;
    for (const auto& [ng, e] : pruned.Entries(k)) {
      if (std::isinf(e.logprob)) continue;
      groups[Ngram(ng.begin(), ng.end() - 1)].emplace_back(ng, e.logprob);
    }
    for (const auto& [history, members] : groups) {
      if (members.size() != predicted) continue;
      double z = 0.0;
      for (const auto& [ng, lp] : members) z += std::exp(lp);
      for (const auto& [ng, lp] : members) {
        pruned.SetEntry(ng, lp - std::log(z));
      }
    }
  }
  pruned.Finalize();
  return JointModel(std::move(pruned));
}

std::vector<Transduction> Nbest(const JointModel& model,
                                const std::vector<std::string>& input,
                                size_t n, std::string* diagnostic,
                                const NbestOptions& options) {
  if (n == 0) throw ConfigError("n-best size must be >= 1", "n");
  if (diagnostic) diagnostic->clear();
  std::vector<Transduction> results;
  const size_t len = input.size();
  if (len == 0) return results;
  const size_t max_in = static_cast<size_t>(model.MaxInput());

  // Units starting at each position, resolved once.
  std::vector<std::vector<const JointModel::UnitRef*>> starts(len);
  for (size_t i = 0; i < len; ++i) {
    std::string key;
    for (size_t l = 1; l <= max_in && i + l <= len; ++l) {
      if (l > 1) key += kInputSep;
      key += input[i + l - 1];
      if (const auto* units = model.UnitsFor(key)) {
        for (const auto& u : *units) starts[i].push_back(&u);
      }
    }
  }
  // Coverage: positions reachable from the start and able to reach the end.
  std::vector<bool> fwd(len + 1, false);
  fwd[0] = true;
  for (size_t i = 0; i < len; ++i) {
    if (!fwd[i]) continue;
    for (const auto* u : starts[i]) fwd[i + static_cast<size_t>(u->length)] = true;
  }
  if (!fwd[len]) {
    size_t stuck = 0;
    for (size_t i = 0; i < len; ++i) {
      if (fwd[i]) stuck = i;
    }
    if (diagnostic) {
      *diagnostic = "no unit covers input '" + input[stuck] + "' at position " +
                    std::to_string(stuck);
    }
    return results;
  }

  const NgramModel& lm = model.Lm();
  struct Node {
    double cost;
    size_t pos;  // len + 1 marks a completed hypothesis
    int state;
    std::vector<std::string> output;
  };
  auto worse = [](const Node& a, const Node& b) {
    return std::tie(a.cost, a.output, a.pos, a.state) >
           std::tie(b.cost, b.output, b.pos, b.state);
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> queue(worse);
  std::map<std::tuple<size_t, int, std::vector<std::string>>, double> settled;
  std::set<std::vector<std::string>> emitted;
  queue.push({0.0, 0, lm.StartState(), {}});
  size_t expansions = 0;
  while (!queue.empty() && results.size() < n &&
         expansions < options.max_expansions) {
    Node node = queue.top();
    queue.pop();
    auto key = std::make_tuple(node.pos, node.state, node.output);
    if (settled.count(key)) continue;
    settled.emplace(key, node.cost);
    if (node.pos == len + 1) {
      if (emitted.insert(node.output).second) {
        results.push_back({node.output, node.cost});
      }
      continue;
    }
    ++expansions;
    if (node.pos == len) {
      double c = lm.Score(node.state, lm.Eos(), nullptr);
      if (!std::isinf(c)) {
        queue.push({node.cost + c, len + 1, 0, node.output});
      }
      continue;
    }
    for (const auto* u : starts[node.pos]) {
      const size_t next_pos = node.pos + static_cast<size_t>(u->length);
      if (!fwd[next_pos]) continue;
      int next_state = 0;
      double c = lm.Score(node.state, u->label, &next_state);
      if (std::isinf(c)) continue;
      Node next{node.cost + c, next_pos, next_state, node.output};
      next.output.push_back(u->output);
      if (settled.count(std::make_tuple(next.pos, next.state, next.output))) {
        continue;
      }
      queue.push(std::move(next));
    }
  }
  return results;
}

std::vector<TrainingPair> ReadTrainingPairs(std::istream& in,
                                            const WordpieceModel* wp) {
  std::vector<TrainingPair> pairs;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (NormalizeWhitespace(line).empty()) continue;
    auto fields = SplitTabs(line);
    if (fields.size() < 3 || fields.size() > 4) {
      throw Error(ErrorKind::kIo, "training pair line " +
                                      std::to_string(line_no) +
                                      " needs 3 or 4 fields");
    }
    TrainingPair pair;
    pair.word = fields[0];
    pair.weight = ParseDouble(fields[1]);
    if (pair.weight < 0.0) {
      throw ConfigError("negative frequency on line " + std::to_string(line_no),
                        "frequency");
    }
    pair.input = SplitWhitespace(fields[2]);
    if (fields.size() == 4 && !NormalizeWhitespace(fields[3]).empty()) {
      pair.output = SplitWhitespace(fields[3]);
    } else {
      if (!wp) {
        throw ConfigError("output column missing and no wordpiece model",
                          "wordpieces");
      }
      pair.output = wp->Tokenize(ToLowerAscii(pair.word));
    }
    if (pair.input.empty()) {
      throw Error(ErrorKind::kIo, "empty input on line " +
                                      std::to_string(line_no));
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<TrainingPair> ReadTrainingPairsFile(const std::string& path,
                                                const WordpieceModel* wp) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return ReadTrainingPairs(in, wp);
}

void WriteJointModel(const JointModel& model, std::ostream& out) {
  WriteArpa(model.Lm(), out);
}

void WriteJointModelFile(const JointModel& model, const std::string& path) {
  WriteArpaFile(model.Lm(), path);
}

JointModel ReadJointModel(std::istream& in) { return JointModel(ReadArpa(in)); }

JointModel ReadJointModelFile(const std::string& path) {
  return JointModel(ReadArpaFile(path));
}

}  // namespace ctcbias
