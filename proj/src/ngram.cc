// ngram.cc
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

#include "ctcbias/ngram.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"

namespace ctcbias {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kArpaZero = -99.0;
const double kLn10 = std::log(10.0);

Ngram Suffix(std::span<const Label> seq, size_t len) {
  return Ngram(seq.end() - static_cast<std::ptrdiff_t>(len), seq.end());
}

std::string FormatLog10(double natural_log) {
  if (std::isinf(natural_log)) return FormatWeight(kArpaZero);
  return FormatWeight(natural_log / kLn10);
}

double ParseLog10(const std::string& text) {
  double v = ParseDouble(text);
  if (v <= kArpaZero) return kNegInf;
  return v * kLn10;
}

}  // namespace

NgramModel::NgramModel(int order, std::shared_ptr<const SymbolTable> vocab)
    : order_(order), vocab_(std::move(vocab)) {
  if (order_ < 1) throw ConfigError("n-gram order must be >= 1", "order");
  if (!vocab_) throw ConfigError("n-gram model needs a vocabulary", "vocab");
  entries_.resize(order_);
  bos_ = vocab_->Find(kBos);
  eos_ = vocab_->Find(kEos);
  unk_ = vocab_->Find(kUnk);
  contexts_.push_back({});
  context_ids_[{}] = 0;
}

Label NgramModel::Lookup(std::string_view token) const {
  Label id = vocab_->Find(token);
  return id == kNoLabel ? unk_ : id;
}

const NgramEntry* NgramModel::Find(std::span<const Label> ngram) const {
  if (ngram.empty() || ngram.size() > entries_.size()) return nullptr;
  const auto& table = entries_[ngram.size() - 1];
  auto it = table.find(Ngram(ngram.begin(), ngram.end()));
  return it == table.end() ? nullptr : &it->second;
}

size_t NgramModel::NumEntries() const {
  size_t n = 0;
  for (const auto& table : entries_) n += table.size();
  return n;
}

std::vector<Label> NgramModel::PredictedTokens() const {
  std::vector<Label> out;
  for (Label id = 1; id < static_cast<Label>(vocab_->Size()); ++id) {
    if (id != bos_) out.push_back(id);
  }
  return out;
}

double NgramModel::LogProb(std::span<const Label> history, Label token) const {
  size_t len = std::min(history.size(), static_cast<size_t>(order_ - 1));
  double backoff = 0.0;
  Ngram key;
  for (;; --len) {
    key.assign(history.end() - static_cast<std::ptrdiff_t>(len),
               history.end());
    key.push_back(token);
    const auto& table = entries_[len];
    auto it = table.find(key);
    if (it != table.end()) return backoff + it->second.logprob;
    if (len == 0) break;
    key.pop_back();
    auto hist = entries_[len - 1].find(key);
    if (hist != entries_[len - 1].end() && hist->second.backoff) {
      backoff += *hist->second.backoff;
    }
  }
  return kNegInf;
}

double NgramModel::LogBackoff(std::span<const Label> history) const {
  const NgramEntry* e = Find(history);
  return e && e->backoff ? *e->backoff : 0.0;
}

double NgramModel::SentenceLogProb(std::span<const Label> tokens) const {
  Ngram history;
  if (bos_ != kNoLabel) history.push_back(bos_);
  double total = 0.0;
  for (Label t : tokens) {
    total += LogProb(history, t);
    history.push_back(t);
  }
  if (eos_ != kNoLabel) total += LogProb(history, eos_);
  return total;
}

double NgramModel::TotalProbability(std::span<const Label> history) const {
  double total = 0.0;
  for (Label w : PredictedTokens()) total += std::exp(LogProb(history, w));
  return total;
}

int NgramModel::StateFor(std::span<const Label> history) const {
  size_t len = std::min(history.size(), static_cast<size_t>(order_ - 1));
  for (;; --len) {
    auto it = context_ids_.find(Suffix(history, len));
    if (it != context_ids_.end()) return it->second;
    if (len == 0) return 0;
  }
}

double NgramModel::Score(int state, Label token, int* next_state) const {
  const Ngram& history = contexts_.at(state);
  double lp = LogProb(history, token);
  if (next_state) {
    Ngram extended = history;
    extended.push_back(token);
    *next_state = token == eos_ ? 0 : StateFor(extended);
  }
  return -lp;
}

void NgramModel::SetEntry(const Ngram& ngram, double logprob) {
  if (ngram.empty() || ngram.size() > entries_.size()) {
    throw Error(ErrorKind::kPrecondition, "n-gram length out of range");
  }
  entries_[ngram.size() - 1][ngram].logprob = logprob;
}

void NgramModel::SetBackoff(const Ngram& ngram, double log_backoff) {
  if (ngram.empty() || ngram.size() > entries_.size()) {
    throw Error(ErrorKind::kPrecondition, "n-gram length out of range");
  }
  auto& table = entries_[ngram.size() - 1];
  auto it = table.find(ngram);
  if (it == table.end()) {
    throw Error(ErrorKind::kPrecondition, "backoff on a missing n-gram");
  }
  it->second.backoff = log_backoff;
}

void NgramModel::RemoveEntry(const Ngram& ngram) {
  if (ngram.empty() || ngram.size() > entries_.size()) return;
  entries_[ngram.size() - 1].erase(ngram);
}

void NgramModel::Finalize(bool renormalize) {
  if (renormalize) RecomputeBackoffs();
  BuildStates();
}

void NgramModel::RecomputeBackoffs() {
  for (auto& table : entries_) {
    for (auto& [ng, e] : table) e.backoff.reset();
  }
  // Histories of length k-1 depend only on shorter histories, so ascending
  // order sees every needed backoff already in place.
  for (int k = 2; k <= order_; ++k) {
    const auto& table = entries_[k - 1];
    auto it = table.begin();
    while (it != table.end()) {
      Ngram history(it->first.begin(), it->first.end() - 1);
      std::span<const Label> lower(history.begin() + 1, history.end());
      double stored = 0.0;
      double lower_stored = 0.0;
      for (; it != table.end() &&
             std::equal(history.begin(), history.end(), it->first.begin());
           ++it) {
        stored += std::exp(it->second.logprob);
        lower_stored += std::exp(LogProb(lower, it->first.back()));
      }
      auto hist = entries_[k - 2].find(history);
      if (hist == entries_[k - 2].end()) {
        throw Error(ErrorKind::kPrecondition,
                    "stored n-gram lacks its history prefix");
      }
      double num = 1.0 - stored;
      double den = 1.0 - lower_stored;
      double bo = 0.0;
      if (num > 0.0 && den > 0.0) {
        bo = std::log(num) - std::log(den);
      } else if (num > 0.0) {
        bo = 0.0;  // lower order exhausted; nothing left to redistribute
      } else {
        bo = kNegInf;
      }
      if (std::isinf(bo)) bo = std::log(std::numeric_limits<double>::min());
      hist->second.backoff = bo;
    }
  }
}

void NgramModel::BuildStates() {
  contexts_.assign(1, Ngram{});
  context_ids_.clear();
  context_ids_[{}] = 0;
  for (int k = 2; k <= order_; ++k) {
    const Ngram* last = nullptr;
    for (const auto& [ng, e] : entries_[k - 1]) {
      Ngram history(ng.begin(), ng.end() - 1);
      if (last && *last == history) continue;
      auto [it, inserted] =
          context_ids_.emplace(history, static_cast<int>(contexts_.size()));
      if (inserted) contexts_.push_back(history);
      last = &it->first;
    }
  }
  // Renumber in (length, lexicographic) order for stable state ids.
  std::vector<Ngram> sorted = contexts_;
  std::sort(sorted.begin(), sorted.end(), [](const Ngram& a, const Ngram& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  contexts_ = std::move(sorted);
  context_ids_.clear();
  for (size_t i = 0; i < contexts_.size(); ++i) {
    context_ids_[contexts_[i]] = static_cast<int>(i);
  }
  start_state_ = bos_ != kNoLabel ? StateFor(Ngram{bos_}) : 0;
}

std::vector<std::string> SubstituteClasses(
    const std::vector<std::string>& tokens,
    const std::vector<ClassSpan>& spans) {
  std::vector<ClassSpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const ClassSpan& a, const ClassSpan& b) {
              return a.begin < b.begin;
            });
  std::vector<std::string> out;
  size_t pos = 0;
  for (const ClassSpan& span : sorted) {
    if (span.begin < pos || span.end <= span.begin ||
        span.end > tokens.size()) {
      throw ConfigError("invalid or overlapping class span", "spans");
    }
    out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos),
               tokens.begin() + static_cast<std::ptrdiff_t>(span.begin));
    out.push_back(span.cls);
    pos = span.end;
  }
  out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos),
             tokens.end());
  return out;
}

NgramCounts CountNgrams(const std::vector<TrainingSentence>& corpus,
                        const NgramTrainOptions& options) {
  if (options.order < 1) throw ConfigError("order must be >= 1", "order");
  NgramCounts counts(options.order);
  for (const TrainingSentence& sentence : corpus) {
    if (sentence.weight < 0.0 || std::isnan(sentence.weight)) {
      throw ConfigError("sentence weight must be non-negative", "weight");
    }
    if (sentence.weight == 0.0) continue;
    std::vector<std::string> seq;
    if (options.sentence_boundaries) seq.emplace_back(kBos);
    auto tokens = SubstituteClasses(sentence.tokens, sentence.spans);
    seq.insert(seq.end(), tokens.begin(), tokens.end());
    if (options.sentence_boundaries) seq.emplace_back(kEos);
    size_t first = options.sentence_boundaries ? 1 : 0;
    for (size_t i = first; i < seq.size(); ++i) {
      for (int k = 1; k <= options.order && static_cast<size_t>(k) <= i + 1;
           ++k) {
        std::vector<std::string> ng(seq.begin() + static_cast<std::ptrdiff_t>(
                                                      i + 1 - k),
                                    seq.begin() +
                                        static_cast<std::ptrdiff_t>(i + 1));
        counts[k - 1][ng] += sentence.weight;
      }
    }
  }
  return counts;
}

NgramModel TrainNgram(const std::vector<TrainingSentence>& corpus,
                      const NgramTrainOptions& options) {
  if (options.order < 1) throw ConfigError("order must be >= 1", "order");
  if (corpus.empty()) throw ConfigError("training corpus is empty", "corpus");
  NgramCounts counts = CountNgrams(corpus, options);
  if (counts[0].empty()) {
    throw ConfigError("training corpus has no weighted tokens", "corpus");
  }

  auto vocab = std::make_shared<SymbolTable>();
  if (options.sentence_boundaries) {
    vocab->AddSymbol(kBos);
    vocab->AddSymbol(kEos);
  }
  if (options.include_unk) vocab->AddSymbol(kUnk);
  std::set<std::string> tokens(options.vocabulary.begin(),
                               options.vocabulary.end());
  for (const auto& [ng, c] : counts[0]) tokens.insert(ng[0]);
  for (const std::string& t : tokens) {
    if (t == kBos || t == kEos || t == kUnk) continue;
    if (t == kEpsilonSymbol) {
      throw ConfigError("epsilon cannot be a vocabulary token", "corpus");
    }
    vocab->AddSymbol(t);
  }

  NgramModel model(options.order, vocab);
  auto ids = [&](const std::vector<std::string>& ng) {
    Ngram out;
    for (const auto& t : ng) out.push_back(vocab->Find(t));
    return out;
  };

  // Unigrams: interpolate with the uniform distribution.
  std::vector<Label> predicted = model.PredictedTokens();
  double total = 0.0;
  for (const auto& [ng, c] : counts[0]) total += c;
  double types = static_cast<double>(counts[0].size());
  double lambda = total / (total + types);
  double uniform = 1.0 / static_cast<double>(predicted.size());
  for (Label w : predicted) {
    auto it = counts[0].find({vocab->Symbol(w)});
    double c = it == counts[0].end() ? 0.0 : it->second;
    model.SetEntry({w}, std::log(lambda * c / total + (1.0 - lambda) * uniform));
  }
  if (model.Bos() != kNoLabel) model.SetEntry({model.Bos()}, kNegInf);

  // Higher orders: interpolate with the next lower order, per history.
  for (int k = 2; k <= options.order; ++k) {
    std::map<Ngram, std::vector<std::pair<Label, double>>> by_history;
    for (const auto& [ng, c] : counts[k - 1]) {
      Ngram full = ids(ng);
      Label w = full.back();
      full.pop_back();
      by_history[full].emplace_back(w, c);
    }
    for (const auto& [history, followers] : by_history) {
      double hist_total = 0.0;
      for (const auto& [w, c] : followers) hist_total += c;
      double hist_types = static_cast<double>(followers.size());
      double lam = hist_total / (hist_total + hist_types);
      std::span<const Label> lower(history.begin() + 1, history.end());
      for (const auto& [w, c] : followers) {
        double p_lower = std::exp(model.LogProb(lower, w));
        Ngram full = history;
        full.push_back(w);
        model.SetEntry(full, std::log(lam * c / hist_total +
                                      (1.0 - lam) * p_lower));
      }
    }
  }
  model.Finalize();
  return model;
}

double HistoryProbability(const NgramModel& model,
                          std::span<const Label> history) {
  Ngram context;
  size_t i = 0;
  if (!history.empty() && history[0] == model.Bos()) {
    context.push_back(model.Bos());
    i = 1;
  }
  double logp = 0.0;
  for (; i < history.size(); ++i) {
    logp += model.LogProb(context, history[i]);
    context.push_back(history[i]);
  }
  return std::exp(logp);
}

double PruningDelta(const NgramModel& model, const Ngram& ngram) {
  if (ngram.size() < 2) {
    throw Error(ErrorKind::kPrecondition, "only n-grams above order 1 prune");
  }
  Ngram history(ngram.begin(), ngram.end() - 1);
  std::span<const Label> lower(history.begin() + 1, history.end());
  const Label w = ngram.back();
  const auto& table = model.Entries(static_cast<int>(ngram.size()));

  double sum_ph = 0.0;
  double sum_pl = 0.0;
  for (auto it = table.lower_bound(history);
       it != table.end() &&
       std::equal(history.begin(), history.end(), it->first.begin());
       ++it) {
    sum_ph += std::exp(it->second.logprob);
    sum_pl += std::exp(model.LogProb(lower, it->first.back()));
  }
  const double log_p = model.LogProb(history, w);
  const double log_q = model.LogProb(lower, w);
  const double p = std::exp(log_p);
  const double q = std::exp(log_q);
  const double log_bo = model.LogBackoff(history);
  const double num = 1.0 - sum_ph + p;
  const double den = 1.0 - sum_pl + q;
  const double log_bo_new = std::log(num) - std::log(den);
  const double unstored = std::max(0.0, 1.0 - sum_ph);

  double delta = p * (log_q + log_bo_new - log_p);
  if (unstored > 0.0) delta += unstored * (log_bo_new - log_bo);
  delta *= -HistoryProbability(model, history);
  return std::max(0.0, delta);
}

NgramModel EntropyPrune(const NgramModel& model, double threshold) {
  if (threshold < 0.0 || std::isnan(threshold)) {
    throw ConfigError("pruning threshold must be >= 0", "threshold");
  }
  NgramModel pruned = model;
  for (int k = pruned.Order(); k >= 2; --k) {
    std::set<Ngram> needed;
    if (k < pruned.Order()) {
      for (const auto& [ng, e] : pruned.Entries(k + 1)) {
        needed.emplace(ng.begin(), ng.end() - 1);
      }
    }
    std::vector<Ngram> doomed;
    for (const auto& [ng, e] : pruned.Entries(k)) {
      if (needed.count(ng)) continue;
      if (PruningDelta(pruned, ng) < threshold) doomed.push_back(ng);
    }
    for (const Ngram& ng : doomed) pruned.RemoveEntry(ng);
    pruned.Finalize();
  }
  return pruned;
}

Wfst NgramToFst(const NgramModel& model) {
  Wfst fst(model.VocabPtr(), model.VocabPtr());
  for (int s = 0; s < model.NumStates(); ++s) fst.AddState();
  fst.SetStart(model.StartState());
  for (int k = 1; k <= model.Order(); ++k) {
    for (const auto& [ng, e] : model.Entries(k)) {
      const Label w = ng.back();
      if (w == model.Bos() || std::isinf(e.logprob)) continue;
      Ngram history(ng.begin(), ng.end() - 1);
      // The history of a stored n-gram is always a scoring state.
      const int src = model.StateFor(history);
      if (w == model.Eos()) {
        fst.SetFinal(src, Weight(-e.logprob));
        continue;
      }
      int dst = 0;
      model.Score(src, w, &dst);
      fst.AddArc(src, Arc(w, w, Weight(-e.logprob), dst));
    }
  }
  for (int s = 1; s < model.NumStates(); ++s) {
    const Ngram& history = model.StateHistory(s);
    std::span<const Label> lower(history.begin() + 1, history.end());
    const int dst = model.StateFor(lower);
    fst.AddArc(s, Arc(kEpsilon, kEpsilon, Weight(-model.LogBackoff(history)),
                      dst));
  }
  ArcSort(&fst);
  return fst;
}

void WriteArpa(const NgramModel& model, std::ostream& out) {
  const SymbolTable& vocab = model.Vocab();
  out << "\\data\\\n";
  for (int k = 1; k <= model.Order(); ++k) {
    out << "ngram " << k << "=" << model.Entries(k).size() << "\n";
  }
  for (int k = 1; k <= model.Order(); ++k) {
    out << "\n\\" << k << "-grams:\n";
    for (const auto& [ng, e] : model.Entries(k)) {
      out << FormatLog10(e.logprob) << '\t';
      for (size_t i = 0; i < ng.size(); ++i) {
        if (i > 0) out << ' ';
        out << vocab.Symbol(ng[i]);
      }
      if (e.backoff) out << '\t' << FormatLog10(*e.backoff);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

void WriteArpaFile(const NgramModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  WriteArpa(model, out);
}

NgramModel ReadArpa(std::istream& in) {
  struct Line {
    double logprob;
    std::vector<std::string> words;
    std::optional<double> backoff;
  };
  std::vector<size_t> declared;
  std::vector<std::vector<Line>> sections;
  std::string line;
  int section = -1;  // -1 before \data\, 0 in \data\, k in \k-grams:
  bool ended = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = NormalizeWhitespace(line);
    if (trimmed.empty()) continue;
    if (trimmed == "\\data\\") {
      section = 0;
      continue;
    }
    if (trimmed == "\\end\\") {
      ended = true;
      break;
    }
    if (trimmed.front() == '\\' && trimmed.size() > 8 &&
        trimmed.substr(trimmed.size() - 7) == "-grams:") {
      section = static_cast<int>(
          ParseInt(trimmed.substr(1, trimmed.size() - 8)));
      if (section < 1 || section > static_cast<int>(declared.size())) {
        throw Error(ErrorKind::kIo, "undeclared ARPA section: " + trimmed);
      }
      continue;
    }
    if (section == 0) {
      if (trimmed.rfind("ngram ", 0) != 0) {
        throw Error(ErrorKind::kIo, "bad ARPA header line: " + trimmed);
      }
      auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorKind::kIo, "bad ARPA header line: " + trimmed);
      }
      size_t k = static_cast<size_t>(ParseInt(trimmed.substr(6, eq - 6)));
      if (k != declared.size() + 1) {
        throw Error(ErrorKind::kIo, "ARPA orders must be listed in sequence");
      }
      declared.push_back(static_cast<size_t>(ParseInt(trimmed.substr(eq + 1))));
      sections.resize(declared.size());
      continue;
    }
    if (section < 1) throw Error(ErrorKind::kIo, "text outside ARPA sections");
    Line entry;
    std::vector<std::string> fields = SplitTabs(line);
    if (fields.size() >= 2) {
      entry.logprob = ParseLog10(fields[0]);
      entry.words = SplitWhitespace(fields[1]);
      if (fields.size() >= 3 && !fields[2].empty()) {
        entry.backoff = ParseLog10(fields[2]);
      }
    } else {
      fields = SplitWhitespace(line);
      entry.logprob = ParseLog10(fields[0]);
      entry.words.assign(fields.begin() + 1,
                         fields.begin() + std::min<std::ptrdiff_t>(
                                              1 + section,
                                              static_cast<std::ptrdiff_t>(
                                                  fields.size())));
      if (fields.size() == static_cast<size_t>(section) + 2) {
        entry.backoff = ParseLog10(fields.back());
      }
    }
    if (entry.words.size() != static_cast<size_t>(section)) {
      throw Error(ErrorKind::kIo, "ARPA entry has wrong order: " + line);
    }
    sections[section - 1].push_back(std::move(entry));
  }
  if (!ended) throw Error(ErrorKind::kIo, "ARPA file lacks \\end\\");
  if (declared.empty()) throw Error(ErrorKind::kIo, "ARPA file lacks \\data\\");
  for (size_t k = 0; k < declared.size(); ++k) {
    if (sections[k].size() != declared[k]) {
      throw Error(ErrorKind::kIo, "ARPA section " + std::to_string(k + 1) +
                                      " count does not match header");
    }
  }
  auto vocab = std::make_shared<SymbolTable>();
  for (const Line& entry : sections[0]) vocab->AddSymbol(entry.words[0]);
  NgramModel model(static_cast<int>(declared.size()), vocab);
  for (const auto& lines : sections) {
    for (const Line& entry : lines) {
      Ngram ng;
      for (const auto& w : entry.words) {
        Label id = vocab->Find(w);
        if (id == kNoLabel) {
          throw Error(ErrorKind::kIo, "ARPA token without unigram: " + w);
        }
        ng.push_back(id);
      }
      model.SetEntry(ng, entry.logprob);
      if (entry.backoff) model.SetBackoff(ng, *entry.backoff);
    }
  }
  model.Finalize(/*renormalize=*/false);
  return model;
}

NgramModel ReadArpaFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return ReadArpa(in);
}

PriorTable PriorTable::Estimate(
    const std::vector<std::vector<std::string>>& piece_corpus,
    const std::vector<std::string>& inventory) {
  if (piece_corpus.empty()) {
    throw ConfigError("prior corpus is empty", "corpus");
  }
  std::set<std::string> known(inventory.begin(), inventory.end());
  std::vector<TrainingSentence> corpus;
  for (const auto& pieces : piece_corpus) {
    for (const auto& p : pieces) {
      if (!known.count(p)) {
        throw ConfigError("prior corpus piece not in inventory: " + p,
                          "corpus");
      }
    }
    corpus.push_back({pieces, 1.0, {}});
  }
  NgramTrainOptions options;
  options.order = 1;
  options.sentence_boundaries = false;
  options.include_unk = false;
  options.vocabulary = inventory;
  NgramModel model = TrainNgram(corpus, options);
  PriorTable table;
  for (const auto& piece : inventory) {
    table.costs_[piece] = -model.LogProb({}, model.Vocab().Find(piece));
  }
  return table;
}

double PriorTable::Cost(const std::string& piece) const {
  auto it = costs_.find(piece);
  if (it == costs_.end()) {
    throw ConfigError("prior has no entry for piece " + piece, "prior");
  }
  return it->second;
}

void PriorTable::Write(std::ostream& out) const {
  for (const auto& [piece, cost] : costs_) {
    out << piece << '\t' << FormatWeight(cost) << '\n';
  }
}

PriorTable PriorTable::Read(std::istream& in) {
  PriorTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = SplitTabs(line);
    if (fields.size() != 2) {
      throw Error(ErrorKind::kIo, "bad prior line: " + line);
    }
    double cost = ParseDouble(fields[1]);
    if (!std::isfinite(cost) || cost < 0.0) {
      throw Error(ErrorKind::kIo, "prior cost must be finite and >= 0");
    }
    table.costs_[fields[0]] = cost;
  }
  return table;
}

std::vector<std::pair<double, int>> PriorHistogram(const PriorTable& prior,
                                                   double bin_width) {
  if (!(bin_width > 0.0)) {
    throw ConfigError("histogram bin width must be > 0", "bin_width");
  }
  std::map<long long, int> bins;
  for (const auto& [piece, cost] : prior.Costs()) {
    ++bins[static_cast<long long>(std::floor(cost / bin_width))];
  }
  std::vector<std::pair<double, int>> out;
  for (const auto& [bin, count] : bins) {
    out.emplace_back(static_cast<double>(bin) * bin_width, count);
  }
  return out;
}

void WriteHistogram(const std::vector<std::pair<double, int>>& histogram,
                    std::ostream& out) {
  for (const auto& [low, count] : histogram) {
    out << FormatWeight(low) << '\t' << count << '\n';
  }
}

}  // namespace ctcbias
