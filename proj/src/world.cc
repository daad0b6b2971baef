// world.cc
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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "ctcbias/errors.h"
#include "ctcbias/simulate.h"
#include "ctcbias/text_util.h"

namespace ctcbias {

void WorldSpec::Validate() const {
  if (vocab_size < 20) throw ConfigError("vocab_size must be >= 20", "vocab_size");
  if (first_names == 0) throw ConfigError("first_names must be >= 1", "first_names");
  for (auto [v, f] : {std::pair{irregular_word_rate, "irregular_word_rate"},
                      std::pair{irregular_name_rate, "irregular_name_rate"},
                      std::pair{names_missing_rate, "names_missing_rate"},
                      std::pair{carrier_rate, "carrier_rate"}}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string(f) + " must lie in [0, 1]", f);
    }
  }
  if (lm_sentences == 0) throw ConfigError("lm_sentences must be >= 1", "lm_sentences");
  if (carriers == 0) throw ConfigError("carriers must be >= 1", "carriers");
  if (pieces < 60) throw ConfigError("pieces must be >= 60", "pieces");
  if (!IsClassName(cls)) throw ConfigError("bad class name " + cls, "cls");
}

std::vector<std::string> LearnWordpieces(
    const std::map<std::string, double>& word_counts, size_t size) {
  const std::string b(kWordBoundary);
  struct Entry {
    std::vector<std::string> symbols;
    double count;
  };
  std::vector<Entry> words;
  std::set<std::string> chars;
  for (const auto& [w, c] : word_counts) {
    auto letters = Utf8Chars(w);
    if (letters.empty()) continue;
    Entry e{{}, c};
    for (size_t i = 0; i < letters.size(); ++i) {
      chars.insert(letters[i]);
      e.symbols.push_back(i == 0 ? b + letters[i] : letters[i]);
    }
    words.push_back(std::move(e));
  }
  std::vector<std::string> inventory;
  std::set<std::string> have;
  for (const auto& c : chars) {
    for (const auto& p : {b + c, c}) {
      if (have.insert(p).second) inventory.push_back(p);
    }
  }
  while (inventory.size() < size) {
    std::map<std::pair<std::string, std::string>, double> pairs;
    for (const auto& e : words) {
      for (size_t i = 0; i + 1 < e.symbols.size(); ++i) {
        pairs[{e.symbols[i], e.symbols[i + 1]}] += e.count;
      }
    }
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;  // ties: first in key order
    }
    const auto [left, right] = best->first;
    const std::string merged = left + right;
    for (auto& e : words) {
      std::vector<std::string> next;
      for (size_t i = 0; i < e.symbols.size(); ++i) {
        if (i + 1 < e.symbols.size() && e.symbols[i] == left &&
            e.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(e.symbols[i]);
        }
      }
      e.symbols = std::move(next);
    }
    if (have.insert(merged).second) inventory.push_back(merged);
  }
  return inventory;
}

namespace {

using Rng = std::mt19937_64;

double Uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

template <typename T>
const T& Pick(const std::vector<T>& v, Rng& rng) {
  return v[rng() % v.size()];
}

Pronunciation RandomPron(const SpellingRules& rules, int syllables, Rng& rng) {
  Pronunciation p;
  for (int s = 0; s < syllables; ++s) {
    if (Uniform(rng) < 0.8) p.push_back(Pick(rules.consonants, rng));
    p.push_back(Pick(rules.vowels, rng));
    if (Uniform(rng) < 0.35) p.push_back(Pick(rules.consonants, rng));
  }
  return p;
}

// Respells `count` phones with irregular alternatives allowed at their
// position; returns the regular spelling when no phone has one.
std::string IrregularSpelling(const SpellingRules& rules,
                              const Pronunciation& pron, int count, Rng& rng) {
  using P = SpellingRules::Position;
  std::vector<std::vector<std::string>> options(pron.size());
  std::vector<size_t> respellable;
  for (size_t i = 0; i < pron.size(); ++i) {
    const auto& alts = rules.spellings.at(pron[i]);
    for (size_t j = 1; j < alts.size(); ++j) {
      if (alts[j].position == P::kInitial && i != 0) continue;
      if (alts[j].position == P::kNonInitial && i == 0) continue;
      options[i].push_back(alts[j].text);
    }
    if (!options[i].empty()) respellable.push_back(i);
  }
  std::shuffle(respellable.begin(), respellable.end(), rng);
  std::vector<std::string> parts;
  for (const auto& ph : pron) parts.push_back(rules.spellings.at(ph).front().text);
  for (int k = 0; k < count && k < static_cast<int>(respellable.size()); ++k) {
    const size_t i = respellable[k];
    parts[i] = Pick(options[i], rng);
  }
  std::string out;
  for (const auto& s : parts) out += s;
  return out;
}

// Zipf-like weights 1 / (rank + 2.7).
std::discrete_distribution<size_t> Zipf(size_t n) {
  std::vector<double> w(n);
  for (size_t r = 0; r < n; ++r) w[r] = 1.0 / (static_cast<double>(r) + 2.7);
  return std::discrete_distribution<size_t>(w.begin(), w.end());
}

}  // namespace

World GenerateWorld(const WorldSpec& spec) {
  spec.Validate();
  Rng rng(spec.seed);
  const SpellingRules rules = SpellingRules::Default();
  World world;
  world.cls = spec.cls;
  std::set<std::string> spellings;
  std::set<Pronunciation> prons;

  // Vocabulary: mostly short, mostly regular words.
  struct Word {
    std::string spelling;
    Pronunciation pron;
    int syllables;
    double key;
  };
  std::vector<Word> words;
  while (words.size() < spec.vocab_size) {
    double u = Uniform(rng);
    int syl = u < 0.4 ? 1 : (u < 0.85 ? 2 : 3);
    Pronunciation pron = RandomPron(rules, syl, rng);
    std::string spelling = Uniform(rng) < spec.irregular_word_rate
                               ? IrregularSpelling(rules, pron, 1, rng)
                               : rules.Regular(pron);
    if (spelling.size() < 2 || prons.count(pron) || spellings.count(spelling)) {
      continue;
    }
    prons.insert(pron);
    spellings.insert(spelling);
    words.push_back({spelling, pron, syl, Uniform(rng)});
  }
  // Frequency rank: shorter words first.
  std::sort(words.begin(), words.end(), [](const Word& a, const Word& b) {
    return std::tie(a.syllables, a.key) < std::tie(b.syllables, b.key);
  });
  for (const auto& w : words) {
    world.vocab.push_back(w.spelling);
    world.prons[w.spelling] = w.pron;
  }

  // Names: longer, often irregular; a fraction missing from the lexicon.
  auto make_names = [&](size_t n, bool first) {
    const auto n_irr =
        static_cast<size_t>(std::lround(n * spec.irregular_name_rate));
    const auto n_missing =
        static_cast<size_t>(std::lround(n * spec.names_missing_rate));
    std::vector<bool> irr(n, false), missing(n, false);
    std::fill(irr.begin(), irr.begin() + n_irr, true);
    std::fill(missing.begin(), missing.begin() + n_missing, true);
    std::shuffle(irr.begin(), irr.end(), rng);
    std::shuffle(missing.begin(), missing.end(), rng);
    for (size_t i = 0; i < n;) {
      Pronunciation pron = RandomPron(rules, Uniform(rng) < 0.6 ? 2 : 3, rng);
      std::string regular = rules.Regular(pron);
      std::string spelling =
          irr[i] ? IrregularSpelling(rules, pron, 1 + static_cast<int>(rng() % 3), rng)
                 : regular;
      if (irr[i] && spelling == regular) continue;
      if (prons.count(pron) || spellings.count(spelling) ||
          spellings.count(regular)) {
        continue;
      }
      prons.insert(pron);
      spellings.insert(spelling);
      world.names.push_back({spelling, pron, irr[i], !missing[i], first});
      ++i;
    }
  };
  make_names(spec.first_names, true);
  make_names(spec.last_names, false);

  // Bigram-style text source: each word has a few Zipf-weighted successors.
  const size_t v = world.vocab.size();
  auto zipf = Zipf(v);
  std::vector<std::vector<size_t>> successors(v);
  for (auto& s : successors) {
    std::set<size_t> seen;
    while (s.size() < 6) {
      size_t w = zipf(rng);
      if (seen.insert(w).second) s.push_back(w);
    }
  }
  auto succ_pick = Zipf(6);
  auto sentence = [&](Rng& r) {
    std::vector<std::string> out;
    size_t w = zipf(r);
    const int len = 2 + static_cast<int>(r() % 6);
    for (int i = 0; i < len; ++i) {
      out.push_back(world.vocab[w]);
      w = successors[w][succ_pick(r)];
    }
    return out;
  };

  // Carrier phrases around the contact slot, built from frequent words.
  auto frequent = [&]() { return world.vocab[zipf(rng) % std::min<size_t>(v, 60)]; };
  std::set<std::string> seen_templates;
  while (world.templates.size() < spec.carriers) {
    std::vector<std::string> t;
    const int pre = 1 + static_cast<int>(rng() % 2);
    const int post = static_cast<int>(rng() % 3) == 0 ? 1 + static_cast<int>(rng() % 2) : 0;
    for (int i = 0; i < pre; ++i) t.push_back(frequent());
    t.push_back("{CONTACT}");
    for (int i = 0; i < post; ++i) t.push_back(frequent());
    std::string s = Join(t, " ");
    if (seen_templates.insert(s).second) world.templates.push_back(s);
  }
  auto carrier_pick = Zipf(world.templates.size());
  for (size_t i = 0; i < spec.lm_sentences; ++i) {
    if (Uniform(rng) < spec.carrier_rate) {
      std::vector<std::string> s;
      for (const auto& tok : SplitWhitespace(world.templates[carrier_pick(rng)])) {
        s.push_back(tok == "{CONTACT}" ? spec.cls : tok);
      }
      world.lm_text.push_back(std::move(s));
    } else {
      world.lm_text.push_back(sentence(rng));
    }
  }
  Rng heldout_rng(DeriveSeed(spec.seed, "heldout"));
  for (size_t i = 0; i < spec.heldout_sentences; ++i) {
    world.heldout.push_back(sentence(heldout_rng));
  }
  for (const auto& s : world.lm_text) {
    for (const auto& w : s) {
      if (w != spec.cls) world.word_counts[w] += 1.0;
    }
  }

  // Wordpieces from the acoustic-model training text: text counts, every
  // vocabulary word at least once, names once each.
  std::map<std::string, double> piece_counts;
  for (const auto& w : world.vocab) piece_counts[w] = 1.0;
  for (const auto& [w, c] : world.word_counts) piece_counts[w] += c;
  for (const auto& n : world.names) piece_counts[n.spelling] += 1.0;
  world.pieces = LearnWordpieces(piece_counts, spec.pieces);
  return world;
}

Lexicon World::PronunciationLexicon() const {
  Lexicon lex;
  for (const auto& w : vocab) lex[w].push_back(prons.at(w));
  for (const auto& n : names) {
    if (n.in_lexicon) lex[n.spelling].push_back(n.pron);
  }
  return lex;
}

std::vector<std::vector<std::string>> World::PieceCorpus(
    const WordpieceModel& wp) const {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : lm_text) {
    std::vector<std::string> pieces;
    for (const auto& w : s) {
      if (w == cls) continue;
      for (auto& p : wp.Tokenize(w)) pieces.push_back(std::move(p));
    }
    out.push_back(std::move(pieces));
  }
  return out;
}

std::vector<TrainingPair> World::P2wpPairs(const WordpieceModel& wp) const {
  std::vector<TrainingPair> out;
  for (const auto& w : vocab) {
    auto it = word_counts.find(w);
    const double freq = 1.0 + (it == word_counts.end() ? 0.0 : it->second);
    out.push_back({w, prons.at(w), wp.Tokenize(w), freq});
  }
  for (const auto& n : names) {
    if (n.in_lexicon) out.push_back({n.spelling, n.pron, wp.Tokenize(n.spelling), 1.0});
  }
  return out;
}

std::vector<TrainingPair> World::G2pPairs() const {
  std::vector<TrainingPair> out;
  for (const auto& [word, ps] : PronunciationLexicon()) {
    for (const auto& p : ps) out.push_back({word, Utf8Chars(word), p, 1.0});
  }
  return out;
}

namespace {

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

std::string FormatCount(double c) {
  if (c == std::floor(c) && std::fabs(c) < 1e15) {
    return std::to_string(static_cast<long long>(c));
  }
  return FormatWeight(c);
}

void WriteLines(const std::filesystem::path& path,
                const std::vector<std::vector<std::string>>& lines) {
  auto out = OpenOut(path);
  for (const auto& l : lines) out << Join(l, " ") << '\n';
}

std::vector<std::vector<std::string>> ReadSentences(const std::string& path) {
  std::vector<std::vector<std::string>> out;
  for (const auto& line : ReadLines(path)) {
    auto toks = SplitWhitespace(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

}  // namespace

void WriteWorldDir(const World& world, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path d(dir);
  {
    auto out = OpenOut(d / "vocab.txt");
    for (const auto& w : world.vocab) out << w << '\n';
  }
  {
    auto out = OpenOut(d / "lexicon.tsv");
    WriteLexicon(world.PronunciationLexicon(), out);
  }
  {
    auto out = OpenOut(d / "vocab_prons.tsv");
    for (const auto& w : world.vocab) out << w << '\t' << Join(world.prons.at(w), " ") << '\n';
  }
  WriteLines(d / "lm_text.txt", world.lm_text);
  WriteLines(d / "heldout.txt", world.heldout);
  {
    auto out = OpenOut(d / "templates.txt");
    out << "# class " << world.cls << '\n';
    for (const auto& t : world.templates) out << t << '\n';
  }
  {
    auto out = OpenOut(d / "names.tsv");
    for (const auto& n : world.names) {
      out << n.spelling << '\t' << Join(n.pron, " ") << '\t'
          << (n.irregular ? "irregular" : "regular") << '\t'
          << (n.in_lexicon ? "lexicon" : "missing") << '\t'
          << (n.first ? "first" : "last") << '\n';
    }
  }
  {
    auto out = OpenOut(d / "wordpieces.txt");
    for (const auto& p : world.pieces) out << p << '\n';
  }
  {
    auto out = OpenOut(d / "word_counts.tsv");
    for (const auto& [w, c] : world.word_counts) out << w << '\t' << FormatCount(c) << '\n';
  }
  const WordpieceModel wp = WordpieceModel::FromPieces(world.pieces);
  {
    auto out = OpenOut(d / "p2wp_train.tsv");
    for (const auto& p : world.P2wpPairs(wp)) {
      out << p.word << '\t' << FormatCount(p.weight) << '\t' << Join(p.input, " ")
          << '\n';
    }
  }
  {
    auto out = OpenOut(d / "g2p_train.tsv");
    for (const auto& p : world.G2pPairs()) {
      out << p.word << '\t' << FormatCount(p.weight) << '\t' << Join(p.input, " ")
          << '\t' << Join(p.output, " ") << '\n';
    }
  }
}

World ReadWorldDir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path d(dir);
  World world;
  for (const auto& line : ReadLines((d / "vocab_prons.tsv").string())) {
    auto f = SplitTabs(line);
    if (f.size() != 2) throw Error(ErrorKind::kIo, "bad vocab_prons line: " + line);
    world.vocab.push_back(f[0]);
    world.prons[f[0]] = SplitWhitespace(f[1]);
  }
  world.lm_text = ReadSentences((d / "lm_text.txt").string());
  world.heldout = ReadSentences((d / "heldout.txt").string());
  for (const auto& line : ReadLines((d / "templates.txt").string())) {
    if (line.rfind("# class ", 0) == 0) {
      world.cls = NormalizeWhitespace(line.substr(8));
    } else if (!NormalizeWhitespace(line).empty()) {
      world.templates.push_back(NormalizeWhitespace(line));
    }
  }
  for (const auto& line : ReadLines((d / "names.tsv").string())) {
    auto f = SplitTabs(line);
    if (f.size() != 5) throw Error(ErrorKind::kIo, "bad names line: " + line);
    world.names.push_back({f[0], SplitWhitespace(f[1]), f[2] == "irregular",
                           f[3] == "lexicon", f[4] == "first"});
  }
  for (const auto& line : ReadLines((d / "wordpieces.txt").string())) {
    if (!line.empty()) world.pieces.push_back(line);
  }
  for (const auto& line : ReadLines((d / "word_counts.tsv").string())) {
    auto f = SplitTabs(line);
    if (f.size() != 2) throw Error(ErrorKind::kIo, "bad word_counts line: " + line);
    world.word_counts[f[0]] = ParseDouble(f[1]);
  }
  return world;
}

}  // namespace ctcbias
