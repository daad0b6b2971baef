// tokenize_test.cc
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

#include "ctcbias/tokenize.h"

#include <gtest/gtest.h>

#include <random>

#include "ctcbias/errors.h"
#include "ctcbias/fst_ops.h"
#include "fst_oracle.h"

namespace ctcbias {
namespace {

const std::string kB(kWordBoundary);

std::vector<std::string> Strings(std::initializer_list<const char*> items) {
  std::vector<std::string> out;
  for (const char* s : items) out.emplace_back(s);
  return out;
}

// Oracle: scans the inventory list at every position and keeps the longest
// piece that is a prefix of the remaining text (ASCII words only).
std::vector<std::string> GreedyOracle(const std::vector<std::string>& pieces,
                                      const std::string& word) {
  std::string rest = kB + word;
  std::vector<std::string> out;
  bool first = true;
  while (!rest.empty()) {
    std::string best;
    for (const auto& p : pieces) {
      bool initial = p.rfind(kB, 0) == 0;
      if (initial != first) continue;
      if (rest.rfind(p, 0) == 0 && p.size() > best.size()) best = p;
    }
    if (best.empty()) return {};
    out.push_back(best);
    rest = rest.substr(best.size());
    first = false;
  }
  return out;
}

std::string RandomWord(std::mt19937& rng, int max_len, int alphabet) {
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<int> ch(0, alphabet - 1);
  std::string w;
  int n = len(rng);
  for (int i = 0; i < n; ++i) w += static_cast<char>('a' + ch(rng));
  return w;
}

// Output label sequences of compose(acceptor(labels), fst).
std::vector<std::vector<Label>> Outputs(const Wfst& fst,
                                        const std::vector<Label>& labels) {
  Wfst composed = Compose(StringAcceptor(labels, fst.InputSymbols()), fst);
  std::vector<std::vector<Label>> out;
  for (const auto& p : testing::EnumeratePaths(composed, 4 * labels.size() + 4)) {
    out.push_back(p.output);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TEST(TokenizeTest, LongestMatchExample) {
  auto model = WordpieceModel::FromPieces(
      {kB + "an", kB + "a", "n", "na", "t"});
  EXPECT_EQ(model.Tokenize("anna"), (std::vector<std::string>{kB + "an", "na"}));
}

TEST(TokenizeTest, CharacterModel) {
  auto model = WordpieceModel::CharacterModel(Strings({"a", "b", "c"}));
  EXPECT_EQ(model.Tokenize("abc"),
            (std::vector<std::string>{kB + "a", "b", "c"}));
  EXPECT_EQ(model.NumPieces(), 6u);
}

TEST(TokenizeTest, UncoverableCharacterNamed) {
  auto model = WordpieceModel::CharacterModel(Strings({"a", "b"}));
  try {
    model.Tokenize("abz");
    FAIL() << "expected a tokenization error";
  } catch (const TokenizationError& e) {
    EXPECT_EQ(e.character(), "z");
  }
  try {
    model.Tokenize("za");
    FAIL() << "expected a tokenization error";
  } catch (const TokenizationError& e) {
    EXPECT_EQ(e.character(), "z");
  }
}

TEST(TokenizeTest, RejectsMalformedInventories) {
  EXPECT_THROW(WordpieceModel::FromPieces({}), ConfigError);
  EXPECT_THROW(WordpieceModel::FromPieces({"a", "a"}), ConfigError);
  EXPECT_THROW(WordpieceModel::FromPieces({"a" + kB}), ConfigError);
  EXPECT_THROW(WordpieceModel::FromPieces({""}), ConfigError);
  EXPECT_THROW(WordpieceModel::FromPieces({"<blk>"}), ConfigError);
}

TEST(TokenizeTest, SymbolTableLayout) {
  auto model = WordpieceModel::FromPieces({kB + "a", "b"});
  const SymbolTable& syms = *model.Symbols();
  EXPECT_EQ(syms.Symbol(0), "<eps>");
  EXPECT_EQ(model.Blank(), 1);
  EXPECT_EQ(syms.Find(kB + "a"), 2);
  EXPECT_EQ(syms.Find("b"), 3);
}

TEST(TokenizeTest, RandomWordsMatchGreedyOracle) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> letters;
    for (char c = 'a'; c < 'f'; ++c) letters.emplace_back(1, c);
    std::set<std::string> inventory;
    for (const auto& c : letters) {
      inventory.insert(kB + c);
      inventory.insert(c);
    }
    for (int i = 0; i < 15; ++i) {
      std::string p = RandomWord(rng, 4, 5);
      inventory.insert(i % 2 ? p : kB + p);
    }
    std::vector<std::string> pieces(inventory.begin(), inventory.end());
    std::shuffle(pieces.begin(), pieces.end(), rng);
    auto model = WordpieceModel::FromPieces(pieces);
    for (int w = 0; w < 20; ++w) {
      std::string word = RandomWord(rng, 9, 5);
      auto got = model.Tokenize(word);
      EXPECT_EQ(got, GreedyOracle(pieces, word)) << word;
      std::string joined;
      for (const auto& p : got) joined += p;
      EXPECT_EQ(joined, kB + word);
    }
  }
}

PriorTable FlatPrior(const WordpieceModel& model, double cost) {
  PriorTable prior;
  for (const auto& p : model.Pieces()) prior.Set(p, cost);
  return prior;
}

TEST(BuildTTest, CollapsesRepeatsAndDeletesBlanks) {
  auto model = WordpieceModel::FromPieces({kB + "a", "b"});
  Wfst t = BuildT(model, nullptr, NormConfig::Defaults(false), false);
  Label a = model.Id(kB + "a");
  Label b = model.Id("b");
  Label blk = model.Blank();
  EXPECT_EQ(Outputs(t, {a, a, blk, b}),
            (std::vector<std::vector<Label>>{{a, b}}));
  EXPECT_EQ(Outputs(t, {a, blk, a}), (std::vector<std::vector<Label>>{{a, a}}));
  EXPECT_EQ(Outputs(t, {blk, blk}), (std::vector<std::vector<Label>>{{}}));
}

TEST(BuildTTest, RandomNoiselessExpansionsRecoverPieces) {
  std::mt19937 rng(23);
  auto model = WordpieceModel::CharacterModel(Strings({"a", "b", "c", "d"}));
  Wfst t = BuildT(model, nullptr, NormConfig::Defaults(false), false);
  std::vector<Label> ids = model.PieceIds();
  std::uniform_int_distribution<size_t> pick(0, ids.size() - 1);
  std::uniform_int_distribution<int> reps(1, 3);
  std::uniform_int_distribution<int> blanks(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Label> pieces;
    std::vector<Label> frames;
    int n = 1 + trial % 5;
    for (int i = 0; i < n; ++i) {
      Label p = ids[pick(rng)];
      bool repeat = !pieces.empty() && pieces.back() == p;
      int nb = blanks(rng);
      if (repeat && nb == 0) nb = 1;  // a repeat needs a separating blank
      for (int j = 0; j < nb; ++j) frames.push_back(model.Blank());
      for (int j = reps(rng); j > 0; --j) frames.push_back(p);
      pieces.push_back(p);
    }
    EXPECT_EQ(Outputs(t, frames), (std::vector<std::vector<Label>>{pieces}));
  }
}

// Weight of the arc from `src` on `ilabel` (the first match).
double ArcWeight(const Wfst& t, StateId src, Label ilabel) {
  for (const Arc& arc : t.Arcs(src)) {
    if (arc.ilabel == ilabel) return arc.weight.Value();
  }
  ADD_FAILURE() << "no arc";
  return 0.0;
}

TEST(BuildTTest, DefaultNormalizationArithmetic) {
  auto model = WordpieceModel::FromPieces({kB + "x", "y", "z"});
  PriorTable prior;
  prior.Set(kB + "x", 25.0);
  prior.Set("y", 10.0);
  prior.Set("z", 0.0);
  NormConfig cfg;  // scale 0.8, clip 20, blank -3
  Wfst t = BuildT(model, &prior, cfg, true);
  for (StateId s = 0; s < static_cast<StateId>(t.NumStates()); ++s) {
    EXPECT_EQ(ArcWeight(t, s, model.Blank()), -3.0);
    for (const Arc& arc : t.Arcs(s)) {
      if (arc.ilabel == model.Blank()) continue;
      if (arc.olabel == kEpsilon) {
        EXPECT_EQ(arc.nextstate, s);  // self-loops are silent and free
        EXPECT_EQ(arc.weight.Value(), 0.0);
      } else if (arc.ilabel == model.Id(kB + "x")) {
        EXPECT_DOUBLE_EQ(arc.weight.Value(), -16.0);
      } else if (arc.ilabel == model.Id("y")) {
        EXPECT_DOUBLE_EQ(arc.weight.Value(), -8.0);
      } else {
        EXPECT_EQ(arc.weight.Value(), 0.0);
      }
    }
  }
}

TEST(BuildTTest, WithoutNormalizationOnlyBlankIsWeighted) {
  auto model = WordpieceModel::FromPieces({kB + "x", "y"});
  PriorTable prior = FlatPrior(model, 12.0);
  Wfst t = BuildT(model, &prior, NormConfig::Defaults(false), false);
  for (StateId s = 0; s < static_cast<StateId>(t.NumStates()); ++s) {
    for (const Arc& arc : t.Arcs(s)) {
      EXPECT_EQ(arc.weight.Value(), arc.ilabel == model.Blank() ? 3.0 : 0.0);
    }
  }
}

TEST(BuildTTest, RandomConfigsAndMonotonicity) {
  std::mt19937 rng(31);
  auto model = WordpieceModel::CharacterModel(Strings({"a", "b", "c"}));
  std::uniform_real_distribution<double> u(0.0, 30.0);
  for (int trial = 0; trial < 20; ++trial) {
    NormConfig cfg;
    cfg.scale = u(rng) / 20.0;
    cfg.clip = u(rng);
    cfg.blank_cost = u(rng) - 15.0;
    PriorTable prior;
    for (const auto& p : model.Pieces()) prior.Set(p, u(rng));
    Wfst t = BuildT(model, &prior, cfg, true);
    for (const Arc& arc : t.Arcs(0)) {
      if (arc.ilabel == model.Blank()) {
        EXPECT_EQ(arc.weight.Value(), cfg.blank_cost);
        continue;
      }
      double cost = prior.Cost(model.Symbols()->Symbol(arc.ilabel));
      EXPECT_EQ(arc.weight.Value(), -(cfg.scale * std::min(cost, cfg.clip)));
      EXPECT_GE(arc.weight.Value(), -cfg.scale * cfg.clip);
    }
    // Higher prior probability (lower cost) never yields a larger boost.
    for (const Arc& x : t.Arcs(0)) {
      for (const Arc& y : t.Arcs(0)) {
        if (x.ilabel == model.Blank() || y.ilabel == model.Blank()) continue;
        double cx = prior.Cost(model.Symbols()->Symbol(x.ilabel));
        double cy = prior.Cost(model.Symbols()->Symbol(y.ilabel));
        if (cx <= cy) {
          EXPECT_GE(x.weight.Value(), y.weight.Value());
        }
      }
    }
  }
}

TEST(BuildTTest, MissingPriorIsConfigError) {
  auto model = WordpieceModel::FromPieces({kB + "x", "y"});
  EXPECT_THROW(BuildT(model, nullptr, NormConfig(), true), ConfigError);
  PriorTable partial;
  partial.Set(kB + "x", 1.0);
  EXPECT_THROW(BuildT(model, &partial, NormConfig(), true), ConfigError);
  NormConfig bad;
  bad.clip = -1.0;
  EXPECT_THROW(BuildT(model, nullptr, bad, false), ConfigError);
}

TEST(BuildLTest, SingleWord) {
  auto model = WordpieceModel::FromPieces({kB + "call", kB + "c", "a", "l"});
  Wfst l = BuildL(model, {"call"}, {});
  Label call = l.OutputSymbols()->Find("call");
  EXPECT_EQ(Outputs(l, {model.Id(kB + "call")}),
            (std::vector<std::vector<Label>>{{call}}));
}

TEST(BuildLTest, ClassLoopAcceptsAnyPieces) {
  std::mt19937 rng(41);
  auto model = WordpieceModel::CharacterModel(Strings({"a", "b", "c"}));
  Wfst l = BuildL(model, {"ab"}, {"@CONTACT"});
  const auto& osyms = *l.OutputSymbols();
  Label entry = osyms.Find("@CONTACT");
  Label exit = osyms.Find(ClassExitSymbol("@CONTACT"));
  ASSERT_NE(entry, kNoLabel);
  ASSERT_NE(exit, kNoLabel);
  std::vector<Label> ids = model.PieceIds();
  std::uniform_int_distribution<size_t> pick(0, ids.size() - 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Label> seq;
    std::vector<Label> expected{entry};
    for (int i = 0; i <= trial % 6; ++i) {
      Label p = ids[pick(rng)];
      seq.push_back(p);
      expected.push_back(
          osyms.Find(PassThroughSymbol(model.Symbols()->Symbol(p))));
    }
    expected.push_back(exit);
    auto outs = Outputs(l, seq);
    EXPECT_NE(std::find(outs.begin(), outs.end(), expected), outs.end());
  }
}

TEST(BuildLTest, RandomLexiconRoundTrips) {
  std::mt19937 rng(43);
  std::vector<std::string> pieces;
  for (char c = 'a'; c <= 'h'; ++c) {
    pieces.push_back(kB + std::string(1, c));
    pieces.emplace_back(1, c);
  }
  for (const char* p : {"ab", "cd", "efg", "ha"}) {
    pieces.push_back(p);
    pieces.push_back(kB + p);
  }
  auto model = WordpieceModel::FromPieces(pieces);
  std::set<std::string> words;
  while (words.size() < 50) words.insert(RandomWord(rng, 6, 8));
  std::vector<std::string> lexicon(words.begin(), words.end());
  Wfst l = BuildL(model, lexicon, {});
  for (const auto& w : lexicon) {
    auto outs = Outputs(l, model.TokenizeIds(w));
    std::vector<Label> expected{l.OutputSymbols()->Find(w)};
    EXPECT_NE(std::find(outs.begin(), outs.end(), expected), outs.end()) << w;
  }
}

TEST(BuildLTest, ClassNames) {
  EXPECT_TRUE(IsClassName("@CONTACT"));
  EXPECT_TRUE(IsClassName("@APP_NAME"));
  EXPECT_FALSE(IsClassName("@contact"));
  EXPECT_FALSE(IsClassName("CONTACT"));
  EXPECT_FALSE(IsClassName("@"));
  auto model = WordpieceModel::CharacterModel(Strings({"a"}));
  EXPECT_THROW(BuildL(model, {"a"}, {"bad"}), ConfigError);
  EXPECT_THROW(BuildL(model, {"ab"}, {}), TokenizationError);
}

}  // namespace
}  // namespace ctcbias
