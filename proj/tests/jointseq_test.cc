// jointseq_test.cc
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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"
#include "ctcbias/tokenize.h"

namespace ctcbias {
namespace {

TrainingPair Pair(const std::string& in, const std::string& out,
                  double weight = 1.0) {
  return {"", SplitWhitespace(in), SplitWhitespace(out), weight};
}

// Every segmentation of `n` inputs into `m` consecutive chunks of 1..max_p
// symbols, as chunk lengths.
std::vector<std::vector<size_t>> Compositions(size_t n, size_t m,
                                              size_t max_p) {
  std::vector<std::vector<size_t>> out;
  std::vector<size_t> cur;
  std::function<void(size_t)> rec = [&](size_t left) {
    if (cur.size() == m) {
      if (left == 0) out.push_back(cur);
      return;
    }
    for (size_t l = 1; l <= max_p && l <= left; ++l) {
      cur.push_back(l);
      rec(left - l);
      cur.pop_back();
    }
  };
  rec(n);
  return out;
}

std::string Sym(const TrainingPair& p, size_t begin, size_t len, size_t j) {
  PairUnit u{{p.input.begin() + static_cast<std::ptrdiff_t>(begin),
              p.input.begin() + static_cast<std::ptrdiff_t>(begin + len)},
             p.output[j]};
  return u.Symbol();
}

// Oracle: posterior-weighted unit counts by enumerating every segmentation.
std::map<std::string, double> BruteForceCounts(
    const std::vector<TrainingPair>& pairs,
    const std::map<std::string, double>& logprobs, int max_p) {
  std::map<std::string, double> counts;
  for (const auto& p : pairs) {
    std::vector<std::pair<double, std::vector<std::string>>> segs;
    double z = 0.0;
    for (const auto& comp :
         Compositions(p.input.size(), p.output.size(), max_p)) {
      double prob = 1.0;
      std::vector<std::string> units;
      size_t pos = 0;
      for (size_t j = 0; j < comp.size(); ++j) {
        std::string s = Sym(p, pos, comp[j], j);
        auto it = logprobs.find(s);
        prob *= it == logprobs.end() ? 0.0 : std::exp(it->second);
        units.push_back(s);
        pos += comp[j];
      }
      z += prob;
      segs.emplace_back(prob, units);
    }
    if (z == 0.0) continue;
    for (const auto& [prob, units] : segs) {
      for (const auto& u : units) counts[u] += p.weight * prob / z;
    }
  }
  return counts;
}

TEST(AlignTest, ForcedSingleUnit) {
  AlignResult r = Align({Pair("k ay t", "\xE2\x96\x81kite")}, AlignOptions());
  ASSERT_EQ(r.aligned.size(), 1u);
  ASSERT_EQ(r.aligned[0].units.size(), 1u);
  EXPECT_EQ(r.aligned[0].units[0].Symbol(), "k|ay|t}\xE2\x96\x81kite");
}

TEST(AlignTest, ForcedOneToOne) {
  AlignOptions opt;
  opt.max_input = 1;
  AlignResult r = Align({Pair("a b", "x y")}, opt);
  ASSERT_EQ(r.aligned.size(), 1u);
  ASSERT_EQ(r.aligned[0].units.size(), 2u);
  EXPECT_EQ(r.aligned[0].units[0].Symbol(), "a}x");
  EXPECT_EQ(r.aligned[0].units[1].Symbol(), "b}y");
}

TEST(AlignTest, UnalignablePairsSkipped) {
  AlignOptions opt;
  opt.max_input = 2;
  AlignResult r = Align({Pair("a", "x y"), Pair("a b c d e", "x y"),
                         Pair("a b", "x")},
                        opt);
  EXPECT_EQ(r.skipped, 2u);
  EXPECT_EQ(r.aligned.size(), 1u);
  EXPECT_THROW(Align({Pair("a", "x")}, AlignOptions{0, 10, 1e-6}),
               ConfigError);
}

TEST(AlignTest, ExpectedCountsMatchEnumeration) {
  std::mt19937 rng(1);
  std::uniform_int_distribution<int> sym(0, 2);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < 4; ++i) {
      std::uniform_int_distribution<int> n_in(1, 6);
      int n = n_in(rng);
      std::uniform_int_distribution<int> n_out(1, n);
      int m = n_out(rng);
      TrainingPair p;
      for (int k = 0; k < n; ++k) p.input.push_back("p" + std::to_string(sym(rng)));
      for (int k = 0; k < m; ++k) p.output.push_back("w" + std::to_string(sym(rng)));
      p.weight = 1.0 + i;
      pairs.push_back(p);
    }
    const int max_p = 1 + trial % 4;
    std::map<std::string, double> logprobs;
    for (const auto& p : pairs) {
      for (const auto& unit : CandidateUnits(p, max_p)) {
        logprobs[unit.Symbol()] = std::log(u(rng));
      }
    }
    ExpectedCounts got = ComputeExpectedCounts(pairs, logprobs, max_p);
    auto want = BruteForceCounts(pairs, logprobs, max_p);
    ASSERT_EQ(got.counts.size(), want.size());
    for (const auto& [s, c] : want) {
      EXPECT_NEAR(got.counts[s], c, 1e-9) << s;
    }
  }
}

TEST(AlignTest, RecoversPlantedSegmentations) {
  // Planted units: s|h->SH, k->K, ae->A, t->T, ow->O, p->P, ch|r->CR.
  std::vector<TrainingPair> pairs{
      Pair("s h ow", "SH O"),   Pair("k ae t", "K A T"),
      Pair("s h ae", "SH A"),   Pair("p ow", "P O"),
      Pair("s h ow p", "SH O P"), Pair("k ow t", "K O T"),
      Pair("ch r ow", "CR O"),  Pair("ch r ae t", "CR A T"),
      Pair("t ow", "T O"),      Pair("p ae ch r", "P A CR")};
  AlignOptions opt;
  opt.max_input = 3;
  AlignResult r = Align(pairs, opt);
  ASSERT_EQ(r.aligned.size(), pairs.size());
  std::set<std::string> planted{"s|h}SH", "k}K", "ae}A", "t}T",
                                "ow}O",   "p}P", "ch|r}CR"};
  for (const auto& seq : r.aligned) {
    for (const auto& unit : seq.units) {
      EXPECT_TRUE(planted.count(unit.Symbol())) << unit.Symbol();
    }
  }
  for (size_t i = 1; i < r.log_likelihoods.size(); ++i) {
    EXPECT_GE(r.log_likelihoods[i], r.log_likelihoods[i - 1] - 1e-12);
  }
}

TEST(AlignTest, LogLikelihoodNondecreasing) {
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> sym(0, 3);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 40; ++i) {
    TrainingPair p;
    int n = 2 + i % 5;
    for (int k = 0; k < n; ++k) p.input.push_back("p" + std::to_string(sym(rng)));
    for (int k = 0; k < (n + 1) / 2; ++k) {
      p.output.push_back("w" + std::to_string(sym(rng)));
    }
    pairs.push_back(p);
  }
  AlignOptions opt;
  opt.max_iters = 20;
  opt.tol = 0.0;
  AlignResult r = Align(pairs, opt);
  ASSERT_GE(r.log_likelihoods.size(), 3u);
  for (size_t i = 1; i < r.log_likelihoods.size(); ++i) {
    EXPECT_GE(r.log_likelihoods[i], r.log_likelihoods[i - 1] - 1e-12);
  }
}

TEST(TrainJointTest, WeightLinearity) {
  std::vector<AlignedSequence> twice{{{{{"a"}, "x"}, {{"b", "c"}, "y"}}, 1.0},
                                     {{{{"a"}, "x"}, {{"b", "c"}, "y"}}, 1.0}};
  std::vector<AlignedSequence> once{{{{{"a"}, "x"}, {{"b", "c"}, "y"}}, 2.0}};
  std::ostringstream a, b;
  WriteJointModel(TrainJoint(twice, 3), a);
  WriteJointModel(TrainJoint(once, 3), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(TrainJointTest, WittenBellUnigramByHand) {
  // Counts u1:3, u2:1, </s>:4; N = 8, T = 3 over {</s>, u1, u2}:
  // P(u1) = (8/11)(3/8) + (3/11)/3 = 4/11, P(u2) = 2/11, P(</s>) = 5/11.
  JointModel m = TrainJoint({{{{{"a"}, "x"}}, 3.0}, {{{{"b"}, "y"}}, 1.0}}, 1);
  const auto& lm = m.Lm();
  EXPECT_NEAR(std::exp(lm.LogProb({}, lm.Vocab().Find("a}x"))), 4.0 / 11, 1e-12);
  EXPECT_NEAR(std::exp(lm.LogProb({}, lm.Vocab().Find("b}y"))), 2.0 / 11, 1e-12);
  EXPECT_NEAR(std::exp(lm.LogProb({}, lm.Eos())), 5.0 / 11, 1e-12);
  EXPECT_NEAR(lm.TotalProbability({}), 1.0, 1e-6);
  EXPECT_THROW(TrainJoint({}, 2), ConfigError);
}

// Order-1 joint model with the given unit unigram costs; the rest of the
// mass goes to </s>.
JointModel UnigramJoint(const std::vector<std::pair<std::string, double>>& units) {
  auto vocab = std::make_shared<SymbolTable>();
  vocab->AddSymbol("<s>");
  vocab->AddSymbol("</s>");
  for (const auto& [s, c] : units) vocab->AddSymbol(s);
  NgramModel lm(1, vocab);
  double mass = 0.0;
  for (const auto& [s, c] : units) {
    lm.SetEntry({vocab->Find(s)}, -c);
    mass += std::exp(-c);
  }
  lm.SetEntry({vocab->Find("<s>")}, -std::numeric_limits<double>::infinity());
  lm.SetEntry({vocab->Find("</s>")}, std::log(1.0 - mass));
  lm.Finalize();
  return JointModel(std::move(lm));
}

TEST(PruneUnitsTest, WorkedBeamExample) {
  JointModel m = UnigramJoint(
      {{"k|ay}A", 1.0}, {"k|ay}B", 3.5}, {"k|ay}C", 4.2}, {"x}X", 2.0}});
  JointModel p = PruneUnits(m, 3.0);
  const SymbolTable& v = p.Lm().Vocab();
  EXPECT_TRUE(v.Contains("k|ay}A"));
  EXPECT_TRUE(v.Contains("k|ay}B"));
  EXPECT_FALSE(v.Contains("k|ay}C"));
  EXPECT_TRUE(v.Contains("x}X"));
  EXPECT_NEAR(p.UnigramCost(v.Find("k|ay}B")) - p.UnigramCost(v.Find("k|ay}A")),
              2.5, 1e-9);
  EXPECT_NEAR(p.Lm().TotalProbability({}), 1.0, 1e-6);
}

TEST(PruneUnitsTest, BeamBoundaries) {
  JointModel m = UnigramJoint({{"k|ay}A", 1.0}, {"k|ay}B", 1.0},
                               {"k|ay}C", 4.2}, {"x}X", 2.0}});
  JointModel zero = PruneUnits(m, 0.0);
  EXPECT_EQ(zero.UnitsFor("k|ay")->size(), 2u);  // exact tie kept
  EXPECT_EQ(zero.UnitsFor("x")->size(), 1u);
  std::ostringstream a, b;
  WriteJointModel(m, a);
  WriteJointModel(PruneUnits(m, std::numeric_limits<double>::infinity()), b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_THROW(PruneUnits(m, -1.0), ConfigError);
}

std::vector<TrainingPair> RandomPairs(std::mt19937& rng, int count,
                                      int alphabet) {
  std::uniform_int_distribution<int> sym(0, alphabet - 1);
  std::uniform_int_distribution<int> len(1, 5);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < count; ++i) {
    TrainingPair p;
    int n = len(rng);
    for (int k = 0; k < n; ++k) p.input.push_back("p" + std::to_string(sym(rng)));
    std::uniform_int_distribution<int> m(1, n);
    int outs = m(rng);
    for (int k = 0; k < outs; ++k) {
      p.output.push_back("w" + std::to_string(sym(rng)));
    }
    p.weight = 1.0 + (i % 3);
    pairs.push_back(p);
  }
  return pairs;
}

TEST(PruneUnitsTest, PostConditionOnTrainedModels) {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    AlignOptions opt;
    opt.max_input = 2;
    AlignResult r = Align(RandomPairs(rng, 30, 3), opt);
    JointModel m = TrainJoint(r.aligned, 3);
    JointModel p = PruneUnits(m, 3.0);
    const SymbolTable& v = p.Lm().Vocab();
    std::map<std::string, std::vector<double>> costs;
    for (Label id = 1; id < static_cast<Label>(v.Size()); ++id) {
      const std::string& s = v.Symbol(id);
      if (s == "<s>" || s == "</s>") continue;
      PairUnit u = PairUnit::Parse(s);
      costs[Join(u.input, "|")].push_back(p.UnigramCost(id));
    }
    for (const auto& [key, cs] : costs) {
      double best = *std::min_element(cs.begin(), cs.end());
      for (double c : cs) EXPECT_LE(c - best, 3.0 + 1e-9) << key;
    }
    for (int k = 0; k < p.Lm().Order(); ++k) {
      EXPECT_NEAR(p.Lm().TotalProbability({}), 1.0, 1e-6);
    }
    for (const auto& [ng, e] : p.Lm().Entries(2)) {
      EXPECT_NEAR(p.Lm().TotalProbability(ng), 1.0, 1e-6);
    }
  }
}

// Oracle: every segmentation x every unit choice, scored with the model's
// sentence probability; best cost per output sequence, sorted.
std::vector<Transduction> BruteForceNbest(const JointModel& m,
                                          const std::vector<std::string>& in) {
  std::map<std::vector<std::string>, double> best;
  std::vector<Label> units;
  std::vector<std::string> outs;
  std::function<void(size_t)> rec = [&](size_t pos) {
    if (pos == in.size()) {
      double cost = -m.Lm().SentenceLogProb(units);
      if (std::isinf(cost)) return;
      auto [it, inserted] = best.emplace(outs, cost);
      if (!inserted) it->second = std::min(it->second, cost);
      return;
    }
    std::string key;
    for (size_t l = 1; pos + l <= in.size(); ++l) {
      if (l > 1) key += "|";
      key += in[pos + l - 1];
      const auto* cands = m.UnitsFor(key);
      if (!cands) continue;
      for (const auto& u : *cands) {
        units.push_back(u.label);
        outs.push_back(u.output);
        rec(pos + l);
        units.pop_back();
        outs.pop_back();
      }
    }
  };
  rec(0);
  std::vector<Transduction> out;
  for (const auto& [o, c] : best) out.push_back({o, c});
  std::stable_sort(out.begin(), out.end(),
                   [](const Transduction& a, const Transduction& b) {
                     return a.cost < b.cost;
                   });
  return out;
}

TEST(NbestTest, ForcedChain) {
  JointModel m = TrainJoint({{{{{"b", "aa"}, "\xE2\x96\x81" "ba"}, {{"b"}, "b"}},
                              1.0}},
                            2);
  auto r = Nbest(m, {"b", "aa", "b"}, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].output,
            (std::vector<std::string>{"\xE2\x96\x81" "ba", "b"}));
}

TEST(NbestTest, PlantedAmbiguityOrdered) {
  // Two units for the same input with costs 1.0 and 2.0.
  JointModel m = UnigramJoint({{"b|aa|b}X", 1.0}, {"b|aa|b}Y", 2.0}});
  auto r = Nbest(m, {"b", "aa", "b"}, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].output, (std::vector<std::string>{"X"}));
  EXPECT_EQ(r[1].output, (std::vector<std::string>{"Y"}));
  EXPECT_NEAR(r[1].cost - r[0].cost, 1.0, 1e-12);
}

TEST(NbestTest, MatchesExhaustiveEnumeration) {
  std::mt19937 rng(27);
  std::uniform_int_distribution<int> sym(0, 2);
  std::uniform_int_distribution<int> len(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    AlignOptions opt;
    opt.max_input = 2;
    AlignResult r = Align(RandomPairs(rng, 12, 3), opt);
    JointModel m = TrainJoint(r.aligned, 1 + trial % 3);
    for (int q = 0; q < 3; ++q) {
      std::vector<std::string> in;
      int n = len(rng);
      for (int k = 0; k < n; ++k) in.push_back("p" + std::to_string(sym(rng)));
      auto want = BruteForceNbest(m, in);
      const size_t n_best = 5;
      std::string diag;
      auto got = Nbest(m, in, n_best, &diag);
      ASSERT_EQ(got.size(), std::min(n_best, want.size())) << diag;
      std::map<std::vector<std::string>, double> oracle;
      for (const auto& t : want) oracle[t.output] = t.cost;
      for (size_t i = 0; i < got.size(); ++i) {
        EXPECT_NEAR(got[i].cost, want[i].cost, 1e-9);
        ASSERT_TRUE(oracle.count(got[i].output));
        EXPECT_NEAR(got[i].cost, oracle[got[i].output], 1e-9);
        if (i > 0) {
          EXPECT_GE(got[i].cost, got[i - 1].cost);
          EXPECT_NE(got[i].output, got[i - 1].output);
        }
      }
    }
  }
}

TEST(NbestTest, CoverageDiagnostic) {
  JointModel m = UnigramJoint({{"a}X", 1.0}});
  std::string diag;
  EXPECT_TRUE(Nbest(m, {"a", "zz", "a"}, 3, &diag).empty());
  EXPECT_NE(diag.find("zz"), std::string::npos);
  EXPECT_THROW(Nbest(m, {"a"}, 0), ConfigError);
}

TEST(JointIoTest, ArpaDialectRoundTrip) {
  std::mt19937 rng(33);
  AlignResult r = Align(RandomPairs(rng, 20, 3), AlignOptions());
  JointModel m = TrainJoint(r.aligned, 3);
  std::ostringstream a;
  WriteJointModel(m, a);
  EXPECT_NE(a.str().find("}"), std::string::npos);
  std::istringstream in(a.str());
  JointModel back = ReadJointModel(in);
  std::ostringstream b;
  WriteJointModel(back, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(back.NumUnits(), m.NumUnits());
  EXPECT_EQ(back.MaxInput(), m.MaxInput());
}

TEST(JointIoTest, TrainingPairsTsv) {
  auto wp = WordpieceModel::CharacterModel({"a", "b", "o"});
  std::istringstream in(
      "bob\t3\tb aa b\n"
      "ab\t1.5\tae b\t\xE2\x96\x81" "a b\n");
  auto pairs = ReadTrainingPairs(in, &wp);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].output,
            (std::vector<std::string>{"\xE2\x96\x81" "b", "o", "b"}));
  EXPECT_EQ(pairs[0].weight, 3.0);
  EXPECT_EQ(pairs[1].input, (std::vector<std::string>{"ae", "b"}));
  std::istringstream bad("word\t1\n");
  EXPECT_THROW(ReadTrainingPairs(bad, &wp), Error);
}

}  // namespace
}  // namespace ctcbias
