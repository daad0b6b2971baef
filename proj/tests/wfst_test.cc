// wfst_test.cc
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

#include <random>
#include <sstream>

#include "ctcbias/errors.h"
#include "ctcbias/fst_io.h"
#include "ctcbias/fst_ops.h"
#include "ctcbias/wfst.h"
#include "fst_oracle.h"
#include "gtest/gtest.h"

namespace ctcbias {
namespace {

using testing::ComposeRelations;
using testing::EnumeratePaths;
using testing::MinWeightRelation;
using testing::RandomAcyclicFst;
using testing::RandomFstOptions;
using testing::RelationsEqual;

Wfst SingleArc(Label i, Label o, double w) {
  Wfst f;
  f.AddState();
  f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(i, o, w, 1));
  f.SetFinal(1, Weight::One());
  return f;
}

TEST(WeightTest, SemiringLaws) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    Weight a(d(rng)), b(d(rng)), c(d(rng));
    EXPECT_TRUE(ApproxEqual(Times(Times(a, b), c), Times(a, Times(b, c))));
    EXPECT_EQ(Times(a, b), Times(b, a));
    EXPECT_EQ(Times(a, Weight::One()), a);
    EXPECT_EQ(Plus(a, Weight::Zero()), a);
    EXPECT_EQ(Plus(a, b), Plus(b, a));
    EXPECT_EQ(Plus(Plus(a, b), c), Plus(a, Plus(b, c)));
    EXPECT_TRUE(Times(a, Weight::Zero()).IsZero());
    EXPECT_TRUE(ApproxEqual(Times(a, Plus(b, c)),
                            Plus(Times(a, b), Times(a, c))));
  }
  EXPECT_THROW(Weight(std::nan("")), Error);
}

TEST(ComposeTest, SingleArcChain) {
  Wfst c = Compose(SingleArc(1, 2, 1.0), SingleArc(2, 3, 2.0));
  auto paths = EnumeratePaths(c);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0].input, (std::vector<Label>{1}));
  EXPECT_EQ(paths[0].output, (std::vector<Label>{3}));
  EXPECT_DOUBLE_EQ(paths[0].weight, 3.0);
}

TEST(ComposeTest, IdentityLeftOperand) {
  std::mt19937 rng(11);
  RandomFstOptions opt;
  opt.acceptor = false;
  opt.epsilon_prob = 0.2;
  for (int trial = 0; trial < 20; ++trial) {
    Wfst b = RandomAcyclicFst(rng, opt);
    Wfst id;
    id.AddState();
    id.SetStart(0);
    id.SetFinal(0, Weight::One());
    for (Label l = 1; l <= opt.num_labels; ++l) {
      id.AddArc(0, Arc(l, l, 0.0, 0));
    }
    Wfst c = Compose(id, b);
    // The identity is cyclic, but b bounds path lengths.
    EXPECT_TRUE(RelationsEqual(MinWeightRelation(c, 32), MinWeightRelation(b)));
  }
}

TEST(ComposeTest, RandomMatchesCrossEnumeration) {
  std::mt19937 rng(1234);
  RandomFstOptions opt;
  opt.acceptor = false;
  opt.epsilon_prob = 0.25;
  for (int trial = 0; trial < 100; ++trial) {
    Wfst a = RandomAcyclicFst(rng, opt);
    Wfst b = RandomAcyclicFst(rng, opt);
    Wfst c = Compose(a, b);
    auto expected = ComposeRelations(MinWeightRelation(a), MinWeightRelation(b));
    EXPECT_TRUE(RelationsEqual(MinWeightRelation(c), expected))
        << "trial " << trial;
  }
}

TEST(ComposeTest, EpsilonFilterYieldsSinglePathPerPair) {
  // a: x:eps then eps:eps; b: eps:y. Without a filter several interleavings
  // would produce duplicate composed paths.
  Wfst a;
  for (int i = 0; i < 3; ++i) a.AddState();
  a.SetStart(0);
  a.AddArc(0, Arc(1, kEpsilon, 1.0, 1));
  a.AddArc(1, Arc(kEpsilon, kEpsilon, 1.0, 2));
  a.SetFinal(2, Weight::One());
  Wfst b;
  for (int i = 0; i < 2; ++i) b.AddState();
  b.SetStart(0);
  b.AddArc(0, Arc(kEpsilon, 5, 0.5, 1));
  b.SetFinal(1, Weight::One());
  auto paths = EnumeratePaths(Compose(a, b));
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_DOUBLE_EQ(paths[0].weight, 2.5);
}

TEST(ComposeTest, SymbolTableMismatchIsConfigError) {
  auto s1 = std::make_shared<SymbolTable>();
  s1->AddSymbol("a");
  auto s2 = std::make_shared<SymbolTable>();
  s2->AddSymbol("b");
  Wfst a(s1, s1), b(s2, s2);
  a.SetStart(a.AddState());
  b.SetStart(b.AddState());
  EXPECT_THROW(Compose(a, b), ConfigError);
}

TEST(DeterminizeTest, KeepsMinimumOfDuplicatePaths) {
  Wfst f;
  for (int i = 0; i < 5; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, 1, 2.0, 1));
  f.AddArc(1, Arc(2, 2, 0.0, 2));
  f.AddArc(0, Arc(1, 1, 1.0, 3));
  f.AddArc(3, Arc(2, 2, 4.0, 4));
  f.SetFinal(2, Weight::One());
  f.SetFinal(4, Weight::One());
  Wfst d = Determinize(f);
  EXPECT_TRUE(IsDeterministic(d));
  auto paths = EnumeratePaths(d);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_DOUBLE_EQ(paths[0].weight, 2.0);
}

TEST(DeterminizeTest, DeterministicInputUnchangedRelation) {
  Wfst f;
  for (int i = 0; i < 3; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, 1, 0.5, 1));
  f.AddArc(0, Arc(2, 2, 1.5, 2));
  f.AddArc(1, Arc(3, 3, 0.25, 2));
  f.SetFinal(2, Weight(0.125));
  Wfst d = Determinize(f);
  EXPECT_TRUE(RelationsEqual(MinWeightRelation(d), MinWeightRelation(f)));
  EXPECT_EQ(d.NumStates(), f.NumStates());
}

TEST(DeterminizeTest, RandomAcceptorsMatchEnumeration) {
  std::mt19937 rng(99);
  RandomFstOptions opt;
  opt.max_states = 8;
  opt.epsilon_prob = 0.15;
  opt.min_weight = -1.0;
  for (int trial = 0; trial < 100; ++trial) {
    Wfst f = RandomAcyclicFst(rng, opt);
    Wfst d = Determinize(f);
    EXPECT_TRUE(IsDeterministic(d)) << "trial " << trial;
    EXPECT_TRUE(RelationsEqual(MinWeightRelation(d), MinWeightRelation(f)))
        << "trial " << trial;
  }
}

TEST(DeterminizeTest, RandomTransducersMatchEnumeration) {
  std::mt19937 rng(5);
  RandomFstOptions opt;
  opt.max_states = 7;
  opt.acceptor = false;
  opt.epsilon_prob = 0.2;
  for (int trial = 0; trial < 100; ++trial) {
    Wfst f = RandomAcyclicFst(rng, opt);
    Wfst d = Determinize(f);
    EXPECT_TRUE(IsDeterministic(d, /*pairs=*/true));
    EXPECT_TRUE(RelationsEqual(MinWeightRelation(d), MinWeightRelation(f)));
  }
}

TEST(DeterminizeTest, CyclicInputUnsupported) {
  Wfst f;
  f.AddState();
  f.SetStart(0);
  f.SetFinal(0, Weight::One());
  f.AddArc(0, Arc(1, 1, 1.0, 0));
  try {
    Determinize(f);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnsupported);
  }
}

TEST(MinimizeTest, MergesRedundantSuffixes) {
  // 0 -a-> 1 -c-> 3 ; 0 -b-> 2 -c-> 4 ; 3 and 4 final.
  Wfst f;
  for (int i = 0; i < 5; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, 1, 0.0, 1));
  f.AddArc(0, Arc(2, 2, 0.0, 2));
  f.AddArc(1, Arc(3, 3, 1.0, 3));
  f.AddArc(2, Arc(3, 3, 1.0, 4));
  f.SetFinal(3, Weight::One());
  f.SetFinal(4, Weight::One());
  Wfst m = Minimize(f);
  EXPECT_LT(m.NumStates(), f.NumStates());
  EXPECT_EQ(m.NumStates(), 3u);
  EXPECT_TRUE(RelationsEqual(MinWeightRelation(m), MinWeightRelation(f)));
}

TEST(MinimizeTest, MergesAfterWeightPushing) {
  // Suffixes differ only by where the weight sits.
  Wfst f;
  for (int i = 0; i < 5; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, 1, 2.0, 1));
  f.AddArc(0, Arc(2, 2, 0.0, 2));
  f.AddArc(1, Arc(3, 3, 0.0, 3));
  f.AddArc(2, Arc(3, 3, 2.0, 4));
  f.SetFinal(3, Weight::One());
  f.SetFinal(4, Weight::One());
  Wfst m = Minimize(f);
  EXPECT_EQ(m.NumStates(), 3u);
  EXPECT_TRUE(RelationsEqual(MinWeightRelation(m), MinWeightRelation(f)));
}

TEST(MinimizeTest, MinimalInputIsFixpoint) {
  Wfst f;
  for (int i = 0; i < 3; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, 1, 1.0, 1));
  f.AddArc(1, Arc(2, 2, 1.0, 2));
  f.SetFinal(1, Weight::One());
  f.SetFinal(2, Weight::One());
  EXPECT_EQ(Minimize(f).NumStates(), 3u);
}

TEST(MinimizeTest, RandomDeterminizedMatchEnumeration) {
  std::mt19937 rng(2024);
  RandomFstOptions opt;
  opt.max_states = 8;
  opt.acceptor = false;
  opt.num_labels = 2;
  for (int trial = 0; trial < 100; ++trial) {
    Wfst d = Determinize(RandomAcyclicFst(rng, opt));
    Wfst m = Minimize(d);
    EXPECT_LE(m.NumStates(), d.NumStates());
    EXPECT_TRUE(IsDeterministic(m, true));
    EXPECT_TRUE(RelationsEqual(MinWeightRelation(m), MinWeightRelation(d)))
        << "trial " << trial;
    // Idempotent on state count.
    EXPECT_EQ(Minimize(m).NumStates(), m.NumStates());
  }
}

TEST(MinimizeTest, NumberingIndependentOfArcOrder) {
  std::mt19937 rng(77);
  RandomFstOptions opt;
  opt.max_states = 8;
  opt.acceptor = false;
  opt.num_labels = 3;
  for (int trial = 0; trial < 100; ++trial) {
    Wfst d = Determinize(RandomAcyclicFst(rng, opt));
    Wfst shuffled = d;
    for (size_t s = 0; s < shuffled.NumStates(); ++s) {
      auto& arcs = shuffled.MutableArcs(static_cast<StateId>(s));
      std::shuffle(arcs.begin(), arcs.end(), rng);
    }
    Wfst m = Minimize(d);
    EXPECT_EQ(FstToText(Minimize(shuffled)), FstToText(m)) << "trial " << trial;
    EXPECT_EQ(FstToText(Minimize(m)), FstToText(m)) << "trial " << trial;
  }
}

TEST(MinimizeTest, NonDeterministicInputRejected) {
  Wfst f;
  for (int i = 0; i < 3; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, 1, 0.0, 1));
  f.AddArc(0, Arc(1, 1, 0.0, 2));
  f.SetFinal(1, Weight::One());
  f.SetFinal(2, Weight::One());
  try {
    Minimize(f);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(RemoveEpsilonsTest, FoldsChainWeights) {
  Wfst f;
  for (int i = 0; i < 4; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, kEpsilon, 1.0, 1));
  f.AddArc(1, Arc(kEpsilon, kEpsilon, 0.0, 2));
  f.AddArc(2, Arc(kEpsilon, 3, 2.0, 3));
  f.SetFinal(3, Weight::One());
  Wfst r = RemoveEpsilons(f);
  for (size_t s = 0; s < r.NumStates(); ++s) {
    for (const Arc& arc : r.Arcs(static_cast<StateId>(s))) {
      EXPECT_FALSE(arc.ilabel == kEpsilon && arc.olabel == kEpsilon);
    }
  }
  auto paths = EnumeratePaths(r);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_DOUBLE_EQ(paths[0].weight, 3.0);
}

TEST(RemoveEpsilonsTest, EpsilonFreeInputUnchanged) {
  Wfst f = SingleArc(1, 2, 0.5);
  EXPECT_EQ(FstToText(RemoveEpsilons(f)), FstToText(f));
}

TEST(RemoveEpsilonsTest, RandomMatchEnumeration) {
  std::mt19937 rng(77);
  RandomFstOptions opt;
  opt.max_states = 8;
  opt.acceptor = false;
  opt.epsilon_prob = 0.5;
  for (int trial = 0; trial < 100; ++trial) {
    Wfst f = RandomAcyclicFst(rng, opt);
    Wfst r = RemoveEpsilons(f);
    EXPECT_TRUE(RelationsEqual(MinWeightRelation(r), MinWeightRelation(f)))
        << "trial " << trial;
  }
}

TEST(RemoveEpsilonsTest, PositiveEpsilonCycleConverges) {
  Wfst f;
  for (int i = 0; i < 3; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(kEpsilon, kEpsilon, 1.0, 1));
  f.AddArc(1, Arc(kEpsilon, kEpsilon, 1.0, 0));
  f.AddArc(1, Arc(4, 4, 0.5, 2));
  f.SetFinal(2, Weight::One());
  Wfst r = RemoveEpsilons(f);
  auto rel = MinWeightRelation(r);
  ASSERT_EQ(rel.size(), 1u);
  EXPECT_DOUBLE_EQ(rel.begin()->second, 1.5);
}

TEST(RemoveEpsilonsTest, NegativeEpsilonCycleDiverges) {
  Wfst f;
  for (int i = 0; i < 2; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(kEpsilon, kEpsilon, -1.0, 1));
  f.AddArc(1, Arc(kEpsilon, kEpsilon, 0.5, 0));
  f.SetFinal(1, Weight::One());
  try {
    RemoveEpsilons(f);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDivergence);
  }
}

TEST(ShortestPathsTest, OrderingAndSaturation) {
  Wfst f;
  for (int i = 0; i < 2; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(3, 3, 3.0, 1));
  f.AddArc(0, Arc(1, 1, 1.0, 1));
  f.AddArc(0, Arc(2, 2, 2.0, 1));
  f.SetFinal(1, Weight::One());
  auto best2 = ShortestPaths(f, 2);
  ASSERT_EQ(best2.size(), 2u);
  EXPECT_EQ(best2[0].output, (std::vector<Label>{1}));
  EXPECT_DOUBLE_EQ(best2[0].weight.Value(), 1.0);
  EXPECT_EQ(best2[1].output, (std::vector<Label>{2}));
  EXPECT_EQ(ShortestPaths(f, 10).size(), 3u);
  EXPECT_TRUE(ShortestPaths(Wfst(), 3).empty());
}

TEST(ShortestPathsTest, TiesBrokenByOutputLabels) {
  Wfst f;
  for (int i = 0; i < 2; ++i) f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, 7, 1.0, 1));
  f.AddArc(0, Arc(1, 4, 1.0, 1));
  f.AddArc(0, Arc(1, 5, 1.0, 1));
  f.SetFinal(1, Weight::One());
  auto best = ShortestPaths(f, 2);
  ASSERT_EQ(best.size(), 2u);
  EXPECT_EQ(best[0].output, (std::vector<Label>{4}));
  EXPECT_EQ(best[1].output, (std::vector<Label>{5}));
}

TEST(ShortestPathsTest, RandomMatchSortedEnumeration) {
  std::mt19937 rng(31337);
  RandomFstOptions opt;
  opt.max_states = 7;
  opt.acceptor = false;
  opt.epsilon_prob = 0.2;
  for (int trial = 0; trial < 100; ++trial) {
    Wfst f = RandomAcyclicFst(rng, opt);
    auto all = EnumeratePaths(f);
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      long long qa = std::llround(a.weight / 1e-9);
      long long qb = std::llround(b.weight / 1e-9);
      if (qa != qb) return qa < qb;
      if (a.output != b.output) return a.output < b.output;
      return a.input < b.input;
    });
    for (size_t n : {1u, 3u, 50u}) {
      auto got = ShortestPaths(f, n);
      ASSERT_EQ(got.size(), std::min(n, all.size())) << "trial " << trial;
      for (size_t i = 0; i < got.size(); ++i) {
        EXPECT_NEAR(got[i].weight.Value(), all[i].weight, 1e-9);
        EXPECT_EQ(got[i].output, all[i].output);
        EXPECT_EQ(got[i].input, all[i].input);
      }
    }
  }
}

TEST(FstIoTest, TextRoundTripIsExact) {
  std::mt19937 rng(8);
  RandomFstOptions opt;
  opt.acceptor = false;
  opt.epsilon_prob = 0.2;
  opt.min_weight = -3.0;
  for (int trial = 0; trial < 50; ++trial) {
    Wfst f = RandomAcyclicFst(rng, opt);
    std::string text = FstToText(f);
    EXPECT_EQ(FstToText(FstFromText(text)), text);
  }
}

TEST(FstIoTest, SymbolicLabelsRoundTrip) {
  auto syms = std::make_shared<SymbolTable>();
  syms->AddSymbol("x");
  syms->AddSymbol("y");
  Wfst f(syms, syms);
  f.AddState();
  f.AddState();
  f.SetStart(0);
  f.AddArc(0, Arc(1, 2, 1.0 / 3.0, 1));
  f.SetFinal(1, Weight(0.25));
  std::string text = FstToText(f);
  EXPECT_EQ(text, "0\t1\tx\ty\t0.333333\n1\t0.250000\n");
  EXPECT_EQ(FstToText(FstFromText(text, syms, syms)), text);

  std::ostringstream table;
  syms->Write(table);
  std::istringstream in(table.str());
  EXPECT_EQ(SymbolTable::Read(in), *syms);
}

}  // namespace
}  // namespace ctcbias
