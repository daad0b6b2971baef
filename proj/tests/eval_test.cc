// eval_test.cc
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

#include "ctcbias/eval.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "ctcbias/corpus.h"
#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"

namespace ctcbias {
namespace {

WordSeq W(const std::string& s) { return SplitWhitespace(s); }

// Oracle: plain recursive edit distance with memoization by (i, j).
size_t OracleDistance(const WordSeq& r, const WordSeq& h) {
  std::map<std::pair<size_t, size_t>, size_t> memo;
  std::function<size_t(size_t, size_t)> rec = [&](size_t i, size_t j) {
    if (i == r.size()) return h.size() - j;
    if (j == h.size()) return r.size() - i;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    size_t best = rec(i + 1, j + 1) + (r[i] == h[j] ? 0 : 1);
    best = std::min(best, rec(i + 1, j) + 1);
    best = std::min(best, rec(i, j + 1) + 1);
    memo[key] = best;
    return best;
  };
  return rec(0, 0);
}

TEST(WerTest, OneSubstitutionOverThree) {
  WerStats s = Wer(W("call bob smith"), W("call bob smyth"));
  EXPECT_EQ(s.substitutions, 1u);
  EXPECT_EQ(s.insertions, 0u);
  EXPECT_EQ(s.deletions, 0u);
  EXPECT_NEAR(s.Wer(), 100.0 / 3.0, 1e-9);
  EXPECT_EQ(Wer(W("a b"), W("a b")).Wer(), 0.0);
}

TEST(WerTest, EmptyReferenceIsUndefined) {
  try {
    Wer({}, W("x"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUndefined);
  }
  EXPECT_THROW(WerStats().Wer(), Error);
  EXPECT_EQ(EditCounts({}, W("x y")).insertions, 2u);
}

TEST(WerTest, SubstitutionPreferredOnTies) {
  // "a" vs "b" could be one substitution or a deletion plus an insertion.
  auto al = AlignWords(W("a"), W("b"));
  ASSERT_EQ(al.size(), 1u);
  EXPECT_EQ(al[0].op, EditOp::kSubstitute);
}

TEST(WerTest, RandomPairsMatchRecursiveOracle) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> len(0, 8), word(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    WordSeq r, h;
    int n = 1 + len(rng) % 8, m = len(rng);
    for (int i = 0; i < n; ++i) r.push_back("w" + std::to_string(word(rng)));
    for (int i = 0; i < m; ++i) h.push_back("w" + std::to_string(word(rng)));
    WerStats s = Wer(r, h);
    EXPECT_EQ(s.Errors(), OracleDistance(r, h));
    EXPECT_EQ(static_cast<long>(s.insertions) - static_cast<long>(s.deletions),
              static_cast<long>(h.size()) - static_cast<long>(r.size()));
    // The alignment is a valid edit script.
    size_t ri = 0, hi = 0;
    for (const auto& p : AlignWords(r, h)) {
      if (p.op != EditOp::kInsert) {
        EXPECT_EQ(p.ref, static_cast<int>(ri++));
      }
      if (p.op != EditOp::kDelete) {
        EXPECT_EQ(p.hyp, static_cast<int>(hi++));
      }
      if (p.op == EditOp::kMatch) {
        EXPECT_EQ(r[p.ref], h[p.hyp]);
      }
      if (p.op == EditOp::kSubstitute) {
        EXPECT_NE(r[p.ref], h[p.hyp]);
      }
    }
    EXPECT_EQ(ri, r.size());
    EXPECT_EQ(hi, h.size());
  }
}

struct SpanCase {
  std::string ref, hyp;
  size_t begin, end;
  bool correct;
};

TEST(CeerTest, HandLabeledAlignments) {
  const std::vector<SpanCase> cases{
      {"call bob smith now", "call bob smith now", 1, 3, true},
      {"call bob smith now", "call bob smyth now", 1, 3, false},
      {"call bob smith now", "call bob x smith now", 1, 3, false},
      {"call bob smith", "call uh bob smith", 1, 3, true},
      {"call bob smith", "call bob smith now", 1, 3, true},
      {"call bob smith", "call bob", 1, 3, false},
      {"call bob now", "call bob uh now", 1, 2, true},
      {"call bob now", "call now", 1, 2, false},
      {"call bob smith", "call Bob smith", 1, 3, false},
      {"text bob about bob", "text rob about bob", 1, 2, false},
      {"text bob about bob", "text rob about bob", 3, 4, true},
      {"call annmarie", "call ann marie", 1, 2, false},
      {"call ann marie", "call annmarie", 1, 3, false},
      {"call bob", "", 1, 2, false},
      {"bob", "uh uh bob", 0, 1, true},
      {"call bob smith", "tall bob smith", 1, 3, true},
      {"a b c d", "a b c x d", 1, 4, false},
      {"a b c d", "a b c d x", 1, 4, true},
      {"call bob bob", "call bob", 1, 2, false},
      {"call bob bob", "call bob", 2, 3, true},
  };
  ASSERT_EQ(cases.size(), 20u);
  for (const auto& c : cases) {
    auto al = AlignWords(W(c.ref), W(c.hyp));
    EXPECT_EQ(EntityRecognized(al, c.begin, c.end), c.correct)
        << c.ref << " | " << c.hyp << " [" << c.begin << "," << c.end << ")";
  }
}

Utterance Utt(const std::string& id, const std::string& text,
              std::vector<EntitySpan> ents = {}) {
  Utterance u;
  u.id = id;
  u.words = W(text);
  u.entities = std::move(ents);
  return u;
}

TEST(CeerTest, TenOccurrencesThreeWrong) {
  std::vector<Utterance> corpus;
  HypothesisMap hyps;
  for (int i = 0; i < 10; ++i) {
    std::string id = "u" + std::to_string(i);
    corpus.push_back(Utt(id, "call bob", {{"@CONTACT", "bob", 1, 2}}));
    hyps[id] = W(i < 3 ? "call rob" : "call bob");
  }
  CeerResult r = Ceer(corpus, hyps);
  EXPECT_EQ(r.total, 10u);
  EXPECT_EQ(r.misrecognized, 3u);
  EXPECT_DOUBLE_EQ(*r.Ceer(), 30.0);
  for (auto& [id, h] : hyps) h = W("call bob");
  EXPECT_DOUBLE_EQ(*Ceer(corpus, hyps).Ceer(), 0.0);
}

TEST(CeerTest, MissingHypothesesListed) {
  std::vector<Utterance> corpus{Utt("x1", "call bob", {{"@C", "bob", 1, 2}}),
                                Utt("x2", "call ann", {{"@C", "ann", 1, 2}}),
                                Utt("x3", "hello")};
  try {
    Ceer(corpus, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
    EXPECT_NE(std::string(e.what()).find("x1, x2"), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("x3"), std::string::npos);
  }
}

TEST(EvaluateTest, PoolingArithmetic) {
  std::vector<Utterance> corpus{
      Utt("a", "call bob", {{"@C", "bob", 1, 2}}), Utt("b", "good morning")};
  EvalReport r = Evaluate(corpus, {{"a", W("call bob")}, {"b", W("good evening")}});
  EXPECT_EQ(r.a.Wer(), 0.0);
  EXPECT_EQ(r.b.Wer(), 50.0);
  EXPECT_EQ(r.all.Wer(), 25.0);
  EXPECT_EQ(*r.ceer.Ceer(), 0.0);
}

TEST(EvaluateTest, EmptySubsetAIsUndefinedNotZero) {
  std::vector<Utterance> corpus{Utt("b", "good morning")};
  EvalReport r = Evaluate(corpus, {{"b", W("good morning")}});
  EXPECT_FALSE(r.a.Defined());
  EXPECT_FALSE(r.ceer.Ceer().has_value());
  std::ostringstream tsv;
  WriteReportTsv({{"sys", r}}, tsv);
  EXPECT_EQ(tsv.str(),
            "system\twer_all\twer_a\twer_b\tceer\nsys\t0.00\tNA\t0.00\tNA\n");
  std::ostringstream js;
  WriteReportJson("sys", r, js);
  EXPECT_NE(js.str().find("\"ceer\": null"), std::string::npos);
  EXPECT_THROW(Evaluate(corpus, {}), Error);
}

TEST(EvaluateTest, RandomCorpusAdditivity) {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> len(1, 8), word(0, 4), coin(0, 1);
  std::vector<Utterance> corpus;
  HypothesisMap hyps;
  WerStats sum_a, sum_b;
  for (int i = 0; i < 60; ++i) {
    WordSeq r, h;
    for (int k = len(rng); k > 0; --k) r.push_back("w" + std::to_string(word(rng)));
    for (int k = len(rng); k > 0; --k) h.push_back("w" + std::to_string(word(rng)));
    Utterance u;
    u.id = "u" + std::to_string(i);
    u.words = r;
    if (coin(rng)) u.entities.push_back({"@C", r[0], 0, 1});
    corpus.push_back(u);
    hyps[u.id] = h;
    WerStats s = Wer(r, h);
    (u.InSubsetA() ? sum_a : sum_b) += s;
  }
  EvalReport rep = Evaluate(corpus, hyps);
  for (auto [got, want] : {std::pair{rep.a, sum_a}, std::pair{rep.b, sum_b}}) {
    EXPECT_EQ(got.substitutions, want.substitutions);
    EXPECT_EQ(got.insertions, want.insertions);
    EXPECT_EQ(got.deletions, want.deletions);
    EXPECT_EQ(got.ref_len, want.ref_len);
  }
  EXPECT_EQ(rep.all.Errors(), sum_a.Errors() + sum_b.Errors());
  EXPECT_EQ(rep.all.ref_len, sum_a.ref_len + sum_b.ref_len);
  ASSERT_TRUE(rep.ceer.Ceer().has_value());
  EXPECT_GE(*rep.ceer.Ceer(), 0.0);
  EXPECT_LE(*rep.ceer.Ceer(), 100.0);
}

TEST(CorpusTest, JsonlRoundTripAndValidation) {
  Corpus c;
  Utterance u = Utt("u1", "call Bob Smith", {{"@CONTACT", "Bob Smith", 1, 3}});
  u.user = "user0";
  u.planted = {"\xE2\x96\x81" "call"};
  c.utterances = {u, Utt("u2", "good morning")};
  c.user_entities["user0"]["@CONTACT"] = {"Bob Smith"};
  ValidateCorpus(c);
  auto dir = std::filesystem::temp_directory_path() / "ctcbias_corpus_test";
  WriteCorpusDir(c, dir.string());
  Corpus back = ReadCorpusDir(dir.string());
  std::filesystem::remove_all(dir);
  ASSERT_EQ(back.utterances.size(), 2u);
  EXPECT_EQ(back.utterances[0].entities[0].end, 3u);
  EXPECT_EQ(back.utterances[0].user, "user0");
  EXPECT_EQ(back.utterances[0].planted, u.planted);
  EXPECT_EQ(back.user_entities, c.user_entities);

  Corpus bad = c;
  bad.utterances[0].entities[0].end = 4;
  EXPECT_THROW(ValidateCorpus(bad), ConfigError);
  bad = c;
  bad.utterances[0].entities[0].surface = "Bob";
  EXPECT_THROW(ValidateCorpus(bad), ConfigError);
  bad = c;
  bad.utterances[1].id = "u1";
  EXPECT_THROW(ValidateCorpus(bad), ConfigError);
  std::istringstream junk("{\"id\": 3}\n");
  EXPECT_THROW(ReadUtterancesJsonl(junk), Error);
}

}  // namespace
}  // namespace ctcbias
