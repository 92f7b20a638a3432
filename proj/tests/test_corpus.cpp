#include <gtest/gtest.h>

#include <random>

#include "bbt/corpus.hpp"
#include "test_util.hpp"

namespace bbt {
namespace {

using testing::TempDir;

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

TEST(LoadParallel, ReadsPairsInOrder) {
  TempDir dir;
  const auto p = dir.write("auth.tsv", "Ahoj\tHello\nDobrý den\tGood day\n");
  const auto c = load_parallel(p, DatasetTag::auth);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.dataset, DatasetTag::auth);
  EXPECT_EQ(c.pairs[1].source, "Dobrý den");
  EXPECT_EQ(c.pairs[1].target, "Good day");
  for (const auto& pair : c.pairs) EXPECT_EQ(pair.dataset, DatasetTag::auth);
}

TEST(LoadParallel, SingleFieldLineIsRejected) {
  EXPECT_NE(error_of([] { parse_parallel("only-one-field\n", DatasetTag::auth, "x.tsv"); }).find("line 1"),
            std::string::npos);
}

TEST(LoadParallel, ThreeFieldsNamesLineAndCounts) {
  const auto msg = error_of([] { parse_parallel("a\tb\na\tb\tc\nd\te\n", DatasetTag::bt, "x.tsv"); });
  EXPECT_NE(msg.find("line 2: expected 2 fields, got 3"), std::string::npos) << msg;
}

TEST(LoadParallel, EmptyFileAndBlankSidesAreRejected) {
  EXPECT_THROW(parse_parallel("", DatasetTag::auth), InputError);
  EXPECT_THROW(parse_parallel("  \tx\n", DatasetTag::auth), InputError);
}

TEST(LoadParallel, InvalidUtf8IsHardError) {
  const auto msg = error_of([] { parse_parallel("ok\tok\nbad\xC3\x28\tx\n", DatasetTag::auth, "x.tsv"); });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_THROW(parse_parallel("over\xC0\xAF\tlong\n", DatasetTag::auth), InputError);
  EXPECT_THROW(parse_parallel("surrogate\xED\xA0\x80\tx\n", DatasetTag::auth), InputError);
}

TEST(LoadNbest, GroupsBySentence) {
  const auto l = parse_nbest("0 ||| a ||| -1.0\n0 ||| b ||| -2.0\n");
  ASSERT_EQ(l.num_sentences(), 1u);
  EXPECT_EQ(l.sentences[0].size(), 2u);
  EXPECT_EQ(l.sentences[0][1].text, "b");
  EXPECT_DOUBLE_EQ(l.sentences[0][1].model_score, -2.0);
}

TEST(LoadNbest, MissingScoreIsLineOneError) {
  EXPECT_NE(error_of([] { parse_nbest("0 ||| a\n", "n.txt"); }).find("line 1"), std::string::npos);
}

TEST(LoadNbest, NonNumericFieldsAndGapsAreRejected) {
  EXPECT_NE(error_of([] { parse_nbest("x ||| a ||| 1\n", "n.txt"); }).find("line 1"), std::string::npos);
  EXPECT_NE(error_of([] { parse_nbest("0 ||| a ||| 1\n0 ||| b ||| zz\n", "n.txt"); }).find("line 2"), std::string::npos);
  EXPECT_NE(error_of([] { parse_nbest("0 ||| a ||| 1\n2 ||| b ||| 1\n", "n.txt"); }).find("line 2"), std::string::npos);
  EXPECT_THROW(parse_nbest("1 ||| a ||| 1\n"), InputError);
  EXPECT_THROW(parse_nbest("0 ||| a ||| 1\n1 ||| b ||| 1\n0 ||| c ||| 1\n"), InputError);
}

TEST(LoadNbest, ScoresMustNotIncreaseWithinSentence) {
  EXPECT_THROW(parse_nbest("0 ||| a ||| -2\n0 ||| b ||| -1\n"), InputError);
}

TEST(LoadNbest, SixBestShape) {
  std::string content;
  for (int s = 0; s < 2; ++s)
    for (int k = 0; k < 6; ++k) content += std::to_string(s) + " ||| hyp " + std::to_string(k) + " ||| -" + std::to_string(k) + "\n";
  TempDir dir;
  const auto l = load_nbest(dir.write("ckpt_5000.nbest", content));
  EXPECT_EQ(l.n(), 6u);
  EXPECT_EQ(l.num_sentences(), 2u);
  EXPECT_EQ(l.origin, "ckpt_5000");
  EXPECT_EQ(*l.sentences[1][0].origin, "ckpt_5000");
}

// Every input line lands in exactly one sentence group, and writing then
// re-reading reproduces the structure.
TEST(LoadNbest, PartitionAndRoundTripOnRandomLists) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::string content;
    std::size_t lines = 0;
    const int sentences = 1 + static_cast<int>(rng() % 8);
    for (int s = 0; s < sentences; ++s) {
      const int n = 1 + static_cast<int>(rng() % 6);
      double score = 0.0;
      for (int k = 0; k < n; ++k) {
        score -= (rng() % 1000) / 97.0;
        content += std::to_string(s) + " ||| w" + std::to_string(rng() % 50) + " č|x ||| " + text::format_real(score) + "\n";
        ++lines;
      }
    }
    const auto l = parse_nbest(content);
    EXPECT_EQ(l.num_hypotheses(), lines);
    for (std::size_t s = 0; s < l.num_sentences(); ++s)
      for (const auto& h : l.sentences[s]) EXPECT_EQ(h.sentence_index, s);
    EXPECT_EQ(format_nbest(l), content);
    EXPECT_EQ(parse_nbest(format_nbest(l)), l);
  }
}

TEST(LoadParallel, RoundTripIsByteIdentical) {
  const std::string content = "Jídlo v U Karla.\tFood at U Karla.\n  lead\ttrail  \n";
  const auto c = parse_parallel(content, DatasetTag::ft);
  EXPECT_EQ(format_parallel(c), content);
  EXPECT_EQ(parse_parallel(format_parallel(c), DatasetTag::ft), c);
}

TEST(LoadNeTestset, ValidCase) {
  const auto cases = parse_ne_testset("Jídlo v U Karla.\tFood at U Karla.\tU Karla\n");
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(cases[0].entity, "U Karla");
}

TEST(LoadNeTestset, EntityMustOccurInReference) {
  EXPECT_NE(error_of([] { parse_ne_testset("s\tr q\tq\ns\tFood at Y\tX\n", "ne.tsv"); }).find("line 2"), std::string::npos);
  EXPECT_THROW(parse_ne_testset("s\tr\t\n"), InputError);
}

TEST(LoadNeTestset, FixturePreservesOrder) {
  const auto cases = load_ne_testset(testing::data_path("ne_restaurants.tsv"));
  ASSERT_EQ(cases.size(), 10u);
  EXPECT_EQ(cases.front().entity, "U Karla");
  EXPECT_EQ(cases[4].entity, "U Fleků");
  EXPECT_EQ(cases.back().entity, "Na Slamníku");
}

}  // namespace
}  // namespace bbt
