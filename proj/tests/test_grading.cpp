// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "agentpso/grading.hpp"
#include "support.hpp"

namespace agentpso {
namespace {

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_answer("\\boxed{42}"), "42");
  EXPECT_EQ(normalize_answer("$\\frac{1}{2}$"), "1/2");
  EXPECT_EQ(normalize_answer("Yes."), "yes");
  EXPECT_EQ(normalize_answer("  12  "), "12");
  EXPECT_EQ(normalize_answer("a   b"), "a b");
  EXPECT_EQ(normalize_answer("(1, 2)"), "(1, 2)");
  EXPECT_EQ(normalize_answer("X1"), "X1");
}

TEST(Normalize, Idempotent) {
  const std::vector<std::string> atoms = {"$", "\\boxed{", "}", "\\frac{", "3", "x", "Y", " ",
                                          ".", "{", "ab", "\n"};
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5000; ++trial) {
    std::string s;
    int len = static_cast<int>(rng() % 10);
    for (int i = 0; i < len; ++i) s += atoms[rng() % atoms.size()];
    auto once = normalize_answer(s);
    EXPECT_EQ(normalize_answer(once), once) << "input: " << s;
  }
}

TEST(Grade, Examples) {
  EXPECT_TRUE(grade("\\boxed{7}", "7"));
  EXPECT_FALSE(grade("8", "7"));
  EXPECT_FALSE(grade("", "7"));
  EXPECT_FALSE(grade("", ""));
}

TEST(MajorityVote, Examples) {
  EXPECT_EQ(majority_vote({"12", "12", "13", "12"}), "12");
  EXPECT_EQ(majority_vote({"a", "b", "a", "b"}), "a");
  EXPECT_EQ(majority_vote({"b", "a", "a", "b"}), "b");
  EXPECT_EQ(majority_vote({"x"}), "x");
  EXPECT_THROW(majority_vote({}), std::invalid_argument);
}

ProblemAnswers column(std::vector<std::string> answers, std::string gold) {
  return ProblemAnswers{std::move(answers), std::move(gold)};
}

TEST(Metrics, AvgAtKExample) {
  // rows [1,0] and [1,1]
  std::vector<ProblemAnswers> p = {column({"g0", "g0"}, "g0"), column({"w", "g1"}, "g1")};
  auto m = compute_metrics(p);
  EXPECT_DOUBLE_EQ(m.avg_at_k, 0.75);
  EXPECT_DOUBLE_EQ(m.pass_at_k, 1.0);
  ASSERT_EQ(m.per_agent_accuracy.size(), 2u);
  EXPECT_DOUBLE_EQ(m.per_agent_accuracy[0], 0.5);
  EXPECT_DOUBLE_EQ(m.per_agent_accuracy[1], 1.0);
}

TEST(Metrics, PassAtKColumnAndAllFalse) {
  CorrectnessMatrix m(4, 1);
  m.set(2, 0, true);
  EXPECT_DOUBLE_EQ(pass_at_k(m), 1.0);
  CorrectnessMatrix none(3, 5);
  EXPECT_DOUBLE_EQ(pass_at_k(none), 0.0);
  EXPECT_DOUBLE_EQ(avg_at_k(none), 0.0);
}

TEST(Metrics, OneCorrectAgentLosesToWrongConsensus) {
  std::vector<ProblemAnswers> p = {column({"5", "4", "4", "4"}, "5"),
                                   column({"9", "1", "2", "3"}, "9")};
  // Problem 0: others agree on a wrong answer. Problem 1: four-way tie, agent 0 wins.
  EXPECT_DOUBLE_EQ(accuracy_majority(p), 0.5);
}

TEST(Metrics, AllCorrect) {
  std::vector<ProblemAnswers> p(5, column({"1", "1", "1", "1"}, "1"));
  auto m = compute_metrics(p);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.pass_at_k, 1.0);
  EXPECT_DOUBLE_EQ(m.avg_at_k, 1.0);
}

TEST(Metrics, PluggableGrader) {
  std::vector<ProblemAnswers> p = {column({"0.5", "1/2"}, "1/2")};
  Grader numeric = [](std::string_view a, std::string_view g) {
    return (a == "0.5" ? std::string("1/2") : std::string(a)) == g;
  };
  EXPECT_DOUBLE_EQ(compute_metrics(p, numeric).avg_at_k, 1.0);
  EXPECT_DOUBLE_EQ(compute_metrics(p).avg_at_k, 0.5);
}

TEST(Metrics, RejectsEmptyPopulation) {
  std::vector<ProblemAnswers> p = {column({}, "1")};
  EXPECT_ANY_THROW(compute_metrics(p));
}

TEST(Metrics, PaperRowSatisfiesOrderings) {
  const double accuracy = 79.50, pass = 87.00, avg = 72.75;
  EXPECT_GE(pass, accuracy);
  EXPECT_GE(pass, avg);
}

}  // namespace
}  // namespace agentpso
