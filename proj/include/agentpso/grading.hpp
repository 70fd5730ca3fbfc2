// SPDX-License-Identifier: Apache-2.0
//
// Exact-match grading and population metrics: majority-vote accuracy,
// pass@k (any agent correct) and avg@k (mean per-agent accuracy).

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace agentpso {

struct SolveRecord {
  int agent_id = 0;
  std::string problem_id;
  std::string reasoning;
  std::string answer;  // normalized
  bool correct = false;

  bool operator==(const SolveRecord&) const = default;
};

/// Rules, in order, repeated until nothing changes: trim; strip one
/// enclosing `$...$`; strip one enclosing `\boxed{...}`; rewrite
/// non-nested `\frac{A}{B}` as `A/B`; collapse whitespace runs; drop one
/// trailing period; lowercase answers made only of letters and spaces.
std::string normalize_answer(std::string_view raw);

/// Exact match after normalization. An empty answer is never correct.
bool grade(std::string_view answer, std::string_view gold);

/// Grader seam; the default is `grade`.
using Grader = std::function<bool(std::string_view answer, std::string_view gold)>;

/// Most frequent answer; ties go to the answer whose first holder has the
/// lowest agent index. Precondition: answers is non-empty.
std::string majority_vote(const std::vector<std::string>& answers);

/// Agents x problems table of correctness flags.
class CorrectnessMatrix {
 public:
  CorrectnessMatrix(std::size_t agents, std::size_t problems);

  std::size_t agents() const noexcept { return agents_; }
  std::size_t problems() const noexcept { return problems_; }

  bool at(std::size_t agent, std::size_t problem) const;
  void set(std::size_t agent, std::size_t problem, bool correct);

 private:
  std::size_t agents_;
  std::size_t problems_;
  std::vector<unsigned char> cells_;
};

/// k answers for one problem, in agent order.
struct ProblemAnswers {
  std::vector<std::string> answers;
  std::string gold;
};

double accuracy_majority(const std::vector<ProblemAnswers>& problems,
                         const Grader& grader = grade);
double pass_at_k(const CorrectnessMatrix& matrix);
double avg_at_k(const CorrectnessMatrix& matrix);
std::vector<double> per_agent_accuracy(const CorrectnessMatrix& matrix);

CorrectnessMatrix correctness_matrix(const std::vector<ProblemAnswers>& problems,
                                     const Grader& grader = grade);

struct MetricsReport {
  double accuracy = 0.0;
  double pass_at_k = 0.0;
  double avg_at_k = 0.0;
  std::vector<double> per_agent_accuracy;
};

MetricsReport compute_metrics(const std::vector<ProblemAnswers>& problems,
                              const Grader& grader = grade);

}  // namespace agentpso
