// SPDX-License-Identifier: Apache-2.0

#include "agentpso/grading.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <stdexcept>

namespace agentpso {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string strip_dollars(std::string s) {
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$') return s.substr(1, s.size() - 2);
  return s;
}

std::string strip_boxed(std::string s) {
  constexpr std::string_view kOpen = "\\boxed{";
  if (!s.starts_with(kOpen) || s.back() != '}') return s;
  // The brace opened by \boxed must close at the final character.
  int depth = 0;
  for (std::size_t i = kOpen.size() - 1; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) {
      if (i != s.size() - 1) return s;
      return s.substr(kOpen.size(), s.size() - kOpen.size() - 1);
    }
  }
  return s;
}

std::string rewrite_fracs(const std::string& s) {
  static const std::regex kFrac(R"(\\frac\{([^{}]*)\}\{([^{}]*)\})");
  return std::regex_replace(s, kFrac, "$1/$2");
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : s) {
    if (is_space(c)) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  return out;
}

std::string lowercase_if_alphabetic(std::string s) {
  bool any_alpha = false;
  for (char c : s) {
    if (is_alpha(c)) {
      any_alpha = true;
    } else if (c != ' ') {
      return s;
    }
  }
  if (!any_alpha) return s;
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string normalize_once(std::string_view raw) {
  std::string s = trim(raw);
  s = strip_dollars(std::move(s));
  s = strip_boxed(std::move(s));
  s = rewrite_fracs(s);
  s = collapse_whitespace(s);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return lowercase_if_alphabetic(std::move(s));
}

}  // namespace

std::string normalize_answer(std::string_view raw) {
  // Every rule except lowercasing shortens its input, so this terminates.
  std::string current(raw);
  for (;;) {
    std::string next = normalize_once(current);
    if (next == current) return next;
    current = std::move(next);
  }
}

bool grade(std::string_view answer, std::string_view gold) {
  auto a = normalize_answer(answer);
  if (a.empty()) return false;
  return a == normalize_answer(gold);
}

std::string majority_vote(const std::vector<std::string>& answers) {
  if (answers.empty()) throw std::invalid_argument("majority_vote: no answers");
  // Distinct answers in first-appearance order, so the first maximum found
  // is the one held by the lowest agent index.
  std::vector<std::pair<std::string_view, int>> counts;
  for (const auto& a : answers) {
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == a; });
    if (it == counts.end()) {
      counts.emplace_back(a, 1);
    } else {
      ++it->second;
    }
  }
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return std::string(best->first);
}

CorrectnessMatrix::CorrectnessMatrix(std::size_t agents, std::size_t problems)
    : agents_(agents), problems_(problems), cells_(agents * problems, 0) {}

bool CorrectnessMatrix::at(std::size_t agent, std::size_t problem) const {
  return cells_.at(agent * problems_ + problem) != 0;
}

void CorrectnessMatrix::set(std::size_t agent, std::size_t problem, bool correct) {
  cells_.at(agent * problems_ + problem) = correct ? 1 : 0;
}

double accuracy_majority(const std::vector<ProblemAnswers>& problems, const Grader& grader) {
  if (problems.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : problems) {
    std::vector<std::string> normalized;
    normalized.reserve(p.answers.size());
    for (const auto& a : p.answers) normalized.push_back(normalize_answer(a));
    if (grader(majority_vote(normalized), p.gold)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(problems.size());
}

double pass_at_k(const CorrectnessMatrix& matrix) {
  if (matrix.agents() == 0) throw std::invalid_argument("pass_at_k: k must be at least 1");
  if (matrix.problems() == 0) return 0.0;
  std::size_t passed = 0;
  for (std::size_t p = 0; p < matrix.problems(); ++p) {
    for (std::size_t a = 0; a < matrix.agents(); ++a) {
      if (matrix.at(a, p)) {
        ++passed;
        break;
      }
    }
  }
  return static_cast<double>(passed) / static_cast<double>(matrix.problems());
}

std::vector<double> per_agent_accuracy(const CorrectnessMatrix& matrix) {
  std::vector<double> out(matrix.agents(), 0.0);
  if (matrix.problems() == 0) return out;
  for (std::size_t a = 0; a < matrix.agents(); ++a) {
    std::size_t hits = 0;
    for (std::size_t p = 0; p < matrix.problems(); ++p) hits += matrix.at(a, p) ? 1 : 0;
    out[a] = static_cast<double>(hits) / static_cast<double>(matrix.problems());
  }
  return out;
}

double avg_at_k(const CorrectnessMatrix& matrix) {
  if (matrix.agents() == 0) throw std::invalid_argument("avg_at_k: k must be at least 1");
  if (matrix.problems() == 0) return 0.0;
  // Mean of the per-agent accuracies, computed from the integer cell count.
  std::size_t hits = 0;
  for (std::size_t a = 0; a < matrix.agents(); ++a) {
    for (std::size_t p = 0; p < matrix.problems(); ++p) hits += matrix.at(a, p) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(matrix.agents() * matrix.problems());
}

CorrectnessMatrix correctness_matrix(const std::vector<ProblemAnswers>& problems,
                                     const Grader& grader) {
  std::size_t k = problems.empty() ? 0 : problems.front().answers.size();
  CorrectnessMatrix matrix(k, problems.size());
  for (std::size_t p = 0; p < problems.size(); ++p) {
    if (problems[p].answers.size() != k) {
      throw std::invalid_argument("every problem needs the same number of agent answers");
    }
    for (std::size_t a = 0; a < k; ++a) {
      matrix.set(a, p, grader(problems[p].answers[a], problems[p].gold));
    }
  }
  return matrix;
}

MetricsReport compute_metrics(const std::vector<ProblemAnswers>& problems, const Grader& grader) {
  auto matrix = correctness_matrix(problems, grader);
  MetricsReport report;
  report.accuracy = accuracy_majority(problems, grader);
  if (matrix.agents() > 0) {
    report.pass_at_k = pass_at_k(matrix);
    report.avg_at_k = avg_at_k(matrix);
    report.per_agent_accuracy = per_agent_accuracy(matrix);
  }
  return report;
}

}  // namespace agentpso
