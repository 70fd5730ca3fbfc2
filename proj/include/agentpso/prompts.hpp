// SPDX-License-Identifier: Apache-2.0
//
// The four prompt families used by the optimizer and a small renderer for
// their `{name}` placeholders (`{{` and `}}` are literal braces).

#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agentpso/core.hpp"

namespace agentpso {

enum class Purpose { kSolve, kReflect, kVelocity, kSkillUpdate };

std::string_view to_string(Purpose purpose);

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PromptTemplate {
 public:
  /// Throws PromptError when the body has an unbalanced brace.
  PromptTemplate(Purpose purpose, std::string body);

  Purpose purpose() const noexcept { return purpose_; }
  const std::string& body() const noexcept { return body_; }
  const std::set<std::string>& placeholders() const noexcept { return placeholders_; }

  /// Bindings must name every placeholder and nothing else.
  std::string render(const std::map<std::string, std::string>& bindings) const;

 private:
  Purpose purpose_;
  std::string body_;
  std::set<std::string> placeholders_;
};

struct PromptLibrary {
  PromptTemplate solve;
  PromptTemplate reflect;
  PromptTemplate velocity;
  PromptTemplate skill_update;

  const PromptTemplate& get(Purpose purpose) const;
};

inline constexpr std::string_view kDefaultTaskDomain = "mathematics competition";

/// `task_domain` fills the first line of the solve prompt:
/// "You are a <task_domain> agent."
PromptLibrary make_prompt_library(std::string_view task_domain = kDefaultTaskDomain);

/// Section headers the templates are built from. The mock backend reads
/// rendered prompts back through these.
namespace headers {
inline constexpr std::string_view kSolveSkill = "Current skill file:\n";
inline constexpr std::string_view kSolveSkillEnd = "\n\nSolve this problem using only your current skill.";
inline constexpr std::string_view kSolveProblem = "Problem:\n";
inline constexpr std::string_view kSolveProblemEnd = "\n\nReturn exactly one JSON object:";

inline constexpr std::string_view kReflectSkill = "Current agent skill:\n";
inline constexpr std::string_view kReflectOwn = "Agent's own reasoning traces and answers:\n";
inline constexpr std::string_view kReflectPeers =
    "Other agents' reasoning traces and answers, including correctness:\n";

inline constexpr std::string_view kIdentity = "Agent identity to preserve:\n";
inline constexpr std::string_view kPreviousVelocity = "Previous velocity v_i:\n";
inline constexpr std::string_view kDirection = "Self-reflective direction d_i:\n";
inline constexpr std::string_view kCurrentSkill = "Current skill s_i:\n";
inline constexpr std::string_view kPersonalBest = "Personal best skill p_i:\n";
inline constexpr std::string_view kGlobalBest = "Global best skill g:\n";
inline constexpr std::string_view kVelocity = "Velocity v_i:\n";
inline constexpr std::string_view kInstruction = "Instruction:\n";
}  // namespace headers

/// Chain of Thought, Step-Back Prompting, Self-Refine, Reflection.
std::vector<Skill> default_initial_skills();

/// config.initial_skills when given, else the defaults cycled to num_agents.
std::vector<Skill> resolve_initial_skills(const RunConfig& config);

}  // namespace agentpso
