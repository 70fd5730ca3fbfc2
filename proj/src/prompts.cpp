// SPDX-License-Identifier: Apache-2.0

#include "agentpso/prompts.hpp"

namespace agentpso {

namespace {

constexpr std::string_view kSolveBody = R"(Base rules:
- Solve the provided MATH problem.
- The answer may be a number, expression, tuple, interval, or simplified LaTeX expression.
- Do not invent missing problem details.
- Follow the current skill file below.

Current skill file:
{skill_text}

Solve this problem using only your current skill.

Problem:
{question}

Return exactly one JSON object:
{{
    "agent_id": {agent_id},
    "reasoning": "...",
    "answer": "..."
}})";

constexpr std::string_view kReflectBody = R"(Current agent skill:
{current_skill}

Agent's own reasoning traces and answers:
{own_outputs_json}

Other agents' reasoning traces and answers, including correctness:
{peer_outputs_json}

Instruction:
Analyze the agent's performance compared with peers.
Identify general reasoning improvements.
Do not overfit to a single problem.
Do not rewrite the skill yet.
Return only the update direction.)";

constexpr std::string_view kVelocityBody = R"(Agent identity to preserve:
{agent_identity}

Previous velocity v_i:
{previous_velocity}

Self-reflective direction d_i:
{direction}

Current skill s_i:
{current_skill}

Personal best skill p_i:
{personal_best_skill}

Global best skill g:
{global_best_skill}

Instruction:
Combine the previous velocity, self-reflective direction, lessons from the personal best, and lessons from the global best.
Focus on generalizable improvements.
Do not copy the personal best or global best directly.
Preserve the agent's identity.
Return a concise natural-language velocity of at most {max_velocity_words} words.)";

constexpr std::string_view kSkillUpdateBody = R"(Agent identity to preserve:
{agent_identity}

Current skill s_i:
{current_skill}

Velocity v_i:
{velocity}

Instruction:
Rewrite the skill according to the velocity.
Keep the skill concise and general.
Preserve the agent's original role.
Remove redundant, overly specific, or contradictory instructions.
Use at most 10 bullet points and at most {max_skill_words} words.
Do not copy another skill verbatim.
Return only the updated skill.)";

// Walks a template body, calling on_text for literal runs and on_name for
// each placeholder.
template <typename OnText, typename OnName>
void scan(std::string_view body, OnText&& on_text, OnName&& on_name) {
  std::size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        on_text(std::string_view("{"));
        i += 2;
        continue;
      }
      auto close = body.find('}', i + 1);
      if (close == std::string_view::npos) {
        throw PromptError("unterminated placeholder at offset " + std::to_string(i));
      }
      auto name = body.substr(i + 1, close - i - 1);
      if (name.empty() || name.find('{') != std::string_view::npos) {
        throw PromptError("malformed placeholder at offset " + std::to_string(i));
      }
      on_name(name);
      i = close + 1;
    } else if (c == '}') {
      if (i + 1 < body.size() && body[i + 1] == '}') {
        on_text(std::string_view("}"));
        i += 2;
        continue;
      }
      throw PromptError("stray '}' at offset " + std::to_string(i));
    } else {
      auto next = body.find_first_of("{}", i);
      if (next == std::string_view::npos) next = body.size();
      on_text(body.substr(i, next - i));
      i = next;
    }
  }
}

}  // namespace

std::string_view to_string(Purpose purpose) {
  switch (purpose) {
    case Purpose::kSolve:
      return "solve";
    case Purpose::kReflect:
      return "reflect";
    case Purpose::kVelocity:
      return "velocity";
    case Purpose::kSkillUpdate:
      return "skill_update";
  }
  return "unknown";
}

PromptTemplate::PromptTemplate(Purpose purpose, std::string body)
    : purpose_(purpose), body_(std::move(body)) {
  scan(
      body_, [](std::string_view) {},
      [this](std::string_view name) { placeholders_.emplace(name); });
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
  for (const auto& name : placeholders_) {
    if (!bindings.contains(name)) {
      throw PromptError("missing binding for placeholder '" + name + "' in " +
                        std::string(to_string(purpose_)) + " prompt");
    }
  }
  for (const auto& [name, value] : bindings) {
    if (!placeholders_.contains(name)) {
      throw PromptError("unknown placeholder '" + name + "' for " +
                        std::string(to_string(purpose_)) + " prompt");
    }
  }
  std::string out;
  out.reserve(body_.size() + 256);
  scan(
      body_, [&](std::string_view text) { out.append(text); },
      [&](std::string_view name) { out.append(bindings.at(std::string(name))); });
  return out;
}

const PromptTemplate& PromptLibrary::get(Purpose purpose) const {
  switch (purpose) {
    case Purpose::kSolve:
      return solve;
    case Purpose::kReflect:
      return reflect;
    case Purpose::kVelocity:
      return velocity;
    case Purpose::kSkillUpdate:
      return skill_update;
  }
  throw PromptError("unknown purpose");
}

PromptLibrary make_prompt_library(std::string_view task_domain) {
  if (task_domain.find_first_of("{}") != std::string_view::npos) {
    throw PromptError("task domain must not contain braces");
  }
  std::string solve = "You are a " + std::string(task_domain) + " agent.\n\n";
  solve.append(kSolveBody);
  return PromptLibrary{
      PromptTemplate(Purpose::kSolve, std::move(solve)),
      PromptTemplate(Purpose::kReflect, std::string(kReflectBody)),
      PromptTemplate(Purpose::kVelocity, std::string(kVelocityBody)),
      PromptTemplate(Purpose::kSkillUpdate, std::string(kSkillUpdateBody)),
  };
}

std::vector<Skill> default_initial_skills() {
  return {
      {"Solve the problem step by step.", "Chain of Thought"},
      {"Before solving, step back and identify the general principle or problem type.",
       "Step-Back Prompting"},
      {"First solve the problem, then review and improve the solution.", "Self-Refine"},
      {"Solve while reflecting on assumptions and possible failure points.", "Reflection"},
  };
}

std::vector<Skill> resolve_initial_skills(const RunConfig& config) {
  if (!config.initial_skills.empty()) return config.initial_skills;
  auto defaults = default_initial_skills();
  std::vector<Skill> out;
  out.reserve(static_cast<std::size_t>(config.num_agents));
  for (int i = 0; i < config.num_agents; ++i) {
    out.push_back(defaults[static_cast<std::size_t>(i) % defaults.size()]);
  }
  return out;
}

}  // namespace agentpso
