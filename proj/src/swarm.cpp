// SPDX-License-Identifier: Apache-2.0

#include "agentpso/swarm.hpp"

#include <stdexcept>

#include <spdlog/spdlog.h>

#include "parallel.hpp"

namespace agentpso {

namespace {

using ordered_json = nlohmann::ordered_json;

struct Solver {
  int agent_id;
  const Skill* skill;
};

ModelRequest make_request(Purpose purpose, std::string user_text, int max_words, int agent_id,
                          int iteration) {
  ModelRequest request;
  request.purpose = purpose;
  request.user_text = std::move(user_text);
  request.max_output_words = max_words;
  request.agent_id = agent_id;
  request.iteration = iteration;
  return request;
}

SolveRecord solve_one(const SwarmContext& ctx, const Solver& solver, const Problem& problem,
                      int iteration) {
  SolveRecord record;
  record.agent_id = solver.agent_id;
  record.problem_id = problem.id;

  auto prompt = ctx.prompts.solve.render({{"skill_text", solver.skill->text},
                                          {"question", problem.question},
                                          {"agent_id", std::to_string(solver.agent_id)}});
  auto request = make_request(Purpose::kSolve, std::move(prompt), 0, solver.agent_id, iteration);

  // One re-prompt when the reply has no usable JSON object.
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto response = ctx.backend.complete(request);
      if (auto parsed = parse_solution(response.text)) {
        record.reasoning = std::move(parsed->reasoning);
        record.answer = normalize_answer(parsed->answer);
        record.correct = ctx.grader(record.answer, problem.gold_answer);
        return record;
      }
      spdlog::warn("agent {} problem {}: no JSON answer in reply (attempt {})", solver.agent_id,
                   problem.id, attempt + 1);
    } catch (const BackendError& e) {
      spdlog::warn("agent {} problem {}: solve call failed: {}", solver.agent_id, problem.id,
                   e.what());
      break;
    }
  }
  return record;
}

std::vector<std::vector<SolveRecord>> solve_grid(const SwarmContext& ctx,
                                                 const std::vector<Solver>& solvers,
                                                 const std::vector<Problem>& batch, int iteration) {
  if (batch.empty()) throw std::invalid_argument("solve_batch: batch is empty");
  std::vector<std::vector<SolveRecord>> records(solvers.size(),
                                                std::vector<SolveRecord>(batch.size()));
  detail::parallel_for(solvers.size() * batch.size(), ctx.config.max_parallel_calls,
                       [&](std::size_t k) {
                         auto a = k / batch.size();
                         auto p = k % batch.size();
                         records[a][p] = solve_one(ctx, solvers[a], batch[p], iteration);
                       });
  return records;
}

double fraction_correct(const std::vector<SolveRecord>& records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.correct ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

bool all_correct(const std::vector<SolveRecord>& records) {
  for (const auto& r : records) {
    if (!r.correct) return false;
  }
  return !records.empty();
}

template <typename T>
ordered_json generated_json(const Generated<T>& g, const std::string& text) {
  ordered_json out;
  out["text"] = text;
  out["raw"] = g.raw;
  out["failure"] = g.failure ? ordered_json(*g.failure) : ordered_json(nullptr);
  return out;
}

// Rough scan for the end of a JSON object starting at `open`, honoring
// strings and escapes. Returns npos when unbalanced.
std::size_t balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::string field_text(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_null()) return {};
  return value.dump();
}

}  // namespace

bool improves_by_margin(double candidate, double best, double epsilon) {
  return (candidate - best) - epsilon > kScoreTolerance;
}

std::optional<ParsedSolution> parse_solution(std::string_view text) {
  for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    auto close = balanced_end(text, open);
    if (close == std::string_view::npos) continue;
    auto doc = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("answer")) continue;
    ParsedSolution parsed;
    parsed.answer = field_text(doc["answer"]);
    if (doc.contains("reasoning")) parsed.reasoning = field_text(doc["reasoning"]);
    return parsed;
  }
  return std::nullopt;
}

std::vector<std::vector<SolveRecord>> solve_batch(const SwarmContext& ctx,
                                                  const std::vector<Skill>& skills,
                                                  const std::vector<Problem>& batch, int iteration) {
  std::vector<Solver> solvers;
  for (std::size_t i = 0; i < skills.size(); ++i) {
    solvers.push_back({static_cast<int>(i), &skills[i]});
  }
  return solve_grid(ctx, solvers, batch, iteration);
}

std::vector<std::vector<SolveRecord>> solve_batch(const SwarmContext& ctx, const SwarmState& state,
                                                  const std::vector<Problem>& batch) {
  std::vector<Solver> solvers;
  for (const auto& agent : state.agents) solvers.push_back({agent.agent_id, &agent.skill});
  return solve_grid(ctx, solvers, batch, state.iteration);
}

PeerObservation build_observation(int agent_id,
                                  const std::vector<std::vector<SolveRecord>>& all_records) {
  PeerObservation obs;
  obs.subject_agent = agent_id;
  bool found = false;
  for (const auto& row : all_records) {
    if (row.empty()) continue;
    if (row.front().agent_id == agent_id) {
      obs.own_records = row;
      found = true;
    } else {
      obs.peer_records.insert(obs.peer_records.end(), row.begin(), row.end());
    }
  }
  if (!found) {
    throw std::invalid_argument("build_observation: no records for agent " +
                                std::to_string(agent_id));
  }
  return obs;
}

std::string serialize_records(const std::vector<SolveRecord>& records) {
  auto arr = ordered_json::array();
  for (const auto& r : records) {
    ordered_json item;
    item["agent_id"] = r.agent_id;
    item["problem_id"] = r.problem_id;
    item["reasoning"] = r.reasoning;
    item["answer"] = r.answer;
    item["correct"] = r.correct;
    arr.push_back(std::move(item));
  }
  return arr.dump(2);
}

Generated<Direction> reflect(const SwarmContext& ctx, const AgentState& agent,
                             const PeerObservation& observation, int iteration) {
  auto prompt = ctx.prompts.reflect.render({
      {"current_skill", agent.skill.text},
      {"own_outputs_json", serialize_records(observation.own_records)},
      {"peer_outputs_json", serialize_records(observation.peer_records)},
  });
  const auto budget = ctx.config.max_velocity_words;
  try {
    auto response = ctx.backend.complete(
        make_request(Purpose::kReflect, std::move(prompt), budget, agent.agent_id, iteration));
    auto enforced = enforce_length(response.text, static_cast<std::size_t>(budget));
    return {Direction{std::move(enforced)}, std::move(response.text), std::nullopt};
  } catch (const BackendError& e) {
    spdlog::warn("agent {}: reflect failed, continuing without a direction: {}", agent.agent_id,
                 e.what());
    return {Direction{}, {}, e.what()};
  }
}

Generated<Velocity> velocity_update(const SwarmContext& ctx, const AgentState& agent,
                                    const Direction& direction, const Skill& global_best,
                                    int iteration) {
  const auto budget = ctx.config.max_velocity_words;
  auto prompt = ctx.prompts.velocity.render({
      {"agent_identity", agent.skill.identity_label},
      {"previous_velocity", agent.velocity.text},
      {"direction", direction.text},
      {"current_skill", agent.skill.text},
      {"personal_best_skill", agent.personal_best.text},
      {"global_best_skill", global_best.text},
      {"max_velocity_words", std::to_string(budget)},
  });
  try {
    auto response = ctx.backend.complete(
        make_request(Purpose::kVelocity, std::move(prompt), budget, agent.agent_id, iteration));
    auto enforced = enforce_length(response.text, static_cast<std::size_t>(budget));
    return {Velocity{std::move(enforced)}, std::move(response.text), std::nullopt};
  } catch (const BackendError& e) {
    spdlog::warn("agent {}: velocity update failed, keeping previous velocity: {}", agent.agent_id,
                 e.what());
    return {agent.velocity, {}, e.what()};
  }
}

Generated<Skill> skill_update(const SwarmContext& ctx, const AgentState& agent,
                              const Velocity& new_velocity, int iteration) {
  const auto budget = ctx.config.max_skill_words;
  auto prompt = ctx.prompts.skill_update.render({
      {"agent_identity", agent.skill.identity_label},
      {"current_skill", agent.skill.text},
      {"velocity", new_velocity.text},
      {"max_skill_words", std::to_string(budget)},
  });
  try {
    auto response = ctx.backend.complete(
        make_request(Purpose::kSkillUpdate, std::move(prompt), budget, agent.agent_id, iteration));
    auto enforced = enforce_length(response.text, static_cast<std::size_t>(budget));
    if (word_count(enforced) == 0) {
      return {agent.skill, std::move(response.text), "empty skill text"};
    }
    return {Skill{std::move(enforced), agent.skill.identity_label}, std::move(response.text),
            std::nullopt};
  } catch (const BackendError& e) {
    spdlog::warn("agent {}: skill update failed, keeping current skill: {}", agent.agent_id,
                 e.what());
    return {agent.skill, {}, e.what()};
  }
}

double evaluate_skill(const SwarmContext& ctx, int agent_id, const Skill& skill,
                      const std::vector<Problem>& subset) {
  auto records = solve_grid(ctx, {Solver{agent_id, &skill}}, subset, 0);
  return fraction_correct(records.front());
}

AgentState update_personal_best(AgentState agent, const Skill& candidate, double candidate_score,
                                double epsilon, int iteration) {
  if (improves_by_margin(candidate_score, agent.personal_best_score, epsilon)) {
    agent.personal_best = candidate;
    agent.personal_best_score = candidate_score;
    agent.personal_best_iteration = iteration;
  }
  return agent;
}

SwarmState update_global_best(SwarmState state, const std::vector<ScoredCandidate>& candidates,
                              double epsilon) {
  if (candidates.empty()) return state;
  const ScoredCandidate* best = &candidates.front();
  for (const auto& c : candidates) {
    if (c.score > best->score || (c.score == best->score && c.agent_id < best->agent_id)) best = &c;
  }
  if (improves_by_margin(best->score, state.global_best_score, epsilon)) {
    state.global_best = best->skill;
    state.global_best_score = best->score;
    state.global_best_agent = best->agent_id;
  }
  return state;
}

SwarmState initialize(const SwarmContext& ctx, const std::vector<Skill>& initial_skills,
                      const std::vector<Problem>& val_subset) {
  if (static_cast<int>(initial_skills.size()) != ctx.config.num_agents) {
    throw std::invalid_argument("initialize: expected " + std::to_string(ctx.config.num_agents) +
                                " initial skills, got " + std::to_string(initial_skills.size()));
  }
  auto records = solve_batch(ctx, initial_skills, val_subset, 0);

  SwarmState state;
  state.seed = ctx.config.seed;
  for (std::size_t i = 0; i < initial_skills.size(); ++i) {
    AgentState agent;
    agent.agent_id = static_cast<int>(i);
    agent.skill = initial_skills[i];
    agent.personal_best = initial_skills[i];
    agent.personal_best_score = fraction_correct(records[i]);
    agent.personal_best_iteration = 0;
    state.agents.push_back(std::move(agent));
  }
  // Plain argmax: no margin applies to the first global best.
  std::size_t best = 0;
  for (std::size_t i = 1; i < state.agents.size(); ++i) {
    if (state.agents[i].personal_best_score > state.agents[best].personal_best_score) best = i;
  }
  state.global_best = state.agents[best].skill;
  state.global_best_score = state.agents[best].personal_best_score;
  state.global_best_agent = static_cast<int>(best);
  return state;
}

void check_budgets(const SwarmState& state, const RunConfig& config) {
  const auto skill_budget = static_cast<std::size_t>(config.max_skill_words);
  const auto velocity_budget = static_cast<std::size_t>(config.max_velocity_words);
  auto fail = [](const std::string& what) { throw std::logic_error("word budget violated: " + what); };
  for (const auto& a : state.agents) {
    if (word_count(a.skill.text) > skill_budget) fail("skill of agent " + std::to_string(a.agent_id));
    if (word_count(a.personal_best.text) > skill_budget) {
      fail("personal best of agent " + std::to_string(a.agent_id));
    }
    if (word_count(a.velocity.text) > velocity_budget) {
      fail("velocity of agent " + std::to_string(a.agent_id));
    }
  }
  if (word_count(state.global_best.text) > skill_budget) fail("global best");
}

std::pair<SwarmState, IterationOutcome> run_iteration(const SwarmContext& ctx,
                                                      const SwarmState& state,
                                                      const DatasetPools& pools) {
  const auto& config = ctx.config;
  const auto n = state.agents.size();
  ValidationScheduler scheduler(pools.validation, config.val_batch, state.scheduler_cursor);

  IterationOutcome outcome;
  outcome.iteration = state.iteration + 1;
  outcome.val_subset = scheduler.cursor();

  auto batch = sample_train_batch(pools, state.iteration, state.seed, config.train_batch);
  outcome.train_records = solve_batch(ctx, state, batch);

  outcome.directions.resize(n);
  outcome.new_velocities.resize(n);
  outcome.new_skills.resize(n);
  // d -> v -> s is sequential per agent; agents proceed independently.
  detail::parallel_for(n, config.max_parallel_calls, [&](std::size_t i) {
    const auto& agent = state.agents[i];
    auto observation = build_observation(agent.agent_id, outcome.train_records);
    outcome.directions[i] = reflect(ctx, agent, observation, state.iteration);
    outcome.new_velocities[i] =
        velocity_update(ctx, agent, outcome.directions[i].value, state.global_best, state.iteration);
    outcome.new_skills[i] = skill_update(ctx, agent, outcome.new_velocities[i].value, state.iteration);
  });

  std::vector<Solver> solvers;
  for (std::size_t i = 0; i < n; ++i) {
    solvers.push_back({state.agents[i].agent_id, &outcome.new_skills[i].value});
  }
  auto val_records = solve_grid(ctx, solvers, scheduler.current(), state.iteration);

  SwarmState next = state;
  std::vector<ScoredCandidate> candidates;
  bool any_perfect = false;
  for (std::size_t i = 0; i < n; ++i) {
    double score = fraction_correct(val_records[i]);
    any_perfect = any_perfect || all_correct(val_records[i]);
    outcome.val_scores.push_back(score);

    const Skill& candidate = outcome.new_skills[i].value;
    auto& agent = next.agents[i];
    agent.skill = candidate;
    agent.velocity = outcome.new_velocities[i].value;
    agent = update_personal_best(agent, candidate, score, config.epsilon, state.iteration + 1);
    outcome.personal_best_scores.push_back(agent.personal_best_score);
    candidates.push_back({agent.agent_id, agent.skill, score});
  }
  next = update_global_best(std::move(next), candidates, config.epsilon);
  auto rotated = scheduler.advanced(any_perfect);
  next.scheduler_cursor = rotated.cursor();
  next.iteration = state.iteration + 1;

  outcome.global_best_score = next.global_best_score;
  outcome.global_best_agent = next.global_best_agent;
  outcome.global_best_changed = next.global_best_score != state.global_best_score;
  outcome.scheduler_rotated = rotated.cursor() != scheduler.cursor();

  check_budgets(next, config);
  return {std::move(next), std::move(outcome)};
}

ordered_json to_json(const IterationOutcome& outcome) {
  ordered_json out;
  out["iteration"] = outcome.iteration;
  out["val_subset"] = outcome.val_subset;
  auto agents = ordered_json::array();
  for (std::size_t i = 0; i < outcome.new_skills.size(); ++i) {
    ordered_json agent;
    agent["agent_id"] = i;
    auto records = ordered_json::array();
    for (const auto& r : outcome.train_records.at(i)) {
      records.push_back({{"problem_id", r.problem_id},
                         {"reasoning", r.reasoning},
                         {"answer", r.answer},
                         {"correct", r.correct}});
    }
    agent["train_records"] = std::move(records);
    agent["direction"] = generated_json(outcome.directions[i], outcome.directions[i].value.text);
    agent["velocity"] = generated_json(outcome.new_velocities[i], outcome.new_velocities[i].value.text);
    agent["skill"] = generated_json(outcome.new_skills[i], outcome.new_skills[i].value.text);
    agent["val_score"] = outcome.val_scores.at(i);
    agent["personal_best_score"] = outcome.personal_best_scores.at(i);
    agents.push_back(std::move(agent));
  }
  out["agents"] = std::move(agents);
  out["global_best_score"] = outcome.global_best_score;
  out["global_best_agent"] = outcome.global_best_agent;
  out["global_best_changed"] = outcome.global_best_changed;
  out["scheduler_rotated"] = outcome.scheduler_rotated;
  return out;
}

}  // namespace agentpso
