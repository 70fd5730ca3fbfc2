// SPDX-License-Identifier: Apache-2.0
//
// The iteration engine. Each iteration every agent solves the same training
// batch with its current skill, reflects on its own and its peers' outcomes,
// folds that direction together with its previous velocity and the personal
// and global bests into a new velocity, and rewrites its skill along it. The
// rewritten skills are scored on the current validation subset and adopted
// as personal/global bests only when they beat the stored score by more
// than epsilon.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentpso/backend.hpp"
#include "agentpso/core.hpp"
#include "agentpso/data.hpp"
#include "agentpso/grading.hpp"
#include "agentpso/prompts.hpp"

namespace agentpso {

/// Everything the engine needs besides state.
struct SwarmContext {
  Backend& backend;
  const RunConfig& config;
  const PromptLibrary& prompts;
  Grader grader = grade;
};

/// What one agent sees after the solve phase: every agent's answers,
/// reasoning and correctness on the batch, and no peer skill text.
struct PeerObservation {
  int subject_agent = 0;
  std::vector<SolveRecord> own_records;
  std::vector<SolveRecord> peer_records;
};

/// Output of a generation step: the value that was stored, the model's raw
/// text, and why the step fell back (if it did).
template <typename T>
struct Generated {
  T value;
  std::string raw;
  std::optional<std::string> failure;
};

struct IterationOutcome {
  /// 1-based: the outcome of iteration t is stored as t + 1, matching the
  /// checkpoint written after it.
  int iteration = 0;
  int val_subset = 0;
  std::vector<std::vector<SolveRecord>> train_records;
  std::vector<Generated<Direction>> directions;
  std::vector<Generated<Velocity>> new_velocities;
  std::vector<Generated<Skill>> new_skills;
  std::vector<double> val_scores;
  std::vector<double> personal_best_scores;
  double global_best_score = 0.0;
  int global_best_agent = 0;
  bool global_best_changed = false;
  bool scheduler_rotated = false;
};

struct ScoredCandidate {
  int agent_id = 0;
  Skill skill;
  double score = 0.0;
};

/// Tolerance for comparing accuracy fractions, far below any score step.
inline constexpr double kScoreTolerance = 1e-9;

/// candidate - best > epsilon, strictly.
bool improves_by_margin(double candidate, double best, double epsilon);

struct ParsedSolution {
  std::string reasoning;
  std::string answer;
};

/// Reads reasoning/answer from the first balanced JSON object in the text
/// that parses and carries an "answer" field.
std::optional<ParsedSolution> parse_solution(std::string_view raw_model_text);

/// Solves `batch` with each skill (agent index = position). Returns
/// skills.size() x batch.size() graded records. Failed calls become empty,
/// incorrect records.
std::vector<std::vector<SolveRecord>> solve_batch(const SwarmContext& ctx,
                                                  const std::vector<Skill>& skills,
                                                  const std::vector<Problem>& batch,
                                                  int iteration = 0);

std::vector<std::vector<SolveRecord>> solve_batch(const SwarmContext& ctx, const SwarmState& state,
                                                  const std::vector<Problem>& batch);

PeerObservation build_observation(int agent_id,
                                  const std::vector<std::vector<SolveRecord>>& all_records);

/// JSON array of {agent_id, problem_id, reasoning, answer, correct}.
std::string serialize_records(const std::vector<SolveRecord>& records);

Generated<Direction> reflect(const SwarmContext& ctx, const AgentState& agent,
                             const PeerObservation& observation, int iteration = 0);

Generated<Velocity> velocity_update(const SwarmContext& ctx, const AgentState& agent,
                                    const Direction& direction, const Skill& global_best,
                                    int iteration = 0);

Generated<Skill> skill_update(const SwarmContext& ctx, const AgentState& agent,
                              const Velocity& new_velocity, int iteration = 0);

/// Fraction of `subset` solved correctly with `skill`.
double evaluate_skill(const SwarmContext& ctx, int agent_id, const Skill& skill,
                      const std::vector<Problem>& subset);

AgentState update_personal_best(AgentState agent, const Skill& candidate, double candidate_score,
                                double epsilon, int iteration);

/// Adopts the best candidate (lowest agent index on ties) when it beats
/// the stored global-best score by more than epsilon.
SwarmState update_global_best(SwarmState state, const std::vector<ScoredCandidate>& candidates,
                              double epsilon);

/// Scores the initial skills on `val_subset`; the best one (lowest index on
/// ties) becomes the global best without any margin.
SwarmState initialize(const SwarmContext& ctx, const std::vector<Skill>& initial_skills,
                      const std::vector<Problem>& val_subset);

/// Throws std::logic_error when a stored skill or velocity exceeds its budget.
void check_budgets(const SwarmState& state, const RunConfig& config);

std::pair<SwarmState, IterationOutcome> run_iteration(const SwarmContext& ctx,
                                                      const SwarmState& state,
                                                      const DatasetPools& pools);

nlohmann::ordered_json to_json(const IterationOutcome& outcome);

}  // namespace agentpso
