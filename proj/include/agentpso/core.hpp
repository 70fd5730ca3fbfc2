// SPDX-License-Identifier: Apache-2.0
//
// Domain types shared across the optimizer: skills, velocities, agent and
// swarm state, run configuration, and word-budget helpers.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agentpso {

/// A natural-language instruction that defines how an agent solves problems.
/// This is the particle "position" being optimized.
struct Skill {
  std::string text;
  std::string identity_label;

  bool operator==(const Skill&) const = default;
};

/// Natural-language description of how a skill should change next. Empty
/// text is the valid initial value.
struct Velocity {
  std::string text;

  bool operator==(const Velocity&) const = default;
};

/// Self-reflective improvement summary produced by comparing an agent's
/// outcomes with its peers' on the same batch.
struct Direction {
  std::string text;

  bool operator==(const Direction&) const = default;
};

struct AgentState {
  int agent_id = 0;
  Skill skill;
  Velocity velocity;
  Skill personal_best;
  double personal_best_score = 0.0;
  int personal_best_iteration = 0;

  bool operator==(const AgentState&) const = default;
};

struct SwarmState {
  std::vector<AgentState> agents;
  Skill global_best;
  double global_best_score = 0.0;
  int global_best_agent = 0;
  int iteration = 0;
  int scheduler_cursor = 0;
  std::uint64_t seed = 0;

  bool operator==(const SwarmState&) const = default;
};

enum class BackendKind { kMock, kHttp };

struct BackendSpec {
  BackendKind kind = BackendKind::kMock;
  std::string endpoint_url;
  std::string model_name;
  std::string credential_env_var = "OPENAI_API_KEY";
  int timeout_ms = 120000;
  int max_retries = 3;
  int backoff_ms = 500;
  std::optional<double> temperature;

  bool operator==(const BackendSpec&) const = default;
};

/// Every knob of an optimization run. Defaults are the reference
/// hyperparameters (4 agents, 10 iterations, 100/100 pools, batches 10/20,
/// margin 0.01, 200-word velocities, 1200-word skills).
struct RunConfig {
  int num_agents = 4;
  int num_iterations = 10;
  int train_pool = 100;
  int val_pool = 100;
  int test_pool = 200;
  int train_batch = 10;
  int val_batch = 20;
  double epsilon = 0.01;
  int max_velocity_words = 200;
  int max_skill_words = 1200;
  int max_parallel_calls = 4;
  std::uint64_t seed = 0;
  BackendSpec backend;
  std::string dataset_path;
  std::string dataset_name;
  std::string run_dir;
  std::string task_domain = "mathematics competition";
  /// Empty means the four built-in reasoning styles, cycled if num_agents != 4.
  std::vector<Skill> initial_skills;

  bool operator==(const RunConfig&) const = default;
};

/// Raised by validate_config; field() names the offending setting.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Number of maximal runs of non-whitespace characters.
std::size_t word_count(std::string_view text);

/// Returns text unchanged when it fits in max_words; otherwise the first
/// max_words words joined by single spaces.
std::string enforce_length(std::string_view text, std::size_t max_words);

RunConfig validate_config(RunConfig config);

}  // namespace agentpso
