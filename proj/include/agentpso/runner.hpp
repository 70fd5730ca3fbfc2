// SPDX-License-Identifier: Apache-2.0
//
// Drives a whole optimization run inside a run directory, checkpointing
// after every iteration, and evaluates exported skills on a dataset split.

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "agentpso/backend.hpp"
#include "agentpso/core.hpp"
#include "agentpso/data.hpp"
#include "agentpso/store.hpp"
#include "agentpso/swarm.hpp"

namespace agentpso {

struct RunOptions {
  bool resume = false;
  /// Called after each checkpoint is written; returning false stops the run
  /// there as if the process had been interrupted.
  std::function<bool(const SwarmState&)> after_checkpoint;
};

struct RunResult {
  SwarmState state;
  bool already_complete = false;
  int iterations_run = 0;
  std::vector<fs::path> checkpoints;
};

/// Uses config.run_dir. When resuming, the config snapshot stored in the
/// latest checkpoint is authoritative.
RunResult run_optimization(const RunConfig& config, const RunOptions& options = {});

/// Same, with a caller-supplied backend.
RunResult run_optimization(const RunConfig& config, Backend& backend,
                           const RunOptions& options = {});

/// Loads the dataset and splits it exactly as an optimization run would.
DatasetPools load_pools(const RunConfig& config);

/// Writes skills/personal_best_<i>.json and skills/global_best.json.
std::vector<fs::path> export_skills(const fs::path& out_dir, const SwarmState& state,
                                    const std::string& source_run);

struct PopulationEvaluation {
  MetricsReport metrics;
  std::vector<std::vector<SolveRecord>> records;
};

/// Runs each skill as an independent agent over `problems` and scores the
/// population by majority vote, pass@k and avg@k.
PopulationEvaluation evaluate_population(Backend& backend, const RunConfig& config,
                                         const std::vector<Skill>& skills,
                                         const std::vector<Problem>& problems);

}  // namespace agentpso
