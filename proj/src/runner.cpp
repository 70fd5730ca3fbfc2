// SPDX-License-Identifier: Apache-2.0

#include "agentpso/runner.hpp"

#include <spdlog/spdlog.h>

#include "agentpso/config_json.hpp"

namespace agentpso {

DatasetPools load_pools(const RunConfig& config) {
  if (config.dataset_path.empty()) throw DataError("dataset_path is not set");
  if (!fs::exists(config.dataset_path)) {
    throw DataError("dataset file not found: " + config.dataset_path);
  }
  return split_pools(load_jsonl(config.dataset_path), config, config.seed);
}

std::vector<fs::path> export_skills(const fs::path& out_dir, const SwarmState& state,
                                    const std::string& source_run) {
  std::vector<fs::path> written;
  for (const auto& agent : state.agents) {
    auto path = out_dir / ("personal_best_" + std::to_string(agent.agent_id) + ".json");
    write_skill_file(path, SkillFile{agent.personal_best, source_run, agent.personal_best_iteration,
                                     agent.personal_best_score});
    written.push_back(path);
  }
  auto path = out_dir / "global_best.json";
  write_skill_file(path, SkillFile{state.global_best, source_run, state.iteration,
                                   state.global_best_score});
  written.push_back(path);
  return written;
}

RunResult run_optimization(const RunConfig& config, const RunOptions& options) {
  auto backend = make_backend(config.backend, config.max_parallel_calls);
  return run_optimization(config, *backend, options);
}

RunResult run_optimization(const RunConfig& requested, Backend& backend, const RunOptions& options) {
  if (requested.run_dir.empty()) throw ConfigError("run_dir", "is required");
  const fs::path run_dir = requested.run_dir;
  RunLock lock(run_dir);

  RunConfig config = validate_config(requested);
  RunResult result;
  SwarmState state;
  bool fresh = true;

  if (!list_checkpoints(run_dir).empty()) {
    if (!options.resume) {
      throw StoreError("run directory " + run_dir.string() +
                       " already holds checkpoints; pass resume to continue it");
    }
    auto loaded = load_latest(run_dir);
    config = loaded.checkpoint.config;
    config.run_dir = requested.run_dir;
    state = loaded.checkpoint.state;
    fresh = false;
    truncate_trajectory(run_dir, state.iteration + 1);
    spdlog::info("resuming {} from iteration {}", run_dir.string(), state.iteration);
    if (state.iteration >= config.num_iterations) {
      result.state = state;
      result.already_complete = true;
      return result;
    }
  } else {
    atomic_write(run_dir / "config.json", config_to_json(config).dump(2) + "\n");
    truncate_trajectory(run_dir, 0);
  }

  auto pools = load_pools(config);
  atomic_write(run_dir / "split_manifest.json", split_manifest(pools, config.seed).dump(2) + "\n");
  const ValidationScheduler scheduler(pools.validation, config.val_batch);

  auto prompts = make_prompt_library(config.task_domain);
  SwarmContext ctx{backend, config, prompts};

  if (fresh) {
    state = initialize(ctx, resolve_initial_skills(config), scheduler.current());
    spdlog::info("initial global best: agent {} with score {:.4f}", state.global_best_agent,
                 state.global_best_score);
  }
  check_budgets(state, config);

  while (state.iteration < config.num_iterations) {
    auto [next, outcome] = run_iteration(ctx, state, pools);
    append_trajectory(run_dir, to_json(outcome));
    RunCheckpoint checkpoint{config, next, scheduler.subset_count(), {}};
    result.checkpoints.push_back(save_checkpoint(run_dir, checkpoint));
    ++result.iterations_run;
    state = std::move(next);
    spdlog::info("iteration {}/{}: global best {:.4f} (agent {})", state.iteration,
                 config.num_iterations, state.global_best_score, state.global_best_agent);
    if (options.after_checkpoint && !options.after_checkpoint(state)) break;
  }

  if (state.iteration >= config.num_iterations) {
    export_skills(run_dir / "skills", state, run_dir.filename().string());
  }
  result.state = std::move(state);
  return result;
}

PopulationEvaluation evaluate_population(Backend& backend, const RunConfig& config,
                                         const std::vector<Skill>& skills,
                                         const std::vector<Problem>& problems) {
  auto prompts = make_prompt_library(config.task_domain);
  SwarmContext ctx{backend, config, prompts};
  PopulationEvaluation eval;
  eval.records = solve_batch(ctx, skills, problems);

  std::vector<ProblemAnswers> answers(problems.size());
  for (std::size_t p = 0; p < problems.size(); ++p) {
    answers[p].gold = problems[p].gold_answer;
    for (const auto& row : eval.records) answers[p].answers.push_back(row[p].answer);
  }
  eval.metrics = compute_metrics(answers, ctx.grader);
  return eval;
}

}  // namespace agentpso
