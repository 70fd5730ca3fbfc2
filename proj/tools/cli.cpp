// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "agentpso/config_json.hpp"
#include "agentpso/runner.hpp"

namespace agentpso::cli {

namespace {

struct OptimizeArgs {
  std::string config;
  std::string run_dir;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  bool resume = false;
};

struct EvaluateArgs {
  std::vector<std::string> skills;
  std::string dataset;
  std::string split = "test";
  std::string config;
  std::string backend;
  std::string out = "evaluation";
  std::string method;
  std::string dataset_name;
  bool allow_k = false;
};

struct GenMockArgs {
  std::string out;
  std::string config;
  std::string config_out;
  int categories = 5;
  int per_category = 80;
  std::optional<std::uint64_t> seed;
};

RunConfig config_or_defaults(const std::string& path) {
  if (path.empty()) return validate_config(RunConfig{});
  return load_config_file(path);
}

void print_state_summary(const SwarmState& state, std::ostream& out) {
  out << fmt::format("global best score: {:.4f} (agent {})\n", state.global_best_score,
                     state.global_best_agent);
  for (const auto& agent : state.agents) {
    out << fmt::format("agent {} personal best: {:.4f} (iteration {})\n", agent.agent_id,
                       agent.personal_best_score, agent.personal_best_iteration);
  }
}

int cmd_optimize(const OptimizeArgs& args, std::ostream& out) {
  RunConfig config;
  if (!args.config.empty()) {
    config = load_config_file(args.config);
  } else if (args.resume && !args.run_dir.empty() && fs::exists(fs::path(args.run_dir) / "config.json")) {
    config = load_config_file(fs::path(args.run_dir) / "config.json");
  } else if (!args.resume) {
    throw ConfigError("config", "--config is required to start a run");
  }
  if (!args.run_dir.empty()) config.run_dir = args.run_dir;
  if (!args.dataset.empty()) config.dataset_path = args.dataset;
  if (args.seed) config.seed = *args.seed;
  if (args.iterations) config.num_iterations = *args.iterations;
  config = validate_config(std::move(config));
  if (config.run_dir.empty()) throw ConfigError("run_dir", "set it in the config or pass --run-dir");

  RunOptions options;
  options.resume = args.resume;
  auto result = run_optimization(config, options);
  if (result.already_complete) {
    out << "run already complete at iteration " << result.state.iteration << "\n";
  } else {
    out << "completed " << result.iterations_run << " iteration(s); state at iteration "
        << result.state.iteration << "\n";
  }
  print_state_summary(result.state, out);
  return 0;
}

std::vector<fs::path> expand_skill_paths(const std::vector<std::string>& inputs) {
  std::vector<fs::path> paths;
  for (const auto& input : inputs) {
    fs::path p(input);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        auto name = entry.path().filename().string();
        if (name.starts_with("personal_best_") && name.ends_with(".json")) found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end(), [](const fs::path& a, const fs::path& b) {
        auto index = [](const fs::path& f) {
          auto stem = f.stem().string();
          return std::stoi(stem.substr(std::string("personal_best_").size()));
        };
        return index(a) < index(b);
      });
      if (found.empty()) throw StoreError("no personal_best_*.json files in " + p.string());
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      if (!fs::exists(p)) throw StoreError("skill file not found: " + p.string());
      paths.push_back(p);
    }
  }
  return paths;
}

std::vector<Problem> select_split(const RunConfig& config, const std::string& split) {
  if (config.dataset_path.empty()) throw DataError("no dataset given (--dataset or dataset_path)");
  if (!fs::exists(config.dataset_path)) {
    throw DataError("dataset file not found: " + config.dataset_path);
  }
  auto problems = load_jsonl(config.dataset_path);
  if (split == "all") return problems;
  auto pools = split_pools(problems, config, config.seed);
  if (split == "train") return pools.train;
  if (split == "validation") return pools.validation;
  if (split == "test") return pools.test;
  throw ConfigError("split", "must be one of train, validation, test, all");
}

int cmd_evaluate(const EvaluateArgs& args, bool transfer, std::ostream& out) {
  RunConfig config = config_or_defaults(args.config);
  if (!args.dataset.empty()) config.dataset_path = args.dataset;
  if (!args.backend.empty()) {
    std::ifstream in(args.backend);
    if (!in) throw ConfigError("backend", "cannot open backend spec " + args.backend);
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("backend", "malformed JSON in " + args.backend);
    config.backend = backend_spec_from_json(doc.contains("backend") ? doc["backend"] : doc);
  }

  auto paths = expand_skill_paths(args.skills);
  std::vector<Skill> skills;
  std::vector<std::string> source_runs;
  for (const auto& p : paths) {
    auto file = read_skill_file(p);
    skills.push_back(file.skill);
    if (std::find(source_runs.begin(), source_runs.end(), file.source_run) == source_runs.end()) {
      source_runs.push_back(file.source_run);
    }
  }
  if (static_cast<int>(skills.size()) != config.num_agents && !args.allow_k) {
    throw ConfigError("skills", fmt::format("expected {} skills, got {} (use --allow-k to evaluate "
                                            "a different population size)",
                                            config.num_agents, skills.size()));
  }
  // The evaluated skills replace the population; its starting skills do not apply.
  config.initial_skills.clear();
  config.num_agents = std::max(2, static_cast<int>(skills.size()));
  config = validate_config(std::move(config));

  auto problems = select_split(config, args.split);
  if (problems.empty()) throw DataError("split \"" + args.split + "\" is empty");

  auto backend = make_backend(config.backend, config.max_parallel_calls);
  auto eval = evaluate_population(*backend, config, skills, problems);

  std::string source = source_runs.empty() ? "unknown" : source_runs.front();
  for (std::size_t i = 1; i < source_runs.size(); ++i) source += "+" + source_runs[i];

  EvaluationResult result;
  result.method = !args.method.empty() ? args.method : (transfer ? "transfer:" + source : "AgentPSO");
  result.dataset = !args.dataset_name.empty() ? args.dataset_name
                   : !config.dataset_name.empty() ? config.dataset_name
                                                  : fs::path(config.dataset_path).stem().string();
  result.split = args.split;
  result.metrics = eval.metrics;
  result.num_problems = static_cast<int>(problems.size());
  ordered_json backend_meta;
  backend_meta["kind"] = to_string(config.backend.kind);
  backend_meta["model_name"] = config.backend.model_name;
  backend_meta["endpoint_url"] = config.backend.endpoint_url;
  result.metadata["backend"] = backend_meta;
  result.metadata["dataset_path"] = config.dataset_path;
  result.metadata["seed"] = config.seed;
  auto skill_meta = ordered_json::array();
  for (const auto& p : paths) skill_meta.push_back(p.string());
  result.metadata["skills"] = skill_meta;
  result.metadata["source_runs"] = source_runs;
  emit_report(args.out, {result});

  const auto& m = eval.metrics;
  out << fmt::format("{} on {} ({} problems, k={}): accuracy {:.4f}  pass@k {:.4f}  avg@k {:.4f}\n",
                     result.method, result.dataset, problems.size(), skills.size(), m.accuracy,
                     m.pass_at_k, m.avg_at_k);
  out << "report written to " << (fs::path(args.out) / "report.json").string() << "\n";
  return 0;
}

void require_non_decreasing(const std::vector<double>& series, const std::string& what) {
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i] < series[i - 1]) {
      throw StoreError(fmt::format("{} decreases at row {}: {} -> {}", what, i + 1, series[i - 1],
                                   series[i]));
    }
  }
}

int cmd_report(const std::string& run_dir_arg, std::ostream& out) {
  const fs::path run_dir(run_dir_arg);
  auto lines = read_trajectory(run_dir);
  if (lines.empty()) throw StoreError("trajectory log in " + run_dir.string() + " is empty");
  const auto agents = lines.front().at("agents").size();

  std::string csv = "iteration,val_subset";
  for (std::size_t i = 0; i < agents; ++i) csv += fmt::format(",agent_{}_val", i);
  for (std::size_t i = 0; i < agents; ++i) csv += fmt::format(",agent_{}_best", i);
  csv += ",global_best,global_best_agent,scheduler_rotated\n";

  std::string evolution = "iteration agent words val_score\n";
  std::vector<double> global_series;
  std::vector<std::vector<double>> best_series(agents);
  int previous_iteration = 0;
  for (const auto& line : lines) {
    int iteration = line.at("iteration").get<int>();
    if (iteration <= previous_iteration) {
      throw StoreError(fmt::format("trajectory iterations are not increasing at {}", iteration));
    }
    previous_iteration = iteration;
    const auto& rows = line.at("agents");
    csv += fmt::format("{},{}", iteration, line.at("val_subset").get<int>());
    for (const auto& a : rows) csv += fmt::format(",{:.4f}", a.at("val_score").get<double>());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double best = rows[i].at("personal_best_score").get<double>();
      best_series[i].push_back(best);
      csv += fmt::format(",{:.4f}", best);
    }
    double global = line.at("global_best_score").get<double>();
    global_series.push_back(global);
    csv += fmt::format(",{:.4f},{},{}\n", global, line.at("global_best_agent").get<int>(),
                       line.at("scheduler_rotated").get<bool>() ? 1 : 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto text = rows[i].at("skill").at("text").get<std::string>();
      evolution += fmt::format("{} {} {} {:.4f}\n", iteration, i, word_count(text),
                               rows[i].at("val_score").get<double>());
    }
  }
  require_non_decreasing(global_series, "global best score");
  for (std::size_t i = 0; i < agents; ++i) {
    require_non_decreasing(best_series[i], fmt::format("agent {} personal best score", i));
  }

  atomic_write(run_dir / "scores.csv", csv);
  atomic_write(run_dir / "skill_evolution.txt", evolution);
  auto latest = load_latest(run_dir);
  auto skill_files = export_skills(run_dir / "skills", latest.checkpoint.state,
                                   fs::absolute(run_dir).filename().string());

  out << fmt::format("{} iteration(s) summarized into {}\n", lines.size(),
                     (run_dir / "scores.csv").string());
  for (const auto& p : skill_files) out << "skill file: " << p.string() << "\n";
  return 0;
}

int cmd_dump_prompts(const std::string& out_dir, const std::string& task_domain, std::ostream& out) {
  auto library = make_prompt_library(task_domain);
  for (auto purpose : {Purpose::kSolve, Purpose::kReflect, Purpose::kVelocity, Purpose::kSkillUpdate}) {
    auto path = fs::path(out_dir) / (std::string(to_string(purpose)) + ".txt");
    atomic_write(path, library.get(purpose).body() + "\n");
    out << path.string() << "\n";
  }
  return 0;
}

int cmd_gen_mock(const GenMockArgs& args, std::ostream& out) {
  RunConfig config = config_or_defaults(args.config);
  if (args.seed) config.seed = *args.seed;
  auto problems = generate_mock_dataset(mock_world_spec(config, args.categories, args.per_category));
  fs::path path(args.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_jsonl(path, problems);
  out << fmt::format("wrote {} mock problems to {}\n", problems.size(), path.string());

  if (!args.config_out.empty()) {
    config.backend = BackendSpec{};
    config.dataset_path = fs::absolute(path).string();
    config.dataset_name = "mock";
    config.initial_skills.clear();
    auto defaults = default_initial_skills();
    for (int i = 0; i < config.num_agents; ++i) {
      const int token = 1 + (i % std::max(1, args.categories - 1));
      config.initial_skills.push_back(
          {fmt::format("Apply technique T{}.", token),
           defaults[static_cast<std::size_t>(i) % defaults.size()].identity_label});
    }
    config = validate_config(std::move(config));
    atomic_write(args.config_out, config_to_json(config).dump(2) + "\n");
    out << "wrote mock run config to " << args.config_out << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Swarm optimizer for natural-language agent skills", "agentpso"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  OptimizeArgs optimize;
  auto* opt = app.add_subcommand("optimize", "Run or resume skill optimization");
  opt->add_option("--config", optimize.config, "Run config JSON");
  opt->add_option("--run-dir", optimize.run_dir, "Run directory (overrides config)");
  opt->add_option("--dataset", optimize.dataset, "Dataset JSONL (overrides config)");
  opt->add_option("--seed", optimize.seed, "Seed (overrides config)");
  opt->add_option("--iterations", optimize.iterations, "Iterations (overrides config)");
  opt->add_flag("--resume", optimize.resume, "Continue from the latest checkpoint");

  EvaluateArgs evaluate;
  auto* eval = app.add_subcommand("evaluate", "Score exported skills as an agent population");
  EvaluateArgs transfer;
  auto* xfer = app.add_subcommand("transfer", "Evaluate skills on another dataset or backend");
  for (auto [cmd, a] : {std::pair{eval, &evaluate}, std::pair{xfer, &transfer}}) {
    cmd->add_option("--skills", a->skills, "Skill files or directories of personal_best_*.json")
        ->required();
    cmd->add_option("--dataset", a->dataset, "Dataset JSONL");
    cmd->add_option("--split", a->split, "train, validation, test or all");
    cmd->add_option("--config", a->config, "Run config JSON for pool sizes, seed, backend");
    cmd->add_option("--backend", a->backend, "Backend spec JSON (overrides config)");
    cmd->add_option("--out", a->out, "Directory for report.json and report.csv");
    cmd->add_option("--method", a->method, "Method label for the report row");
    cmd->add_option("--dataset-name", a->dataset_name, "Dataset label for the report row");
    cmd->add_flag("--allow-k", a->allow_k, "Accept a skill count different from num_agents");
  }

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize a run's trajectory");
  report->add_option("--run-dir", report_dir, "Run directory")->required();

  std::string prompts_dir = "prompts";
  std::string task_domain(kDefaultTaskDomain);
  auto* dump = app.add_subcommand("dump-prompts", "Write the prompt templates to files");
  dump->add_option("--out", prompts_dir, "Output directory");
  dump->add_option("--task-domain", task_domain, "Domain named in the solve prompt");

  GenMockArgs gen;
  auto* mock = app.add_subcommand("gen-mock", "Generate an offline token-world dataset");
  mock->add_option("--out", gen.out, "Output JSONL path")->required();
  mock->add_option("--categories", gen.categories, "Number of token categories");
  mock->add_option("--per-category", gen.per_category, "Problems per category");
  mock->add_option("--seed", gen.seed, "Run seed the layout is built for");
  mock->add_option("--config", gen.config, "Run config supplying pool sizes and seed");
  mock->add_option("--config-out", gen.config_out, "Also write a ready-to-run mock config here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (*opt) return cmd_optimize(optimize, out);
    if (*eval) return cmd_evaluate(evaluate, false, out);
    if (*xfer) return cmd_evaluate(transfer, true, out);
    if (*report) return cmd_report(report_dir, out);
    if (*dump) return cmd_dump_prompts(prompts_dir, task_domain, out);
    if (*mock) return cmd_gen_mock(gen, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace agentpso::cli
