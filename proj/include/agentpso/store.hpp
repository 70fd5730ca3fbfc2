// SPDX-License-Identifier: Apache-2.0
//
// Run-directory persistence:
//
//   config.json            config snapshot
//   split_manifest.json    problem ids per pool
//   trajectory.jsonl       one IterationOutcome per line
//   iter_NNNN/state.json   checkpoint after iteration NNNN
//   report.{json,csv}      evaluation metrics
//   lock                   single-writer lock (flock)

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentpso/core.hpp"
#include "agentpso/grading.hpp"

namespace agentpso {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunCheckpoint {
  RunConfig config;
  SwarmState state;
  int subset_count = 0;
  std::string digest;  // "sha256:<hex>" of the payload
};

ordered_json to_json(const SwarmState& state);
SwarmState swarm_state_from_json(const nlohmann::json& doc);

std::string sha256_hex(std::string_view data);

/// Writes to a sibling temp file and renames it over `path`.
void atomic_write(const fs::path& path, std::string_view content);

fs::path checkpoint_path(const fs::path& run_dir, int iteration);

/// Serialized checkpoint text exactly as written to disk.
std::string serialize_checkpoint(const RunCheckpoint& checkpoint);

/// Writes iter_NNNN/state.json atomically and verifies it by reading back.
/// Returns the written path and fills in checkpoint.digest.
fs::path save_checkpoint(const fs::path& run_dir, RunCheckpoint& checkpoint);

/// Throws StoreError on unreadable, malformed, or digest-mismatched files.
RunCheckpoint load_checkpoint(const fs::path& path);

struct LoadedCheckpoint {
  RunCheckpoint checkpoint;
  fs::path path;
  std::vector<std::string> skipped;  // warnings for corrupt checkpoints
};

/// Highest-index valid checkpoint; corrupt ones are skipped with a warning.
LoadedCheckpoint load_latest(const fs::path& run_dir);

/// Iteration indices of iter_NNNN directories, ascending.
std::vector<int> list_checkpoints(const fs::path& run_dir);

fs::path trajectory_path(const fs::path& run_dir);
void append_trajectory(const fs::path& run_dir, const ordered_json& line);
std::vector<nlohmann::json> read_trajectory(const fs::path& run_dir);
/// Drops lines whose iteration index is >= first_dropped.
void truncate_trajectory(const fs::path& run_dir, int first_dropped);

/// Exclusive advisory lock on run_dir/lock, released on destruction or
/// process exit.
class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

struct SkillFile {
  Skill skill;
  std::string source_run;
  int source_iteration = 0;
  double score = 0.0;
};

ordered_json to_json(const SkillFile& file);
SkillFile read_skill_file(const fs::path& path);
void write_skill_file(const fs::path& path, const SkillFile& file);

struct EvaluationResult {
  std::string method;
  std::string dataset;
  std::string split;
  MetricsReport metrics;
  int num_problems = 0;
  ordered_json metadata = ordered_json::object();
};

/// Merges `results` into run_dir/report.json (replacing rows with the same
/// method and dataset) and rewrites report.json and report.csv. JSON values
/// are fractions rounded to 4 decimals; CSV values are percentages with 2.
void emit_report(const fs::path& run_dir, const std::vector<EvaluationResult>& results);

double round_to(double value, int decimals);

}  // namespace agentpso
