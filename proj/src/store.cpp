// SPDX-License-Identifier: Apache-2.0

#include "agentpso/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "agentpso/config_json.hpp"

namespace agentpso {

namespace {

using json = nlohmann::json;

constexpr int kCheckpointFormat = 1;

ordered_json skill_json(const Skill& skill) {
  ordered_json out;
  out["identity_label"] = skill.identity_label;
  out["text"] = skill.text;
  return out;
}

Skill skill_from(const json& doc) {
  return Skill{doc.at("text").get<std::string>(), doc.at("identity_label").get<std::string>()};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json checkpoint_payload(const RunCheckpoint& checkpoint) {
  ordered_json payload;
  payload["format"] = kCheckpointFormat;
  payload["iteration"] = checkpoint.state.iteration;
  payload["subset_count"] = checkpoint.subset_count;
  payload["config"] = config_to_json(checkpoint.config, false);
  payload["state"] = to_json(checkpoint.state);
  return payload;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string percent(double fraction) { return fmt::format("{:.2f}", round_to(fraction * 100.0, 2)); }

}  // namespace

ordered_json to_json(const SwarmState& state) {
  ordered_json out;
  auto agents = ordered_json::array();
  for (const auto& a : state.agents) {
    ordered_json agent;
    agent["agent_id"] = a.agent_id;
    agent["skill"] = skill_json(a.skill);
    agent["velocity"] = a.velocity.text;
    agent["personal_best"] = skill_json(a.personal_best);
    agent["personal_best_score"] = a.personal_best_score;
    agent["personal_best_iteration"] = a.personal_best_iteration;
    agents.push_back(std::move(agent));
  }
  out["agents"] = std::move(agents);
  out["global_best"] = skill_json(state.global_best);
  out["global_best_score"] = state.global_best_score;
  out["global_best_agent"] = state.global_best_agent;
  out["iteration"] = state.iteration;
  out["scheduler_cursor"] = state.scheduler_cursor;
  out["seed"] = state.seed;
  return out;
}

SwarmState swarm_state_from_json(const json& doc) {
  SwarmState state;
  for (const auto& a : doc.at("agents")) {
    AgentState agent;
    agent.agent_id = a.at("agent_id").get<int>();
    agent.skill = skill_from(a.at("skill"));
    agent.velocity.text = a.at("velocity").get<std::string>();
    agent.personal_best = skill_from(a.at("personal_best"));
    agent.personal_best_score = a.at("personal_best_score").get<double>();
    agent.personal_best_iteration = a.at("personal_best_iteration").get<int>();
    state.agents.push_back(std::move(agent));
  }
  state.global_best = skill_from(doc.at("global_best"));
  state.global_best_score = doc.at("global_best_score").get<double>();
  state.global_best_agent = doc.at("global_best_agent").get<int>();
  state.iteration = doc.at("iteration").get<int>();
  state.scheduler_cursor = doc.at("scheduler_cursor").get<int>();
  state.seed = doc.at("seed").get<std::uint64_t>();
  return state;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw StoreError("sha256 computation failed");
  }
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void atomic_write(const fs::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw StoreError("cannot create " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw StoreError("failed while writing " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw StoreError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

fs::path checkpoint_path(const fs::path& run_dir, int iteration) {
  return run_dir / fmt::format("iter_{:04d}", iteration) / "state.json";
}

std::string serialize_checkpoint(const RunCheckpoint& checkpoint) {
  auto payload = checkpoint_payload(checkpoint);
  auto digest = "sha256:" + sha256_hex(payload.dump());
  payload["digest"] = digest;
  return payload.dump(2) + "\n";
}

fs::path save_checkpoint(const fs::path& run_dir, RunCheckpoint& checkpoint) {
  auto path = checkpoint_path(run_dir, checkpoint.state.iteration);
  atomic_write(path, serialize_checkpoint(checkpoint));
  auto reread = load_checkpoint(path);
  if (!(reread.state == checkpoint.state)) {
    throw StoreError("checkpoint " + path.string() + " does not read back to the saved state");
  }
  checkpoint.digest = reread.digest;
  return path;
}

RunCheckpoint load_checkpoint(const fs::path& path) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw StoreError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("digest")) {
    throw StoreError("checkpoint " + path.string() + " has no digest");
  }
  auto digest = doc["digest"].get<std::string>();
  doc.erase("digest");
  if (digest != "sha256:" + sha256_hex(doc.dump())) {
    throw StoreError("checkpoint " + path.string() + " fails its digest check");
  }
  try {
    RunCheckpoint checkpoint;
    checkpoint.config = config_from_json(doc.at("config"));
    checkpoint.state = swarm_state_from_json(doc.at("state"));
    checkpoint.subset_count = doc.at("subset_count").get<int>();
    checkpoint.digest = digest;
    return checkpoint;
  } catch (const std::exception& e) {
    throw StoreError("checkpoint " + path.string() + " has an invalid payload: " + e.what());
  }
}

std::vector<int> list_checkpoints(const fs::path& run_dir) {
  std::vector<int> out;
  std::error_code ec;
  if (!fs::is_directory(run_dir, ec)) return out;
  static const std::regex kIterDir(R"(iter_(\d{4,}))");
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    std::smatch m;
    auto name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, kIterDir)) out.push_back(std::stoi(m[1]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

LoadedCheckpoint load_latest(const fs::path& run_dir) {
  LoadedCheckpoint loaded;
  auto indices = list_checkpoints(run_dir);
  for (auto it = indices.rbegin(); it != indices.rend(); ++it) {
    auto path = checkpoint_path(run_dir, *it);
    try {
      loaded.checkpoint = load_checkpoint(path);
      loaded.path = path;
      return loaded;
    } catch (const StoreError& e) {
      spdlog::warn("skipping checkpoint: {}", e.what());
      loaded.skipped.emplace_back(e.what());
    }
  }
  throw StoreError("no resumable state in " + run_dir.string());
}

fs::path trajectory_path(const fs::path& run_dir) { return run_dir / "trajectory.jsonl"; }

void append_trajectory(const fs::path& run_dir, const ordered_json& line) {
  std::ofstream out(trajectory_path(run_dir), std::ios::binary | std::ios::app);
  if (!out) throw StoreError("cannot append to " + trajectory_path(run_dir).string());
  out << line.dump() << '\n';
  out.flush();
  if (!out) throw StoreError("failed while appending to " + trajectory_path(run_dir).string());
}

std::vector<json> read_trajectory(const fs::path& run_dir) {
  auto path = trajectory_path(run_dir);
  std::ifstream in(path);
  if (!in) throw StoreError("missing trajectory log " + path.string());
  std::vector<json> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      lines.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw StoreError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return lines;
}

void truncate_trajectory(const fs::path& run_dir, int first_dropped) {
  auto path = trajectory_path(run_dir);
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::string kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.contains("iteration")) continue;
    if (doc["iteration"].get<int>() >= first_dropped) continue;
    kept += line;
    kept += '\n';
  }
  in.close();
  atomic_write(path, kept);
}

RunLock::RunLock(const fs::path& run_dir) {
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw StoreError("cannot create run directory " + run_dir.string() + ": " + ec.message());
  auto path = run_dir / "lock";
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw StoreError("cannot open " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw StoreError("run directory " + run_dir.string() + " is in use by another process");
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

ordered_json to_json(const SkillFile& file) {
  ordered_json out;
  out["identity_label"] = file.skill.identity_label;
  out["text"] = file.skill.text;
  out["source_run"] = file.source_run;
  out["source_iteration"] = file.source_iteration;
  out["score"] = file.score;
  return out;
}

SkillFile read_skill_file(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
    SkillFile file;
    file.skill = skill_from(doc);
    file.source_run = doc.value("source_run", std::string{});
    file.source_iteration = doc.value("source_iteration", 0);
    file.score = doc.value("score", 0.0);
    if (word_count(file.skill.text) == 0) throw StoreError("empty skill text");
    return file;
  } catch (const json::exception& e) {
    throw StoreError("invalid skill file " + path.string() + ": " + e.what());
  }
}

void write_skill_file(const fs::path& path, const SkillFile& file) {
  atomic_write(path, to_json(file).dump(2) + "\n");
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

void emit_report(const fs::path& run_dir, const std::vector<EvaluationResult>& results) {
  auto json_path = run_dir / "report.json";
  ordered_json rows = ordered_json::array();
  if (fs::exists(json_path)) {
    auto existing = ordered_json::parse(read_file(json_path), nullptr, false);
    if (!existing.is_discarded() && existing.contains("rows") && existing["rows"].is_array()) {
      rows = existing["rows"];
    } else {
      spdlog::warn("ignoring unreadable {}", json_path.string());
    }
  }

  for (const auto& r : results) {
    ordered_json row;
    row["method"] = r.method;
    row["dataset"] = r.dataset;
    row["split"] = r.split;
    row["num_problems"] = r.num_problems;
    row["k"] = r.metrics.per_agent_accuracy.size();
    row["accuracy"] = round_to(r.metrics.accuracy, 4);
    row["pass_at_k"] = round_to(r.metrics.pass_at_k, 4);
    row["avg_at_k"] = round_to(r.metrics.avg_at_k, 4);
    auto per_agent = ordered_json::array();
    for (double v : r.metrics.per_agent_accuracy) per_agent.push_back(round_to(v, 4));
    row["per_agent_accuracy"] = std::move(per_agent);
    row["metadata"] = r.metadata;

    auto same = std::find_if(rows.begin(), rows.end(), [&](const ordered_json& existing) {
      return existing.value("method", "") == r.method && existing.value("dataset", "") == r.dataset;
    });
    if (same != rows.end()) {
      *same = std::move(row);
    } else {
      rows.push_back(std::move(row));
    }
  }

  ordered_json report;
  report["rows"] = rows;
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  atomic_write(json_path, report.dump(2) + "\n");

  std::size_t max_k = 0;
  for (const auto& row : rows) max_k = std::max(max_k, row["per_agent_accuracy"].size());
  std::string csv = "method,dataset,accuracy,pass_at_k,avg_at_k,split,num_problems,k";
  for (std::size_t i = 0; i < max_k; ++i) csv += fmt::format(",agent_{}_accuracy", i);
  csv += '\n';
  for (const auto& row : rows) {
    csv += csv_field(row["method"].get<std::string>()) + "," +
           csv_field(row["dataset"].get<std::string>()) + "," +
           percent(row["accuracy"].get<double>()) + "," + percent(row["pass_at_k"].get<double>()) +
           "," + percent(row["avg_at_k"].get<double>()) + "," +
           csv_field(row["split"].get<std::string>()) + "," +
           std::to_string(row["num_problems"].get<int>()) + "," +
           std::to_string(row["k"].get<std::size_t>());
    const auto& per_agent = row["per_agent_accuracy"];
    for (std::size_t i = 0; i < max_k; ++i) {
      csv += ",";
      if (i < per_agent.size()) csv += percent(per_agent[i].get<double>());
    }
    csv += '\n';
  }
  atomic_write(run_dir / "report.csv", csv);
}

}  // namespace agentpso
