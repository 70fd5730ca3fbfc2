// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "agentpso/store.hpp"
#include "support.hpp"

namespace agentpso {
namespace {

using testing::read_file;
using testing::TempDir;

SwarmState sample_state(int iteration) {
  SwarmState s;
  for (int i = 0; i < 3; ++i) {
    s.agents.push_back(AgentState{i, Skill{"skill " + std::to_string(i) + " with \"quotes\"\nand lines", "L"},
                                  Velocity{"ADD T" + std::to_string(i)}, Skill{"best", "L"}, 0.35 + i * 0.1,
                                  i});
  }
  s.global_best = Skill{"g", "L"};
  s.global_best_score = 0.55;
  s.global_best_agent = 2;
  s.iteration = iteration;
  s.scheduler_cursor = 3;
  s.seed = 0xFFFFFFFFFFFFFFFFull;
  return s;
}

RunCheckpoint sample_checkpoint(int iteration) {
  RunConfig config;
  config.num_agents = 3;
  config.dataset_path = "/data/x.jsonl";
  return RunCheckpoint{validate_config(config), sample_state(iteration), 5, {}};
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Checkpoint, NamingAndRoundTrip) {
  TempDir dir;
  EXPECT_EQ(checkpoint_path(dir.path(), 3), dir.path() / "iter_0003" / "state.json");
  auto cp = sample_checkpoint(3);
  auto path = save_checkpoint(dir.path(), cp);
  EXPECT_EQ(path, dir.path() / "iter_0003" / "state.json");
  EXPECT_EQ(cp.digest.rfind("sha256:", 0), 0u);
  auto back = load_checkpoint(path);
  EXPECT_EQ(back.state, cp.state);
  EXPECT_EQ(back.config, cp.config);
  EXPECT_EQ(back.subset_count, 5);
  EXPECT_EQ(back.digest, cp.digest);
  EXPECT_EQ(serialize_checkpoint(back), read_file(path));
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
}

TEST(Checkpoint, TamperingFailsDigest) {
  TempDir dir;
  auto cp = sample_checkpoint(1);
  auto path = save_checkpoint(dir.path(), cp);
  auto text = read_file(path);
  auto pos = text.find("0.55");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 4, "0.99");
  std::ofstream(path, std::ios::trunc) << text;
  EXPECT_THROW(load_checkpoint(path), StoreError);
}

TEST(LoadLatest, PicksHighestAndSkipsCorrupt) {
  TempDir dir;
  for (int i = 1; i <= 6; ++i) {
    auto cp = sample_checkpoint(i);
    save_checkpoint(dir.path(), cp);
  }
  EXPECT_EQ(list_checkpoints(dir.path()), (std::vector<int>{1, 2, 3, 4, 5, 6}));
  auto latest = load_latest(dir.path());
  EXPECT_EQ(latest.checkpoint.state.iteration, 6);
  EXPECT_TRUE(latest.skipped.empty());

  std::ofstream(checkpoint_path(dir.path(), 6), std::ios::trunc) << "{\"trunc";
  latest = load_latest(dir.path());
  EXPECT_EQ(latest.checkpoint.state.iteration, 5);
  EXPECT_EQ(latest.skipped.size(), 1u);
}

TEST(LoadLatest, EmptyRunDir) {
  TempDir dir;
  try {
    load_latest(dir.path());
    FAIL();
  } catch (const StoreError& e) {
    EXPECT_NE(std::string(e.what()).find("no resumable state"), std::string::npos);
  }
}

TEST(AtomicWrite, LeavesNoPartialFile) {
  TempDir dir;
  auto target = dir.path() / "sub" / "file.txt";
  atomic_write(target, "first");
  EXPECT_EQ(read_file(target), "first");
  atomic_write(target, "second");
  EXPECT_EQ(read_file(target), "second");
  for (const auto& e : fs::directory_iterator(target.parent_path())) {
    EXPECT_EQ(e.path().filename(), "file.txt");
  }
  // A directory sitting at the temp path makes the write fail before rename.
  fs::create_directories(target.string() + ".tmp");
  EXPECT_THROW(atomic_write(target, "third"), StoreError);
  EXPECT_EQ(read_file(target), "second");
}

TEST(Trajectory, AppendReadTruncate) {
  TempDir dir;
  for (int i = 1; i <= 4; ++i) append_trajectory(dir.path(), ordered_json{{"iteration", i}});
  auto lines = read_trajectory(dir.path());
  ASSERT_EQ(lines.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(lines[i]["iteration"], i + 1);
  truncate_trajectory(dir.path(), 3);
  EXPECT_EQ(read_trajectory(dir.path()).size(), 2u);
  truncate_trajectory(dir.path(), 0);
  EXPECT_TRUE(read_trajectory(dir.path()).empty());
  TempDir other;
  EXPECT_THROW(read_trajectory(other.path()), StoreError);
}

TEST(RunLock, SecondHolderIsRejected) {
  TempDir dir;
  {
    RunLock first(dir.path());
    EXPECT_THROW(RunLock second(dir.path()), StoreError);

    pid_t child = ::fork();
    if (child == 0) {
      try {
        RunLock other(dir.path());
        ::_exit(0);
      } catch (...) {
        ::_exit(3);
      }
    }
    int status = 0;
    ::waitpid(child, &status, 0);
    EXPECT_EQ(WEXITSTATUS(status), 3);
  }
  EXPECT_NO_THROW(RunLock again(dir.path()));
}

TEST(SkillFiles, RoundTrip) {
  TempDir dir;
  SkillFile f{Skill{"Solve the problem step by step.", "Chain of Thought"}, "run-a", 7, 0.85};
  write_skill_file(dir / "s.json", f);
  auto doc = nlohmann::json::parse(read_file(dir / "s.json"));
  for (const char* key : {"identity_label", "text", "source_run", "source_iteration", "score"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  auto back = read_skill_file(dir / "s.json");
  EXPECT_EQ(back.skill, f.skill);
  EXPECT_EQ(back.source_run, "run-a");
  EXPECT_EQ(back.source_iteration, 7);
  EXPECT_DOUBLE_EQ(back.score, 0.85);
  std::ofstream(dir / "bad.json") << "{}";
  EXPECT_THROW(read_skill_file(dir / "bad.json"), StoreError);
}

TEST(Report, FormatsAndMerges) {
  TempDir dir;
  EvaluationResult r;
  r.method = "AgentPSO";
  r.dataset = "DeepMath";
  r.split = "test";
  r.num_problems = 200;
  r.metrics = MetricsReport{0.795, 0.87, 0.7275, {0.7, 0.75, 0.72, 0.74}};
  emit_report(dir.path(), {r});

  auto csv = read_file(dir / "report.csv");
  EXPECT_EQ(csv.rfind("method,dataset,accuracy,pass_at_k,avg_at_k,", 0), 0u);
  EXPECT_NE(csv.find("AgentPSO,DeepMath,79.50,87.00,72.75,test,200,4,70.00,75.00,72.00,74.00"),
            std::string::npos)
      << csv;
  auto doc = nlohmann::json::parse(read_file(dir / "report.json"));
  ASSERT_EQ(doc["rows"].size(), 1u);
  EXPECT_DOUBLE_EQ(doc["rows"][0]["accuracy"].get<double>(), 0.795);
  EXPECT_DOUBLE_EQ(doc["rows"][0]["avg_at_k"].get<double>(), 0.7275);

  r.metrics.accuracy = 1.0 / 3.0;
  emit_report(dir.path(), {r});
  doc = nlohmann::json::parse(read_file(dir / "report.json"));
  ASSERT_EQ(doc["rows"].size(), 1u);
  EXPECT_DOUBLE_EQ(doc["rows"][0]["accuracy"].get<double>(), 0.3333);

  r.method = "CoT";
  emit_report(dir.path(), {r});
  doc = nlohmann::json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(doc["rows"].size(), 2u);
}

TEST(Report, RoundTo) {
  EXPECT_DOUBLE_EQ(round_to(0.72749, 4), 0.7275);
  EXPECT_DOUBLE_EQ(round_to(0.5, 0), 1.0);
}

}  // namespace
}  // namespace agentpso
