// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit and acceptance tests. The oracles here are
// written from the mock-world rules directly and do not call library code
// they are meant to check.

#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "agentpso/config_json.hpp"
#include "agentpso/data.hpp"
#include "agentpso/prompts.hpp"

namespace agentpso::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("agentpso-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

// Token scan written independently of the backend: split on anything that is
// not a letter, digit or underscore and keep words of the form T<digits>.
inline std::set<std::string> oracle_tokens(const std::string& text) {
  std::set<std::string> out;
  std::string word;
  auto flush = [&] {
    if (word.size() >= 2 && word[0] == 'T' &&
        std::all_of(word.begin() + 1, word.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      out.insert(word);
    }
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// Category of a "MOCK:Tk:a+b" question.
inline std::string oracle_category(const std::string& question) {
  auto first = question.find(':');
  auto second = question.find(':', first + 1);
  return question.substr(first + 1, second - first - 1);
}

// Fitness in the token world: fraction of problems whose category token is
// held by the skill.
inline double oracle_fitness(const std::string& skill_text, const std::vector<Problem>& subset) {
  auto tokens = oracle_tokens(skill_text);
  int covered = 0;
  for (const auto& p : subset) covered += tokens.count(oracle_category(p.question)) ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(subset.size());
}

// Counts occurrences and walks the list once more to pick the first answer
// reaching the maximal count.
inline std::string oracle_majority(const std::vector<std::string>& answers) {
  std::map<std::string, int> counts;
  for (const auto& a : answers) ++counts[a];
  int best = 0;
  for (const auto& [_, c] : counts) best = std::max(best, c);
  for (const auto& a : answers) {
    if (counts[a] == best) return a;
  }
  return {};
}

inline Skill token_skill(int token, const std::string& label = "agent") {
  return Skill{"Apply technique T" + std::to_string(token) + ".", label};
}

// A mock-world config with its dataset written under `dir`: four agents (or
// `agents`) holding single tokens T1..T4, all other fields at defaults.
inline RunConfig mock_config(const fs::path& dir, std::uint64_t seed = 0, int categories = 5,
                             int per_category = 80, int agents = 4) {
  RunConfig config;
  config.seed = seed;
  config.num_agents = agents;
  auto problems = generate_mock_dataset(mock_world_spec(config, categories, per_category));
  auto path = dir / "mock.jsonl";
  write_jsonl(path, problems);
  config.dataset_path = path.string();
  config.dataset_name = "mock";
  auto labels = default_initial_skills();
  for (int i = 0; i < agents; ++i) {
    config.initial_skills.push_back(token_skill(1 + i % std::max(1, categories - 1),
                                                labels[static_cast<std::size_t>(i) % 4].identity_label));
  }
  return validate_config(config);
}

}  // namespace agentpso::testing
