// SPDX-License-Identifier: Apache-2.0

#include "agentpso/core.hpp"

#include <cctype>

namespace agentpso {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

template <typename Fn>
void for_each_word(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (!fn(text.substr(start, i - start))) return;
  }
}

}  // namespace

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  for_each_word(text, [&](std::string_view) {
    ++n;
    return true;
  });
  return n;
}

std::string enforce_length(std::string_view text, std::size_t max_words) {
  if (word_count(text) <= max_words) return std::string(text);
  std::string out;
  std::size_t taken = 0;
  for_each_word(text, [&](std::string_view word) {
    if (taken == max_words) return false;
    if (taken > 0) out.push_back(' ');
    out.append(word);
    ++taken;
    return true;
  });
  return out;
}

RunConfig validate_config(RunConfig config) {
  auto require = [](bool ok, const char* field, const std::string& message) {
    if (!ok) throw ConfigError(field, message);
  };

  require(config.num_agents >= 2, "num_agents", "a swarm needs at least 2 agents");
  require(config.num_iterations >= 0, "num_iterations", "must be non-negative");
  require(config.train_pool > 0, "train_pool", "must be positive");
  require(config.val_pool > 0, "val_pool", "must be positive");
  require(config.test_pool >= 0, "test_pool", "must be non-negative");
  require(config.train_batch > 0, "train_batch", "must be positive");
  require(config.val_batch > 0, "val_batch", "must be positive");
  require(config.train_batch <= config.train_pool, "train_batch", "exceeds train_pool");
  require(config.val_batch <= config.val_pool, "val_batch", "exceeds val_pool");
  require(config.val_pool % config.val_batch == 0, "val_pool",
          "must be divisible by val_batch (" + std::to_string(config.val_pool) + " % " +
              std::to_string(config.val_batch) + " != 0)");
  require(config.epsilon >= 0.0, "epsilon", "must be non-negative");
  require(config.max_velocity_words >= 1, "max_velocity_words", "must be at least 1");
  require(config.max_skill_words >= 1, "max_skill_words", "must be at least 1");
  require(config.max_parallel_calls >= 1, "max_parallel_calls", "must be at least 1");

  if (!config.initial_skills.empty()) {
    require(static_cast<int>(config.initial_skills.size()) == config.num_agents, "initial_skills",
            "expected " + std::to_string(config.num_agents) + " skills, got " +
                std::to_string(config.initial_skills.size()));
    for (const auto& skill : config.initial_skills) {
      require(word_count(skill.text) > 0, "initial_skills", "skill text must be non-empty");
      require(word_count(skill.text) <= static_cast<std::size_t>(config.max_skill_words),
              "initial_skills", "skill exceeds max_skill_words");
    }
  }

  const auto& backend = config.backend;
  require(backend.timeout_ms > 0, "backend.timeout_ms", "must be positive");
  require(backend.max_retries >= 0, "backend.max_retries", "must be non-negative");
  require(backend.backoff_ms >= 0, "backend.backoff_ms", "must be non-negative");
  if (backend.kind == BackendKind::kHttp) {
    require(!backend.endpoint_url.empty(), "backend.endpoint_url", "required for http backend");
    require(!backend.model_name.empty(), "backend.model_name", "required for http backend");
    require(!backend.credential_env_var.empty(), "backend.credential_env_var",
            "required for http backend");
  }
  return config;
}

}  // namespace agentpso
