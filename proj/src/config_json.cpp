// SPDX-License-Identifier: Apache-2.0

#include "agentpso/config_json.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace agentpso {

namespace {

using json = nlohmann::json;

int read_int(const json& value, const std::string& field) {
  if (!value.is_number_integer()) throw ConfigError(field, "expected an integer");
  return value.get<int>();
}

std::uint64_t read_u64(const json& value, const std::string& field) {
  if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0)) {
    throw ConfigError(field, "expected a non-negative integer");
  }
  return value.get<std::uint64_t>();
}

double read_double(const json& value, const std::string& field) {
  if (!value.is_number()) throw ConfigError(field, "expected a number");
  return value.get<double>();
}

std::string read_string(const json& value, const std::string& field) {
  if (!value.is_string()) throw ConfigError(field, "expected a string");
  return value.get<std::string>();
}

void require_object(const json& doc, const std::string& field) {
  if (!doc.is_object()) throw ConfigError(field, "expected a JSON object");
}

Skill read_skill(const json& value, const std::string& field) {
  require_object(value, field);
  Skill skill;
  for (const auto& [key, item] : value.items()) {
    if (key == "text") {
      skill.text = read_string(item, field + ".text");
    } else if (key == "identity_label") {
      skill.identity_label = read_string(item, field + ".identity_label");
    } else {
      throw ConfigError(field + "." + key, "unknown key");
    }
  }
  return skill;
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::kHttp ? "http" : "mock";
}

BackendSpec backend_spec_from_json(const json& doc) {
  require_object(doc, "backend");
  BackendSpec spec;
  for (const auto& [key, value] : doc.items()) {
    const std::string field = "backend." + key;
    if (key == "kind") {
      auto kind = read_string(value, field);
      if (kind == "mock") {
        spec.kind = BackendKind::kMock;
      } else if (kind == "http") {
        spec.kind = BackendKind::kHttp;
      } else {
        throw ConfigError(field, "must be \"mock\" or \"http\", got \"" + kind + "\"");
      }
    } else if (key == "endpoint_url") {
      spec.endpoint_url = read_string(value, field);
    } else if (key == "model_name") {
      spec.model_name = read_string(value, field);
    } else if (key == "credential_env_var") {
      spec.credential_env_var = read_string(value, field);
    } else if (key == "timeout_ms") {
      spec.timeout_ms = read_int(value, field);
    } else if (key == "max_retries") {
      spec.max_retries = read_int(value, field);
    } else if (key == "backoff_ms") {
      spec.backoff_ms = read_int(value, field);
    } else if (key == "temperature") {
      if (!value.is_null()) spec.temperature = read_double(value, field);
    } else {
      throw ConfigError(field, "unknown key");
    }
  }
  return spec;
}

ordered_json backend_spec_to_json(const BackendSpec& spec) {
  ordered_json out;
  out["kind"] = to_string(spec.kind);
  out["endpoint_url"] = spec.endpoint_url;
  out["model_name"] = spec.model_name;
  out["credential_env_var"] = spec.credential_env_var;
  out["timeout_ms"] = spec.timeout_ms;
  out["max_retries"] = spec.max_retries;
  out["backoff_ms"] = spec.backoff_ms;
  if (spec.temperature) {
    out["temperature"] = *spec.temperature;
  } else {
    out["temperature"] = nullptr;
  }
  return out;
}

RunConfig config_from_json(const json& doc) {
  require_object(doc, "config");
  RunConfig config;

  using Setter = std::function<void(const json&, const std::string&)>;
  auto int_field = [](int& target) -> Setter {
    return [&target](const json& v, const std::string& f) { target = read_int(v, f); };
  };
  auto string_field = [](std::string& target) -> Setter {
    return [&target](const json& v, const std::string& f) { target = read_string(v, f); };
  };

  const std::map<std::string, Setter> setters = {
      {"num_agents", int_field(config.num_agents)},
      {"num_iterations", int_field(config.num_iterations)},
      {"train_pool", int_field(config.train_pool)},
      {"val_pool", int_field(config.val_pool)},
      {"test_pool", int_field(config.test_pool)},
      {"train_batch", int_field(config.train_batch)},
      {"val_batch", int_field(config.val_batch)},
      {"max_velocity_words", int_field(config.max_velocity_words)},
      {"max_skill_words", int_field(config.max_skill_words)},
      {"max_parallel_calls", int_field(config.max_parallel_calls)},
      {"epsilon", [&](const json& v, const std::string& f) { config.epsilon = read_double(v, f); }},
      {"seed", [&](const json& v, const std::string& f) { config.seed = read_u64(v, f); }},
      {"backend", [&](const json& v, const std::string&) { config.backend = backend_spec_from_json(v); }},
      {"dataset_path", string_field(config.dataset_path)},
      {"dataset_name", string_field(config.dataset_name)},
      {"run_dir", string_field(config.run_dir)},
      {"task_domain", string_field(config.task_domain)},
      {"initial_skills",
       [&](const json& v, const std::string& f) {
         if (!v.is_array()) throw ConfigError(f, "expected an array");
         config.initial_skills.clear();
         for (std::size_t i = 0; i < v.size(); ++i) {
           config.initial_skills.push_back(read_skill(v[i], f + "[" + std::to_string(i) + "]"));
         }
       }},
  };

  for (const auto& [key, value] : doc.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    it->second(value, key);
  }
  return validate_config(std::move(config));
}

ordered_json config_to_json(const RunConfig& config, bool include_run_dir) {
  ordered_json out;
  out["num_agents"] = config.num_agents;
  out["num_iterations"] = config.num_iterations;
  out["train_pool"] = config.train_pool;
  out["val_pool"] = config.val_pool;
  out["test_pool"] = config.test_pool;
  out["train_batch"] = config.train_batch;
  out["val_batch"] = config.val_batch;
  out["epsilon"] = config.epsilon;
  out["max_velocity_words"] = config.max_velocity_words;
  out["max_skill_words"] = config.max_skill_words;
  out["max_parallel_calls"] = config.max_parallel_calls;
  out["seed"] = config.seed;
  out["backend"] = backend_spec_to_json(config.backend);
  out["dataset_path"] = config.dataset_path;
  out["dataset_name"] = config.dataset_name;
  if (include_run_dir) out["run_dir"] = config.run_dir;
  out["task_domain"] = config.task_domain;
  auto skills = ordered_json::array();
  for (const auto& skill : config.initial_skills) {
    skills.push_back({{"identity_label", skill.identity_label}, {"text", skill.text}});
  }
  out["initial_skills"] = std::move(skills);
  return out;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", "malformed JSON in " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace agentpso
