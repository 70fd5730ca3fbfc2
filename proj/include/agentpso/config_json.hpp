// SPDX-License-Identifier: Apache-2.0
//
// JSON form of RunConfig and BackendSpec. Absent keys keep their defaults;
// unknown keys and wrongly typed values raise ConfigError naming the key.

#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "agentpso/core.hpp"

namespace agentpso {

using ordered_json = nlohmann::ordered_json;

BackendSpec backend_spec_from_json(const nlohmann::json& doc);
ordered_json backend_spec_to_json(const BackendSpec& spec);

/// Parses and validates. The result has passed validate_config.
RunConfig config_from_json(const nlohmann::json& doc);

/// run_dir is a location rather than a setting, so it is only written when
/// include_run_dir is set. Checkpoints omit it to stay relocatable.
ordered_json config_to_json(const RunConfig& config, bool include_run_dir = false);

RunConfig load_config_file(const std::filesystem::path& path);

std::string_view to_string(BackendKind kind);

}  // namespace agentpso
