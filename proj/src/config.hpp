// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "harness.hpp"

namespace cttts {

/// Parses JSON text; syntax errors become ConfigError with line and column.
nlohmann::json parse_json_text(std::string_view text, std::string_view source);
/// Reads and parses a JSON file (unreadable file: ConfigError).
nlohmann::json read_json_file(const std::string& path);

/// Throws ConfigError naming `where` if `j` is not an object or has a key outside `allowed`.
void require_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, std::string_view where);

/// Instance from a generator spec, a {"file": ...} reference (relative to
/// base_dir) or an inline instance document.
ProblemInstance instance_from_source(const nlohmann::json& spec, const std::string& base_dir);

PolicyConfig policy_from_json(const nlohmann::json& j, Family family);

/// Full experiment configuration; `finalize` is not applied.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::string& base_dir);

} // namespace cttts
