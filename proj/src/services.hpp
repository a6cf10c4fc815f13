// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "harness.hpp"

namespace cttts {

/// Static allocation for an instance document, an instance generator spec or
/// an explicit rate problem. Options: gamma_mode (optimize|fixed), gamma
/// (number or per-context array), method (auto|best|topm), family (rate
/// family for instances), weibull_nodes, iterations.
nlohmann::json solve_allocation_json(const nlohmann::json& problem, const nlohmann::json& options,
                                     const std::string& base_dir = {});

/// Rate or KL evaluation request.
nlohmann::json rates_json(const nlohmann::json& request);

/// {"pi": [[...], ...], "gamma": [...]} -> step probabilities.
nlohmann::json policy_prob_json(const nlohmann::json& request);

/// Runs the experiment, writes the CSV (and metadata next to it when
/// `meta_path` is non-empty) and returns a JSON summary.
nlohmann::json run_experiment_json(const ExperimentConfig& config, const nlohmann::json& config_echo,
                                   const std::string& csv_path, const std::string& meta_path);

} // namespace cttts
