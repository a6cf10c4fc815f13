// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "instance.hpp"
#include "policies.hpp"

namespace cttts {

struct RunSettings {
    std::size_t budget = 0;
    std::size_t init_per_design = 10;
    std::vector<std::size_t> checkpoints; // strictly increasing, last == budget
    SelectionMode selection = SelectionMode::Plugin;
    std::size_t bayes_draws = 1000;
    bool record_counts = false;
};

struct ReplicationResult {
    std::vector<std::vector<char>> correct;               // [checkpoint][context]
    std::vector<std::vector<std::size_t>> count_snapshots; // [checkpoint][design], when recorded
    std::vector<std::size_t> final_counts;
    std::vector<double> final_gamma;
    std::size_t fallbacks = 0;
    std::size_t tie_events = 0;
    std::vector<std::string> warnings;
};

/// Per-replication seed derived from the experiment seed.
std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t rep) noexcept;

/// n0 round-robin samples per design, then policy steps until the budget.
ReplicationResult run_replication(const ProblemInstance& instance, const PolicyConfig& policy,
                                  const RunSettings& settings, std::uint64_t seed);

/// 20 log-spaced budgets between `start` and `budget` (deduplicated).
std::vector<std::size_t> default_checkpoints(std::size_t start, std::size_t budget, std::size_t count = 20);

struct CurvePoint {
    std::size_t checkpoint = 0;
    double pcs = 0.0, pcs_se = 0.0;
    double pcsw = 0.0, pcsw_se = 0.0;
    double pcse = 0.0, pcse_se = 0.0;
    std::size_t reps = 0;
};

struct MetricsCurve {
    std::vector<std::string> policies;
    std::vector<std::vector<CurvePoint>> points; // [policy][checkpoint]
    bool se_defined = true;
};

/// PCS / PCSW / PCSE with standard errors from replication records.
std::vector<CurvePoint> aggregate(const std::vector<ReplicationResult>& reps,
                                  const std::vector<std::size_t>& checkpoints, const std::vector<double>& weights);

struct ExperimentConfig {
    std::shared_ptr<const ProblemInstance> instance;
    nlohmann::json instance_spec;
    std::vector<PolicyConfig> policies;
    RunSettings run;
    std::size_t reps = 100;
    std::uint64_t seed = 1;
    std::vector<double> weights; // empty = uniform
    std::size_t parallelism = 1;
    std::string out; // CSV path (optional)
    bool keep_replications = false;
};

struct ExperimentResult {
    MetricsCurve curve;
    std::vector<std::vector<ReplicationResult>> replications; // when kept
    std::vector<std::size_t> fallbacks;                       // per policy
    std::vector<std::size_t> tie_events;
    std::vector<std::vector<std::string>> warnings;
    double wall_seconds = 0.0;
};

/// Validates checkpoint/weight/budget consistency, filling defaults.
void finalize(ExperimentConfig& config);

/// Runs every policy for `reps` replications on `parallelism` threads.
/// Failures surface as RuntimeError naming the policy and replication index.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string curve_csv(const MetricsCurve& curve);
void export_csv(const MetricsCurve& curve, const std::string& path);

nlohmann::json run_metadata(const ExperimentConfig& config, const ExperimentResult& result,
                            const nlohmann::json& config_echo);

} // namespace cttts
