// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "instance.hpp"
#include "rates.hpp"

namespace cttts {

/// Static rate problem of one context: preferred set P, undesired set U and
/// one rate function per (p, u) pair. Indices are local to the context.
struct ContextProblem {
    std::string id;
    std::vector<std::string> design_ids;
    std::vector<std::size_t> preferred;
    std::vector<std::size_t> undesired;
    std::vector<PairRate> pairs; // row-major |P| x |U|

    std::size_t size() const noexcept { return design_ids.size(); }
    const PairRate& pair(std::size_t pi, std::size_t ui) const { return pairs[pi * undesired.size() + ui]; }
    /// Pair rates of the single preferred design (|P| = 1).
    std::span<const PairRate> best_row() const { return {pairs.data(), undesired.size()}; }
    void validate() const;
};

struct StaticProblem {
    std::vector<ContextProblem> contexts;
    bool all_best() const noexcept;
};

/// Builds the problem from per-design parameters; P_c is the top-m_c set of
/// `thetas` (ties to the lower index).
StaticProblem static_problem(const ProblemInstance& instance, std::span<const Theta> thetas,
                             RateFamily family, int weibull_nodes = 257);
/// Same with the instance's true parameters.
StaticProblem static_problem(const ProblemInstance& instance, RateFamily family);
/// Explicit rate problem document (see README).
StaticProblem static_problem_from_json(const nlohmann::json& j);

struct AllocationVector {
    std::vector<double> alpha;
    std::vector<std::vector<double>> beta; // per context, local design order
    std::vector<double> gamma;
    std::vector<double> context_values; // per-context optimal rate before alpha weighting
    double value = 0.0;
    bool degraded = false;
    std::vector<std::string> warnings;
};

nlohmann::json to_json(const AllocationVector& a, const StaticProblem& problem);

struct BalanceResult {
    std::vector<double> beta; // over U, in the order of `rates`
    double value = 0.0;
};

/// Equalizes G_d'(gamma, beta_d') over the undesired designs subject to
/// Σ beta = 1 - gamma. Flat regions resolve to the smallest beta; leftover
/// mass goes to the last design.
BalanceResult solve_balance_best(double gamma, std::span<const PairRate> rates);

struct AlphaResult {
    std::vector<double> alpha;
    double value = 0.0;
};

AlphaResult alpha_star(std::span<const double> context_values);

/// m_c = 1 for all contexts, with gamma fixed per context.
AllocationVector solve_fixed_gamma(const StaticProblem& problem, std::span<const double> gamma);

/// Best-gamma search per context; m_c = 1 for all contexts.
AllocationVector optimize_gamma(const StaticProblem& problem);

struct TopmOptions {
    int iterations = 5000;
    double step = 0.5;
    bool refine = true;
    std::size_t refine_cap = 12;
    double residual_threshold = 1e-3;
};

struct TopmTrace {
    // (iteration, objective of the averaged iterate) per context at doubling checkpoints.
    std::vector<std::vector<std::pair<int, double>>> averaged_objective;
};

AllocationVector solve_topm_allocation(const StaticProblem& problem, const TopmOptions& options = {},
                                       TopmTrace* trace = nullptr);

struct KktReport {
    std::vector<double> eq9;       // per context, NaN when every entry is a kink
    double eq9_max = 0.0;
    double eq10_spread = 0.0;
    std::vector<std::string> kinks; // "context/design" entries excluded from eq9
};

KktReport kkt_residual_best(const AllocationVector& allocation, const StaticProblem& problem);

/// Max relative deviation of all row/column minima (scaled by alpha) from
/// their mean: (max - min) / mean.
double balance_residual_topm(const AllocationVector& allocation, const StaticProblem& problem);

struct Prop6Report {
    bool passed = false;
    bool classes_balanced = false;
    bool pattern_consistent = false;
    std::vector<double> class_residuals;
    std::string message;
};

/// vartheta[c] is a row-major |P| x |U| 0/1 pattern of binding pairs.
Prop6Report prop6_check(const AllocationVector& allocation, const StaticProblem& problem,
                        const std::vector<std::vector<int>>& vartheta);

/// Per-context diagnostic values alpha(c) * G(...) of one count snapshot,
/// using the instance's true parameters. Unvisited contexts yield nullopt.
struct EmpiricalRates {
    std::vector<std::optional<std::vector<double>>> values;
    std::vector<double> spread; // (max - min) / mean per context, NaN when undefined
};

EmpiricalRates empirical_rates(const StaticProblem& truth, std::span<const std::size_t> counts,
                               std::span<const std::size_t> context_first, std::span<const double> gamma);

std::vector<EmpiricalRates> empirical_rate_trajectory(const StaticProblem& truth,
                                                      const std::vector<std::vector<std::size_t>>& snapshots,
                                                      std::span<const std::size_t> context_first,
                                                      std::span<const double> gamma);

} // namespace cttts
