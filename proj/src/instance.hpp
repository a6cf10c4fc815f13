// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rng.hpp"

namespace cttts {

enum class Family { Gaussian, WeibullCensored };

std::string_view to_string(Family family) noexcept;
Family family_from_string(std::string_view name);

/// Performance parameter `mu` and nuisance parameter `eta` of one design.
/// Gaussian: eta is the variance. Weibull: eta is the shape k, and the scale
/// follows from mu = rho * Gamma(1 + 1/k).
struct Theta {
    double mu = 0.0;
    double eta = 1.0;
};

/// Compact parameter box [mu_lo, mu_hi] x [eta_lo, eta_hi].
struct ThetaBox {
    double mu_lo = -1e3;
    double mu_hi = 1e3;
    double eta_lo = 1e-6;
    double eta_hi = 1e4;

    bool contains(const Theta& t) const noexcept {
        return t.mu >= mu_lo && t.mu <= mu_hi && t.eta >= eta_lo && t.eta <= eta_hi;
    }
    bool contains_strictly(const Theta& t) const noexcept {
        return t.mu > mu_lo && t.mu < mu_hi && t.eta > eta_lo && t.eta < eta_hi;
    }
};

struct ContextSpec {
    std::string id;
    std::size_t first = 0; // global index of the first design
    std::size_t size = 0;
    std::size_t m = 1;
};

struct DesignSpec {
    std::string id;
    std::size_t context = 0;
    Theta theta;
};

struct Observation {
    std::size_t design = 0;
    double value = 0.0;
};

double weibull_scale_from_mean(double mu, double shape);
double weibull_mean_from_scale(double rho, double shape);
/// Inverse-CDF transform rho * (-ln u)^(1/k) for u in (0, 1].
double weibull_inverse_cdf(double rho, double shape, double u);

/// Ground-truth world: contexts, their disjoint design sets, true parameters
/// and top-m targets. Immutable after construction.
class ProblemInstance {
public:
    ProblemInstance(Family family,
                    std::vector<std::string> context_ids,
                    std::vector<std::vector<Theta>> designs,
                    std::vector<std::size_t> m,
                    double tau,
                    ThetaBox box);

    Family family() const noexcept { return family_; }
    std::size_t num_contexts() const noexcept { return contexts_.size(); }
    std::size_t num_designs() const noexcept { return designs_.size(); }
    const ContextSpec& context(std::size_t c) const { return contexts_.at(c); }
    const DesignSpec& design(std::size_t d) const { return designs_.at(d); }
    std::span<const ContextSpec> contexts() const noexcept { return contexts_; }
    std::span<const DesignSpec> designs() const noexcept { return designs_; }
    double tau() const noexcept { return tau_; }
    const ThetaBox& box() const noexcept { return box_; }

    std::size_t context_index(std::string_view id) const;
    std::size_t design_index(std::string_view id) const;
    /// Weibull scale rho of design d (Weibull family only).
    double weibull_scale(std::size_t d) const;

private:
    Family family_;
    std::vector<ContextSpec> contexts_;
    std::vector<DesignSpec> designs_;
    double tau_;
    ThetaBox box_;
};

/// Global indices (ascending) of the m largest entries of `values` within the
/// context's design range. Equal values prefer the lower design index.
void select_top(std::span<const double> values, const ContextSpec& ctx, std::vector<std::size_t>& out);
std::vector<std::size_t> select_top(std::span<const double> values, const ContextSpec& ctx);

std::vector<std::size_t> true_top_m(const ProblemInstance& instance, std::size_t context);
std::vector<std::size_t> true_top_m(const ProblemInstance& instance, std::string_view context_id);

Observation simulate(const ProblemInstance& instance, std::size_t design, Rng& rng);

ProblemInstance generate_gaussian_instance(std::uint64_t seed, std::size_t n_contexts,
                                           std::size_t n_designs, std::size_t m);
inline constexpr double kDefaultWeibullTau = 150.0;
ProblemInstance generate_weibull_instance(std::uint64_t seed, double tau = kDefaultWeibullTau);

nlohmann::json to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const nlohmann::json& j);

/// Per-design sample counts and running sufficient statistics.
class AllocationHistory {
public:
    explicit AllocationHistory(const ProblemInstance& instance);

    void record(std::size_t design, double value);

    std::size_t total() const noexcept { return total_; }
    std::size_t count(std::size_t d) const { return counts_[d]; }
    std::size_t context_count(std::size_t c) const { return context_counts_[c]; }
    std::span<const std::size_t> counts() const noexcept { return counts_; }
    std::span<const std::size_t> context_counts() const noexcept { return context_counts_; }
    double mean(std::size_t d) const { return means_[d]; }
    /// Sum of squared deviations from the running mean.
    double sum_sq_dev(std::size_t d) const { return m2_[d]; }
    /// Unbiased sample variance; NaN below two samples.
    double sample_variance(std::size_t d) const;

    double psi(std::size_t d) const;
    double alpha(std::size_t c) const;
    double beta(std::size_t d) const;

private:
    std::vector<std::size_t> context_of_;
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> context_counts_;
    std::vector<double> means_;
    std::vector<double> m2_;
    std::size_t total_ = 0;
};

} // namespace cttts
