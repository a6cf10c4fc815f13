// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "instance.hpp"
#include "posterior.hpp"

namespace cttts {

std::string_view to_string(RateFamily family) noexcept;
RateFamily rate_family_from_string(std::string_view name);

struct Tolerances {
    double mu_tol = 1e-10;  // crossing-value line search (absolute)
    double eta_tol = 1e-9;  // nuisance line search (absolute, log scale for Weibull shape)
    int outer_grid = 32;    // coarse points before golden refinement
    int inner_grid = 24;
};

struct RateValue {
    double value = 0.0;
    double crossing_mu = 0.0;
};

/// Closed form Δ² / (σ²_d/ψ_d + σ²_d'/ψ_d').
double rate_gaussian_known_var(double psi_d, double psi_dp, double mu_d, double mu_dp, double var_d,
                               double var_dp);

/// Exact unknown-variance rate: stationary points of the crossing-value
/// objective are the roots of a cubic.
RateValue rate_gaussian_unknown_var(double psi_d, double psi_dp, const Theta& d, const Theta& dp);

/// Nuisance-profiled Weibull KL: min over shape of D(θ* || (mu, k)).
double weibull_profile_kl(const Theta& star, double mu, double tau, double k_lo, double k_hi,
                          const Tolerances& tol = {});
/// Shape range searched for a Weibull nuisance parameter inside a box.
std::pair<double, double> weibull_shape_range(const ThetaBox& box);

/// Infimum over a common crossing value mu in [mu*_d', mu*_d] of
/// ψ_d D(θ*_d||θ_d) + ψ_d' D(θ*_d'||θ_d'), each term minimized over its
/// nuisance parameter. Grid-first golden-section line searches.
RateValue rate_generic(double psi_d, double psi_dp, const Theta& d, const Theta& dp, RateFamily family,
                       double tau = std::numeric_limits<double>::infinity(), const ThetaBox& box = {},
                       const Tolerances& tol = {});

enum class PairKind { GaussianKnownVar, GaussianUnknownVar, WeibullCensored, Harmonic, Min };

struct RateGradient {
    double dx = 0.0;
    double dy = 0.0;
    bool kink = false;
};

/// Bivariate rate G(x, y) of one (preferred, undesired) design pair:
/// concave, nondecreasing, positively homogeneous of degree 1.
class PairRate {
public:
    static PairRate gaussian_known_var(const Theta& preferred, const Theta& undesired);
    static PairRate gaussian_unknown_var(const Theta& preferred, const Theta& undesired);
    /// Tabulates the profiled KL terms on `nodes` crossing values.
    static PairRate weibull(const Theta& preferred, const Theta& undesired, double tau,
                            const ThetaBox& box, int nodes = 257);
    static PairRate harmonic(double scale = 1.0);
    static PairRate minimum(double scale = 1.0);
    static PairRate from_json(const nlohmann::json& j);

    PairKind kind() const noexcept { return kind_; }
    const Theta& preferred() const noexcept { return p_; }
    const Theta& undesired() const noexcept { return u_; }
    bool smooth() const noexcept { return kind_ != PairKind::Min; }
    double operator()(double x, double y) const;
    /// Value and minimizing crossing value (NaN for synthetic kinds).
    RateValue evaluate(double x, double y) const;
    /// Analytic or envelope partial derivatives.
    RateGradient gradient(double x, double y) const;
    /// G(1, +inf) and G(+inf, 1).
    double rate_x_only() const noexcept { return x_only_; }
    double rate_y_only() const noexcept { return y_only_; }
    /// Smallest y >= 0 with G(x, y) >= z; +inf when unattainable.
    double invert_y(double x, double z) const;
    /// Smallest x >= 0 with G(x, y) >= z; +inf when unattainable.
    double invert_x(double y, double z) const;
    nlohmann::json to_json() const;

private:
    struct Table {
        std::vector<double> mu, h1, h2;
    };
    PairKind kind_ = PairKind::Harmonic;
    Theta p_, u_;
    double tau_ = std::numeric_limits<double>::infinity();
    double scale_ = 1.0;
    double x_only_ = 0.0, y_only_ = 0.0;
    std::shared_ptr<const Table> table_;
};

/// Central finite-difference gradient with step 1e-6 times the argument.
RateGradient gradient_fd(const PairRate& rate, double x, double y);

} // namespace cttts
