// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "instance.hpp"
#include "rng.hpp"

namespace cttts {

struct ParameterDraw {
    double mu = 0.0;
    double eta = 0.0;
};

// ---------------------------------------------------------------- Normal-Gamma

/// Conjugate belief: 1/sigma^2 ~ Gamma(a, rate b), mu | sigma^2 ~ N(m, sigma^2 / n).
struct NormalGammaState {
    double m = 0.0;
    double n = 1e-3;
    double a = 1e-3;
    double b = 1e-3;
};

inline constexpr NormalGammaState kDefaultNormalGammaPrior{};
inline constexpr int kBoxRejectionBudget = 1000;

NormalGammaState ng_update(const NormalGammaState& state, double value);
/// Batch update from count, sample mean and sum of squared deviations.
NormalGammaState ng_update_batch(const NormalGammaState& prior, std::size_t count, double mean,
                                 double sum_sq_dev);
ParameterDraw ng_sample(const NormalGammaState& state, Rng& rng, const ThetaBox& box);
/// Plug-in variance b / (a - 1) (NaN when a <= 1).
double ng_plugin_variance(const NormalGammaState& state);
/// Posterior predictive variance of one new observation.
double ng_predictive_variance(const NormalGammaState& state);

/// Location-scale Student-t law (marginal of mu under a Normal-Gamma belief).
struct StudentT {
    double loc = 0.0;
    double scale = 1.0;
    double nu = 1.0;
};

StudentT ng_mu_marginal(const NormalGammaState& state);
/// Log CDF / log density of the standard Student-t law with `nu` degrees of freedom.
double student_t_log_cdf(double t, double nu);
double student_t_log_pdf(double t, double nu);
/// P(X_d = max_j X_j) for independent Student-t variables (uniform-grid
/// trapezoid quadrature; adaptive sinh-sinh quadrature when a tail is too
/// heavy for the lattice). Entries are accurate in relative terms down to
/// about 1e-15; smaller ones may come out as 0.
void best_probabilities(std::span<const StudentT> laws, std::span<double> out);

/// Log density and log CDF of one law on the lattice x_i = i * h, i in [i0, i1],
/// covering all but 1e-15 of its mass on either side.
struct StudentTTable {
    StudentT law;
    double h = 0.0;
    long i0 = 0, i1 = -1;
    std::vector<double> log_pdf, log_cdf;
};

/// Common lattice step for a set of laws (quantized so it changes rarely).
double lattice_step(std::span<const StudentT> laws);
void tabulate(const StudentT& law, double h, StudentTTable& out);
/// Same as above from tables sharing one step; outside a table the CDF is
/// taken as 1 above and 0 below.
void best_probabilities(std::span<const StudentTTable* const> tables, std::span<double> out);

// ---------------------------------------------------------------- Weibull grid

/// Shared, immutable lattice over (rho, k) with per-node constants for a
/// given censoring time. Nodes whose implied mean leaves the box are masked.
class WeibullGrid {
public:
    static constexpr std::size_t kDefaultRhoPoints = 200;
    static constexpr std::size_t kDefaultShapePoints = 100;

    WeibullGrid(double tau, const ThetaBox& box, std::size_t n_rho = kDefaultRhoPoints,
                std::size_t n_shape = kDefaultShapePoints, double rho_lo = 0.1, double rho_hi = 200.0,
                double k_lo = 0.1, double k_hi = 20.0);

    std::size_t n_rho() const noexcept { return rho_.size(); }
    std::size_t n_shape() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return rho_.size() * shape_.size(); }
    double tau() const noexcept { return tau_; }
    double rho(std::size_t i) const { return rho_[i]; }
    double shape(std::size_t j) const { return shape_[j]; }
    // Node index = i * n_shape + j.
    double node_rho(std::size_t node) const { return rho_[node / shape_.size()]; }
    double node_shape(std::size_t node) const { return shape_[node % shape_.size()]; }
    double node_mean(std::size_t node) const { return mean_[node]; }
    bool node_valid(std::size_t node) const { return valid_[node] != 0; }
    std::span<const std::size_t> valid_nodes() const noexcept { return valid_nodes_; }

    /// log p(value | node) for every node in `nodes`, added into `log_weights`.
    void add_log_likelihood(double value, std::span<const std::size_t> nodes,
                            std::span<double> log_weights, std::vector<double>& scratch) const;
    /// log p(value | rho, k) for a single node (reference implementation).
    double log_likelihood(double value, std::size_t node) const;

    static std::shared_ptr<const WeibullGrid> shared(double tau, const ThetaBox& box);

private:
    double tau_;
    std::vector<double> rho_, shape_, log_rho_, log_shape_;
    std::vector<double> mean_, rho_pow_neg_k_, censored_;
    std::vector<unsigned char> valid_;
    std::vector<std::size_t> valid_nodes_;
};

/// Per-design grid posterior with an uninformative prior over valid nodes.
class GridPosterior {
public:
    static constexpr double kPruneNats = 50.0;

    explicit GridPosterior(std::shared_ptr<const WeibullGrid> grid);

    void update(double value);
    ParameterDraw sample(Rng& rng) const;
    /// Sample only a node index.
    std::size_t sample_node(Rng& rng) const;

    const WeibullGrid& grid() const noexcept { return *grid_; }
    /// Log weight of a node (-inf for masked or pruned nodes).
    double log_weight(std::size_t node) const { return log_w_[node]; }
    std::span<const std::size_t> active_nodes() const noexcept { return active_; }
    /// Normalized weights over the full lattice.
    std::vector<double> normalized_weights() const;
    double mean_mu() const noexcept { return mean_mu_; }
    double mean_shape() const noexcept { return mean_k_; }
    double var_mu() const noexcept { return var_mu_; }
    std::size_t observations() const noexcept { return n_obs_; }

private:
    void refresh();

    std::shared_ptr<const WeibullGrid> grid_;
    std::vector<double> log_w_;
    std::vector<std::size_t> active_;
    std::vector<double> cdf_;
    std::vector<double> scratch_;
    double mean_mu_ = 0.0, mean_k_ = 0.0, var_mu_ = 0.0;
    std::size_t n_obs_ = 0;
};

// ---------------------------------------------------------------- KL

/// KL(N(mu1, var1) || N(mu2, var2)); Theta.eta is the variance.
double kl_gaussian(const Theta& t1, const Theta& t2);
/// KL between right-censored Weibull laws given by (mean, shape).
double kl_weibull_censored(const Theta& t1, const Theta& t2, double tau);
/// Same, parameterized by (scale, shape).
double kl_weibull_censored_scale(double rho1, double k1, double rho2, double k2, double tau);
/// Log-likelihood ratio log p(y|θ1)/p(y|θ2) for one censored Weibull observation.
double weibull_log_ratio(double rho1, double k1, double rho2, double k2, double tau, double y);

// ---------------------------------------------------------------- models

enum class RateFamily { GaussianKnownVar, GaussianUnknownVar, WeibullCensored };

/// Joint posterior over all designs of an instance (independent designs).
class PosteriorModel {
public:
    virtual ~PosteriorModel() = default;
    virtual void observe(std::size_t design, double value) = 0;
    /// One joint draw of the performance parameters of every design.
    virtual void sample_mu(Rng& rng, std::span<double> out) const = 0;
    virtual ParameterDraw sample(std::size_t design, Rng& rng) const = 0;
    virtual double mean_mu(std::size_t design) const = 0;
    virtual double mean_eta(std::size_t design) const = 0;
    /// Posterior (predictive) variance used by variance-aware baselines.
    virtual double predictive_variance(std::size_t design) const = 0;
    virtual RateFamily rate_family() const noexcept = 0;
    virtual std::size_t num_designs() const noexcept = 0;
    virtual nlohmann::json snapshot() const = 0;
    /// Posterior probability that each of designs [first, first + count)
    /// has the largest mu among them. False when the model cannot compute it.
    virtual bool best_probabilities(std::size_t, std::size_t, std::span<double>) const { return false; }
};

class NormalGammaModel final : public PosteriorModel {
public:
    NormalGammaModel(std::size_t n_designs, ThetaBox box,
                     NormalGammaState prior = kDefaultNormalGammaPrior);

    void observe(std::size_t design, double value) override;
    void sample_mu(Rng& rng, std::span<double> out) const override;
    ParameterDraw sample(std::size_t design, Rng& rng) const override;
    double mean_mu(std::size_t design) const override { return states_[design].m; }
    double mean_eta(std::size_t design) const override;
    double predictive_variance(std::size_t design) const override;
    RateFamily rate_family() const noexcept override { return RateFamily::GaussianUnknownVar; }
    std::size_t num_designs() const noexcept override { return states_.size(); }
    nlohmann::json snapshot() const override;
    bool best_probabilities(std::size_t first, std::size_t count, std::span<double> out) const override;

    const NormalGammaState& state(std::size_t design) const { return states_[design]; }

private:
    std::vector<NormalGammaState> states_;
    ThetaBox box_;
    mutable std::vector<StudentTTable> tables_;
};

class WeibullGridModel final : public PosteriorModel {
public:
    WeibullGridModel(std::size_t n_designs, std::shared_ptr<const WeibullGrid> grid);

    void observe(std::size_t design, double value) override;
    void sample_mu(Rng& rng, std::span<double> out) const override;
    ParameterDraw sample(std::size_t design, Rng& rng) const override;
    double mean_mu(std::size_t design) const override { return posts_[design].mean_mu(); }
    double mean_eta(std::size_t design) const override { return posts_[design].mean_shape(); }
    double predictive_variance(std::size_t design) const override { return posts_[design].var_mu(); }
    RateFamily rate_family() const noexcept override { return RateFamily::WeibullCensored; }
    std::size_t num_designs() const noexcept override { return posts_.size(); }
    nlohmann::json snapshot() const override;

    const GridPosterior& posterior(std::size_t design) const { return posts_[design]; }

private:
    std::vector<GridPosterior> posts_;
};

enum class ModelKind { Gaussian, Weibull };

std::unique_ptr<PosteriorModel> make_model(ModelKind kind, const ProblemInstance& instance);

} // namespace cttts
