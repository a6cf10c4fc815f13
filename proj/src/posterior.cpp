// SPDX-License-Identifier: Apache-2.0
#include "posterior.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"

namespace cttts {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
} // namespace

// ---------------------------------------------------------------- Normal-Gamma

NormalGammaState ng_update(const NormalGammaState& s, double x) {
    NormalGammaState out;
    out.m = (s.n * s.m + x) / (s.n + 1.0);
    out.n = s.n + 1.0;
    out.a = s.a + 0.5;
    const double dev = x - s.m;
    out.b = s.b + s.n * dev * dev / (2.0 * (s.n + 1.0));
    return out;
}

NormalGammaState ng_update_batch(const NormalGammaState& p, std::size_t count, double mean,
                                 double sum_sq_dev) {
    if (count == 0) return p;
    const double N = static_cast<double>(count);
    NormalGammaState out;
    out.n = p.n + N;
    out.m = (p.n * p.m + N * mean) / out.n;
    out.a = p.a + 0.5 * N;
    const double dev = mean - p.m;
    out.b = p.b + 0.5 * sum_sq_dev + p.n * N * dev * dev / (2.0 * out.n);
    return out;
}

ParameterDraw ng_sample(const NormalGammaState& s, Rng& rng, const ThetaBox& box) {
    for (int attempt = 0; attempt < kBoxRejectionBudget; ++attempt) {
        const double lambda = rng.gamma(s.a, s.b);
        const double var = 1.0 / lambda;
        const double mu = rng.normal(s.m, std::sqrt(var / s.n));
        ParameterDraw d{mu, var};
        if (box.contains({d.mu, d.eta})) return d;
    }
    throw RuntimeError("Normal-Gamma draw rejected by theta_box " +
                       std::to_string(kBoxRejectionBudget) + " times");
}

double ng_plugin_variance(const NormalGammaState& s) {
    return s.a > 1.0 ? s.b / (s.a - 1.0) : kNaN;
}

double ng_predictive_variance(const NormalGammaState& s) {
    return s.a > 1.0 ? s.b * (s.n + 1.0) / (s.n * (s.a - 1.0)) : kInf;
}

StudentT ng_mu_marginal(const NormalGammaState& s) {
    return {s.m, std::sqrt(s.b / (s.a * s.n)), 2.0 * s.a};
}

namespace {

// Continued fraction of the regularized incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 1000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return h;
}

// log I_x(a, b) with y = 1 - x supplied separately to keep precision.
double log_ibeta(double a, double b, double x, double y, double lbeta) {
    if (x <= 0.0) return -kInf;
    if (y <= 0.0) return 0.0;
    if (x < (a + 1.0) / (a + b + 2.0))
        return a * std::log(x) + b * std::log(y) - lbeta - std::log(a) + std::log(beta_cf(a, b, x));
    const double upper = std::exp(b * std::log(y) + a * std::log(x) - lbeta - std::log(b)) * beta_cf(b, a, y);
    return std::log1p(-std::min(upper, 1.0));
}

double t_lbeta(double nu) { return std::lgamma(0.5 * nu) + std::lgamma(0.5) - std::lgamma(0.5 * (nu + 1.0)); }

double t_log_cdf(double t, double nu, double lbeta) {
    const double t2 = t * t;
    const double li = log_ibeta(0.5 * nu, 0.5, nu / (nu + t2), t2 / (nu + t2), lbeta);
    if (t <= 0.0) return std::log(0.5) + li;
    return std::log1p(-0.5 * std::exp(li));
}

double t_log_pdf(double t, double nu, double lbeta) {
    return -0.5 * std::log(nu) - lbeta - 0.5 * (nu + 1.0) * std::log1p(t * t / nu);
}

} // namespace

double student_t_log_cdf(double t, double nu) {
    if (!(nu > 0.0)) throw ConfigError("Student-t degrees of freedom must be positive");
    return t_log_cdf(t, nu, t_lbeta(nu));
}

double student_t_log_pdf(double t, double nu) {
    if (!(nu > 0.0)) throw ConfigError("Student-t degrees of freedom must be positive");
    return t_log_pdf(t, nu, t_lbeta(nu));
}

namespace {

// Upper 1e-15 quantile of the standard t law, evaluated at floor(nu) (a
// heavier tail, so conservative) and memoized per thread.
double tail_quantile(double nu) {
    thread_local std::map<double, double> cache;
    const double key = nu >= 1.0 ? std::floor(nu) : nu;
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double q = boost::math::quantile(
        boost::math::complement(boost::math::students_t_distribution<double>(key), 1e-15));
    if (cache.size() > 4096) cache.clear();
    cache.emplace(key, q);
    return q;
}

void check_law(const StudentT& L) {
    if (!(L.scale > 0.0) || !(L.nu > 0.0) || !std::isfinite(L.loc) || !std::isfinite(L.scale))
        throw RuntimeError("best_probabilities: degenerate Student-t law");
}

} // namespace

double lattice_step(std::span<const StudentT> laws) {
    double s = kInf;
    for (const auto& L : laws) {
        check_law(L);
        s = std::min(s, L.scale);
    }
    return std::exp2(std::floor(4.0 * std::log2(0.75 * s)) / 4.0);
}

namespace {
constexpr long kMaxPoints = 1 << 16;

bool lattice_fits(std::span<const StudentT> laws, double h) {
    for (const auto& L : laws)
        if (2.0 * tail_quantile(L.nu) * L.scale / h + 2.0 > static_cast<double>(kMaxPoints)) return false;
    return true;
}

// Heavy tails (few observations): adaptive quadrature over the real line.
void best_probabilities_adaptive(std::span<const StudentT> laws, std::span<double> out) {
    const std::size_t n = laws.size();
    std::vector<double> lb(n);
    for (std::size_t j = 0; j < n; ++j) lb[j] = t_lbeta(laws[j].nu);
    boost::math::quadrature::sinh_sinh<double> integrator;
    for (std::size_t d = 0; d < n; ++d) {
        auto f = [&](double x) {
            double s = t_log_pdf((x - laws[d].loc) / laws[d].scale, laws[d].nu, lb[d]) - std::log(laws[d].scale);
            for (std::size_t j = 0; j < n; ++j)
                if (j != d) s += t_log_cdf((x - laws[j].loc) / laws[j].scale, laws[j].nu, lb[j]);
            return std::exp(s);
        };
        out[d] = integrator.integrate(f, 1e-10);
    }
    double sum = 0.0;
    for (double v : out) sum += v;
    if (!(sum > 0.0)) throw RuntimeError("best_probabilities: quadrature lost all mass");
    for (double& v : out) v /= sum;
}
} // namespace

void tabulate(const StudentT& law, double h, StudentTTable& out) {
    check_law(law);
    const double k = tail_quantile(law.nu);
    out.law = law;
    out.h = h;
    out.i0 = static_cast<long>(std::floor((law.loc - k * law.scale) / h));
    out.i1 = static_cast<long>(std::ceil((law.loc + k * law.scale) / h));
    if (out.i1 - out.i0 + 1 > kMaxPoints) throw RuntimeError("best_probabilities: lattice too fine for the law");
    const std::size_t n = static_cast<std::size_t>(out.i1 - out.i0 + 1);
    out.log_pdf.resize(n);
    out.log_cdf.resize(n);
    const double lb = t_lbeta(law.nu), ls = std::log(law.scale);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (h * static_cast<double>(out.i0 + static_cast<long>(i)) - law.loc) / law.scale;
        out.log_pdf[i] = t_log_pdf(z, law.nu, lb) - ls;
        out.log_cdf[i] = t_log_cdf(z, law.nu, lb);
    }
}

void best_probabilities(std::span<const StudentTTable* const> tables, std::span<double> out) {
    const std::size_t n = tables.size();
    if (out.size() != n) throw ConfigError("best_probabilities: output size mismatch");
    if (n == 0) return;
    if (n == 1) {
        out[0] = 1.0;
        return;
    }
    const double h = tables[0]->h;
    long lo = std::numeric_limits<long>::min(), hi = std::numeric_limits<long>::min();
    for (const auto* t : tables) {
        if (t->h != h) throw ConfigError("best_probabilities: tables use different lattices");
        lo = std::max(lo, t->i0);
        hi = std::max(hi, t->i1);
    }
    // Below max_j i0_j some CDF is under 1e-15, so every product is negligible.
    std::fill(out.begin(), out.end(), 0.0);
    if (lo > hi) throw RuntimeError("best_probabilities: empty lattice");
    std::vector<double> total(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (const auto* t : tables)
        for (long i = lo; i <= std::min(hi, t->i1); ++i) total[i - lo] += t->log_cdf[i - t->i0];
    for (std::size_t d = 0; d < n; ++d) {
        const auto* t = tables[d];
        double acc = 0.0;
        for (long i = std::max(lo, t->i0); i <= t->i1; ++i)
            acc += std::exp(t->log_pdf[i - t->i0] + total[i - lo] - t->log_cdf[i - t->i0]);
        out[d] = acc * h;
    }
    double sum = 0.0;
    for (double v : out) sum += v;
    if (!(sum > 0.0)) throw RuntimeError("best_probabilities: quadrature lost all mass");
    for (double& v : out) v /= sum;
}

void best_probabilities(std::span<const StudentT> laws, std::span<double> out) {
    if (out.size() != laws.size()) throw ConfigError("best_probabilities: output size mismatch");
    if (laws.empty()) return;
    const double h = lattice_step(laws);
    if (!lattice_fits(laws, h)) return best_probabilities_adaptive(laws, out);
    std::vector<StudentTTable> tables(laws.size());
    std::vector<const StudentTTable*> ptrs;
    for (std::size_t j = 0; j < laws.size(); ++j) {
        tabulate(laws[j], h, tables[j]);
        ptrs.push_back(&tables[j]);
    }
    best_probabilities(ptrs, out);
}

// ---------------------------------------------------------------- Weibull grid

WeibullGrid::WeibullGrid(double tau, const ThetaBox& box, std::size_t n_rho, std::size_t n_shape,
                         double rho_lo, double rho_hi, double k_lo, double k_hi)
    : tau_(tau) {
    if (n_rho < 1 || n_shape < 1) throw ConfigError("grid needs at least one node per axis");
    if (!(rho_lo > 0.0) || !(k_lo > 0.0) || rho_hi < rho_lo || k_hi < k_lo)
        throw ConfigError("invalid Weibull grid bounds");
    auto linspace = [](double lo, double hi, std::size_t n) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        return v;
    };
    rho_ = linspace(rho_lo, rho_hi, n_rho);
    shape_ = linspace(k_lo, k_hi, n_shape);
    for (double r : rho_) log_rho_.push_back(std::log(r));
    for (double k : shape_) log_shape_.push_back(std::log(k));

    const std::size_t n = n_rho * n_shape;
    mean_.resize(n);
    rho_pow_neg_k_.resize(n);
    censored_.resize(n);
    valid_.resize(n);
    for (std::size_t i = 0; i < n_rho; ++i) {
        for (std::size_t j = 0; j < n_shape; ++j) {
            const std::size_t node = i * n_shape + j;
            const double k = shape_[j];
            mean_[node] = weibull_mean_from_scale(rho_[i], k);
            rho_pow_neg_k_[node] = std::exp(-k * log_rho_[i]);
            censored_[node] = std::isfinite(tau) ? -std::pow(tau / rho_[i], k) : -kInf;
            const bool ok = std::isfinite(mean_[node]) && mean_[node] >= box.mu_lo &&
                            mean_[node] <= box.mu_hi && k >= box.eta_lo && k <= box.eta_hi;
            valid_[node] = ok ? 1 : 0;
            if (ok) valid_nodes_.push_back(node);
        }
    }
    if (valid_nodes_.empty()) throw ConfigError("Weibull grid has no node inside theta_box");
}

void WeibullGrid::add_log_likelihood(double y, std::span<const std::size_t> nodes,
                                     std::span<double> lw, std::vector<double>& yk) const {
    if (!(y > 0.0)) throw RuntimeError("Weibull grid update needs a positive observation");
    if (y > tau_) throw RuntimeError("Weibull observation exceeds the censoring time");
    if (y == tau_) {
        for (std::size_t node : nodes) lw[node] += censored_[node];
        return;
    }
    const std::size_t ns = shape_.size();
    const double ly = std::log(y);
    yk.resize(ns);
    for (std::size_t j = 0; j < ns; ++j) yk[j] = std::exp(shape_[j] * ly);
    for (std::size_t node : nodes) {
        const std::size_t i = node / ns;
        const std::size_t j = node - i * ns;
        lw[node] += log_shape_[j] - ly + shape_[j] * (ly - log_rho_[i]) - yk[j] * rho_pow_neg_k_[node];
    }
}

double WeibullGrid::log_likelihood(double y, std::size_t node) const {
    const double rho = node_rho(node), k = node_shape(node);
    if (y >= tau_) return -std::pow(tau_ / rho, k);
    return std::log(k / rho) + (k - 1.0) * std::log(y / rho) - std::pow(y / rho, k);
}

std::shared_ptr<const WeibullGrid> WeibullGrid::shared(double tau, const ThetaBox& box) {
    using Key = std::tuple<double, double, double, double, double>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const WeibullGrid>> cache;
    const Key key{tau, box.mu_lo, box.mu_hi, box.eta_lo, box.eta_hi};
    std::lock_guard lock(mutex);
    auto& slot = cache[key];
    if (!slot) slot = std::make_shared<const WeibullGrid>(tau, box);
    return slot;
}

GridPosterior::GridPosterior(std::shared_ptr<const WeibullGrid> grid) : grid_(std::move(grid)) {
    log_w_.assign(grid_->size(), -kInf);
    for (std::size_t node : grid_->valid_nodes()) log_w_[node] = 0.0;
    active_.assign(grid_->valid_nodes().begin(), grid_->valid_nodes().end());
    refresh();
}

void GridPosterior::update(double value) {
    grid_->add_log_likelihood(value, active_, log_w_, scratch_);
    ++n_obs_;
    double top = -kInf;
    for (std::size_t node : active_) top = std::max(top, log_w_[node]);
    const double floor = top - kPruneNats;
    std::size_t keep = 0;
    for (std::size_t node : active_) {
        if (log_w_[node] >= floor)
            active_[keep++] = node;
        else
            log_w_[node] = -kInf;
    }
    active_.resize(keep);
    refresh();
}

void GridPosterior::refresh() {
    double top = -kInf;
    for (std::size_t node : active_) top = std::max(top, log_w_[node]);
    cdf_.resize(active_.size());
    double total = 0.0, smu = 0.0, smu2 = 0.0, sk = 0.0;
    for (std::size_t i = 0; i < active_.size(); ++i) {
        const std::size_t node = active_[i];
        const double w = std::exp(log_w_[node] - top);
        const double mu = grid_->node_mean(node);
        total += w;
        smu += w * mu;
        smu2 += w * mu * mu;
        sk += w * grid_->node_shape(node);
        cdf_[i] = total;
    }
    mean_mu_ = smu / total;
    mean_k_ = sk / total;
    var_mu_ = std::max(0.0, smu2 / total - mean_mu_ * mean_mu_);
}

std::size_t GridPosterior::sample_node(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return active_[static_cast<std::size_t>(it - cdf_.begin())];
}

ParameterDraw GridPosterior::sample(Rng& rng) const {
    const std::size_t node = sample_node(rng);
    return {grid_->node_mean(node), grid_->node_shape(node)};
}

std::vector<double> GridPosterior::normalized_weights() const {
    std::vector<double> w(log_w_.size(), 0.0);
    double top = -kInf;
    for (std::size_t node : active_) top = std::max(top, log_w_[node]);
    double total = 0.0;
    for (std::size_t node : active_) total += (w[node] = std::exp(log_w_[node] - top));
    for (std::size_t node : active_) w[node] /= total;
    return w;
}

// ---------------------------------------------------------------- KL

double kl_gaussian(const Theta& t1, const Theta& t2) {
    if (!(t1.eta > 0.0) || !(t2.eta > 0.0)) throw ConfigError("Gaussian KL needs positive variances");
    const double d = t1.mu - t2.mu;
    const double v = 0.5 * std::log(t2.eta / t1.eta) + (t1.eta + d * d) / (2.0 * t2.eta) - 0.5;
    return std::max(0.0, v);
}

namespace {

// Ein(x) = ∫_0^x (1 - e^{-t}) / t dt.
double ein(double x) {
    if (x < 1.0) {
        double term = x, sum = x;
        for (int n = 2; n < 60; ++n) {
            term *= -x / n;
            const double add = term / n;
            sum += add;
            if (std::abs(add) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    return boost::math::expint(1, x) + std::log(x) + std::numbers::egamma;
}

// ∫_0^U e^{-u} ln u du.
double exp_log_integral(double U) {
    if (!std::isfinite(U)) return -std::numbers::egamma;
    if (U <= 0.0) return 0.0;
    return -std::expm1(-U) * std::log(U) - ein(U);
}

} // namespace

double kl_weibull_censored_scale(double rho1, double k1, double rho2, double k2, double tau) {
    if (!(rho1 > 0.0 && k1 > 0.0 && rho2 > 0.0 && k2 > 0.0))
        throw ConfigError("Weibull KL needs positive scale and shape");
    if (!(tau > 0.0)) return 0.0;
    const double c0 = std::log(k1 / k2) - k2 * std::log(rho1 / rho2);
    const double r = std::pow(rho1 / rho2, k2);
    const double q = k2 / k1;
    const double U = std::isfinite(tau) ? std::pow(tau / rho1, k1) : kInf;
    double v;
    if (!std::isfinite(U)) {
        v = c0 - (k1 - k2) / k1 * std::numbers::egamma - 1.0 + r * std::tgamma(1.0 + q);
    } else {
        const double one_minus_s = -std::expm1(-U);
        const double lower2 = boost::math::gamma_p(2.0, U);
        const double lower_q = boost::math::tgamma_lower(1.0 + q, U);
        // Censoring atom: S1 * (ln S1 - ln S2) = e^{-U} (-U + (tau/rho2)^k2).
        const double log_v2 = k2 * std::log(tau / rho2);
        const double atom = -U * std::exp(-U) + std::exp(log_v2 - U);
        v = c0 * one_minus_s + (k1 - k2) / k1 * exp_log_integral(U) - lower2 + r * lower_q + atom;
    }
    if (!std::isfinite(v)) throw RuntimeError("Weibull KL evaluation overflowed");
    return std::max(0.0, v);
}

double kl_weibull_censored(const Theta& t1, const Theta& t2, double tau) {
    if (!(t1.eta > 0.0 && t2.eta > 0.0)) throw ConfigError("Weibull KL needs positive shapes");
    return kl_weibull_censored_scale(weibull_scale_from_mean(t1.mu, t1.eta), t1.eta,
                                     weibull_scale_from_mean(t2.mu, t2.eta), t2.eta, tau);
}

double weibull_log_ratio(double rho1, double k1, double rho2, double k2, double tau, double y) {
    if (y >= tau) return -std::pow(tau / rho1, k1) + std::pow(tau / rho2, k2);
    auto logf = [y](double rho, double k) {
        return std::log(k / rho) + (k - 1.0) * std::log(y / rho) - std::pow(y / rho, k);
    };
    return logf(rho1, k1) - logf(rho2, k2);
}

// ---------------------------------------------------------------- models

NormalGammaModel::NormalGammaModel(std::size_t n_designs, ThetaBox box, NormalGammaState prior)
    : states_(n_designs, prior), box_(box) {
    if (!(prior.n > 0.0 && prior.a > 0.0 && prior.b > 0.0))
        throw ConfigError("Normal-Gamma prior needs positive n, a, b");
}

void NormalGammaModel::observe(std::size_t design, double value) {
    states_.at(design) = ng_update(states_[design], value);
}

bool NormalGammaModel::best_probabilities(std::size_t first, std::size_t count, std::span<double> out) const {
    if (first + count > states_.size()) throw ConfigError("best_probabilities: design range out of bounds");
    std::vector<StudentT> laws(count);
    for (std::size_t j = 0; j < count; ++j) laws[j] = ng_mu_marginal(states_[first + j]);
    const double h = lattice_step(laws);
    if (!lattice_fits(laws, h)) {
        cttts::best_probabilities(std::span<const StudentT>(laws), out);
        return true;
    }
    if (tables_.size() != states_.size()) tables_.resize(states_.size());
    std::vector<const StudentTTable*> ptrs(count);
    for (std::size_t j = 0; j < count; ++j) {
        auto& t = tables_[first + j];
        const auto& L = laws[j];
        if (t.h != h || t.law.loc != L.loc || t.law.scale != L.scale || t.law.nu != L.nu) tabulate(L, h, t);
        ptrs[j] = &t;
    }
    cttts::best_probabilities(ptrs, out);
    return true;
}

void NormalGammaModel::sample_mu(Rng& rng, std::span<double> out) const {
    for (std::size_t d = 0; d < states_.size(); ++d) out[d] = ng_sample(states_[d], rng, box_).mu;
}

ParameterDraw NormalGammaModel::sample(std::size_t design, Rng& rng) const {
    return ng_sample(states_.at(design), rng, box_);
}

double NormalGammaModel::mean_eta(std::size_t design) const {
    return ng_plugin_variance(states_.at(design));
}

double NormalGammaModel::predictive_variance(std::size_t design) const {
    return ng_predictive_variance(states_.at(design));
}

nlohmann::json NormalGammaModel::snapshot() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : states_) j.push_back({{"m", s.m}, {"n", s.n}, {"a", s.a}, {"b", s.b}});
    return {{"family", "normal-gamma"}, {"designs", j}};
}

WeibullGridModel::WeibullGridModel(std::size_t n_designs, std::shared_ptr<const WeibullGrid> grid)
    : posts_(n_designs, GridPosterior(std::move(grid))) {}

void WeibullGridModel::observe(std::size_t design, double value) { posts_.at(design).update(value); }

void WeibullGridModel::sample_mu(Rng& rng, std::span<double> out) const {
    for (std::size_t d = 0; d < posts_.size(); ++d) {
        const auto& p = posts_[d];
        out[d] = p.grid().node_mean(p.sample_node(rng));
    }
}

ParameterDraw WeibullGridModel::sample(std::size_t design, Rng& rng) const {
    return posts_.at(design).sample(rng);
}

nlohmann::json WeibullGridModel::snapshot() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : posts_)
        j.push_back({{"mean_mu", p.mean_mu()},
                     {"mean_shape", p.mean_shape()},
                     {"active_nodes", p.active_nodes().size()},
                     {"observations", p.observations()}});
    return {{"family", "weibull-grid"}, {"designs", j}};
}

std::unique_ptr<PosteriorModel> make_model(ModelKind kind, const ProblemInstance& instance) {
    if (kind == ModelKind::Gaussian) {
        // Gaussian beliefs on censored data use a box wide enough for any observation scale.
        ThetaBox box = instance.family() == Family::Gaussian ? instance.box() : ThetaBox{};
        return std::make_unique<NormalGammaModel>(instance.num_designs(), box);
    }
    if (instance.family() != Family::WeibullCensored)
        throw ConfigError("the weibull posterior model needs a weibull-censored instance");
    return std::make_unique<WeibullGridModel>(instance.num_designs(),
                                              WeibullGrid::shared(instance.tau(), instance.box()));
}

} // namespace cttts
