// SPDX-License-Identifier: Apache-2.0
#include "rates.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "error.hpp"

namespace cttts {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Min1D {
    double x;
    double f;
};

// Coarse grid, then golden section inside the bracket around the best node.
template <class F>
Min1D minimize_1d(F&& f, double a, double b, int n_grid, double tol) {
    if (!(b > a)) return {a, f(a)};
    n_grid = std::max(n_grid, 3);
    Min1D best{a, kInf};
    int best_i = 0;
    std::vector<double> xs(static_cast<std::size_t>(n_grid));
    for (int i = 0; i < n_grid; ++i) {
        const double x = i == n_grid - 1 ? b : a + (b - a) * i / (n_grid - 1);
        xs[static_cast<std::size_t>(i)] = x;
        const double v = f(x);
        if (v < best.f) {
            best = {x, v};
            best_i = i;
        }
    }
    double lo = xs[static_cast<std::size_t>(std::max(best_i - 1, 0))];
    double hi = xs[static_cast<std::size_t>(std::min(best_i + 1, n_grid - 1))];
    constexpr double kInvPhi = 0.6180339887498949;
    double c = hi - kInvPhi * (hi - lo), d = lo + kInvPhi * (hi - lo);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 300 && hi - lo > tol; ++it) {
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - kInvPhi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + kInvPhi * (hi - lo);
            fd = f(d);
        }
    }
    if (fc < best.f) best = {c, fc};
    if (fd < best.f) best = {d, fd};
    return best;
}

// Root of a monotone-bracketed function; returns the endpoint on the
// nonnegative side.
template <class F>
double bracketed_root(F&& f, double lo, double hi, double flo, double fhi) {
    boost::uintmax_t iters = 300;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                boost::math::tools::eps_tolerance<double>(52), iters);
    return f(r.second) >= 0.0 ? r.second : r.first;
}

double half_log1p_sq(double d, double s) { return 0.5 * std::log1p(d * d / s); }

void check_variance(double v) {
    if (!(v > 0.0)) throw ConfigError("rate functions need positive variances");
}

} // namespace

std::string_view to_string(RateFamily family) noexcept {
    switch (family) {
    case RateFamily::GaussianKnownVar: return "gaussian-known-var";
    case RateFamily::GaussianUnknownVar: return "gaussian-unknown-var";
    case RateFamily::WeibullCensored: return "weibull-censored";
    }
    return "unknown";
}

RateFamily rate_family_from_string(std::string_view name) {
    if (name == "gaussian-known-var") return RateFamily::GaussianKnownVar;
    if (name == "gaussian-unknown-var") return RateFamily::GaussianUnknownVar;
    if (name == "weibull-censored" || name == "weibull") return RateFamily::WeibullCensored;
    throw ConfigError("unknown rate family '" + std::string(name) +
                      "' (expected gaussian-known-var | gaussian-unknown-var | weibull-censored)");
}

double rate_gaussian_known_var(double psi_d, double psi_dp, double mu_d, double mu_dp, double var_d,
                               double var_dp) {
    check_variance(var_d);
    check_variance(var_dp);
    if (!(psi_d > 0.0) || !(psi_dp > 0.0)) return 0.0;
    const double delta = mu_d - mu_dp;
    return delta * delta / (var_d / psi_d + var_dp / psi_dp);
}

RateValue rate_gaussian_unknown_var(double x, double y, const Theta& p, const Theta& q) {
    check_variance(p.eta);
    check_variance(q.eta);
    const double delta = p.mu - q.mu;
    if (!(delta > 0.0)) return {0.0, 0.5 * (p.mu + q.mu)};
    if (!(x > 0.0)) return {0.0, q.mu};
    if (!(y > 0.0)) return {0.0, p.mu};
    const double s1 = p.eta, s2 = q.eta;
    if (std::isinf(x) && std::isinf(y)) return {kInf, kNaN};
    if (std::isinf(y)) return {x * half_log1p_sq(delta, s1), q.mu};
    if (std::isinf(x)) return {y * half_log1p_sq(delta, s2), p.mu};

    // u = mu_d - crossing; objective derivative in u has the sign of p(u).
    const double A = x + y, B = -delta * (2.0 * x + y), C = x * (s2 + delta * delta) + y * s1,
                 D = -y * delta * s1;
    auto cubic = [&](double u) { return ((A * u + B) * u + C) * u + D; };
    auto objective = [&](double u) {
        return x * half_log1p_sq(u, s1) + y * half_log1p_sq(delta - u, s2);
    };

    std::array<double, 4> cuts{0.0, 0.0, 0.0, delta};
    std::size_t n_cuts = 1;
    const double disc = B * B - 3.0 * A * C;
    if (disc > 0.0) {
        const double sq = std::sqrt(disc);
        double r1 = (-B - sq) / (3.0 * A), r2 = (-B + sq) / (3.0 * A);
        for (double r : {r1, r2})
            if (r > 0.0 && r < delta) cuts[n_cuts++] = r;
    }
    cuts[n_cuts++] = delta;
    std::sort(cuts.begin(), cuts.begin() + static_cast<std::ptrdiff_t>(n_cuts));

    RateValue best{kInf, kNaN};
    for (std::size_t i = 0; i + 1 < n_cuts; ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        const double flo = cubic(lo), fhi = cubic(hi);
        if (!(flo < 0.0 && fhi >= 0.0)) continue;
        const double u = fhi == 0.0 ? hi : bracketed_root(cubic, lo, hi, flo, fhi);
        const double v = objective(u);
        if (v < best.value) best = {v, p.mu - u};
    }
    if (!std::isfinite(best.value)) {
        // Degenerate cubic (numerically flat); fall back to the endpoints.
        const double v0 = objective(0.0), v1 = objective(delta);
        best = v0 <= v1 ? RateValue{v0, p.mu} : RateValue{v1, q.mu};
    }
    return best;
}

std::pair<double, double> weibull_shape_range(const ThetaBox& box) {
    return {std::max(box.eta_lo, 0.1), std::min(box.eta_hi, 20.0)};
}

double weibull_profile_kl(const Theta& star, double mu, double tau, double k_lo, double k_hi,
                          const Tolerances& tol) {
    const double rho_star = weibull_scale_from_mean(star.mu, star.eta);
    auto f = [&](double log_k) {
        const double k = std::exp(log_k);
        return kl_weibull_censored_scale(rho_star, star.eta, weibull_scale_from_mean(mu, k), k, tau);
    };
    return minimize_1d(f, std::log(k_lo), std::log(k_hi), tol.inner_grid, tol.eta_tol).f;
}

RateValue rate_generic(double x, double y, const Theta& p, const Theta& q, RateFamily family,
                       double tau, const ThetaBox& box, const Tolerances& tol) {
    if (!(p.mu > q.mu)) throw ConfigError("rate_generic needs mu_d > mu_d'");
    if (!(x > 0.0) && !(y > 0.0)) return {0.0, kNaN};
    if (!(x > 0.0)) return {0.0, q.mu};
    if (!(y > 0.0)) return {0.0, p.mu};

    std::function<double(double)> objective;
    switch (family) {
    case RateFamily::GaussianKnownVar:
        check_variance(p.eta);
        check_variance(q.eta);
        objective = [&](double mu) {
            return x * kl_gaussian(p, {mu, p.eta}) + y * kl_gaussian(q, {mu, q.eta});
        };
        break;
    case RateFamily::GaussianUnknownVar:
        check_variance(p.eta);
        check_variance(q.eta);
        objective = [&](double mu) {
            return x * half_log1p_sq(p.mu - mu, p.eta) + y * half_log1p_sq(mu - q.mu, q.eta);
        };
        break;
    case RateFamily::WeibullCensored: {
        const auto [k_lo, k_hi] = weibull_shape_range(box);
        objective = [&, k_lo, k_hi](double mu) {
            return x * weibull_profile_kl(p, mu, tau, k_lo, k_hi, tol) +
                   y * weibull_profile_kl(q, mu, tau, k_lo, k_hi, tol);
        };
        break;
    }
    }
    const Min1D m = minimize_1d(objective, q.mu, p.mu, tol.outer_grid, tol.mu_tol);
    return {m.f, m.x};
}

// ---------------------------------------------------------------- PairRate

PairRate PairRate::gaussian_known_var(const Theta& p, const Theta& u) {
    check_variance(p.eta);
    check_variance(u.eta);
    if (!(p.mu > u.mu)) throw ConfigError("preferred design must have the larger mean");
    PairRate r;
    r.kind_ = PairKind::GaussianKnownVar;
    r.p_ = p;
    r.u_ = u;
    const double d2 = (p.mu - u.mu) * (p.mu - u.mu);
    r.x_only_ = d2 / p.eta;
    r.y_only_ = d2 / u.eta;
    return r;
}

PairRate PairRate::gaussian_unknown_var(const Theta& p, const Theta& u) {
    check_variance(p.eta);
    check_variance(u.eta);
    if (!(p.mu > u.mu)) throw ConfigError("preferred design must have the larger mean");
    PairRate r;
    r.kind_ = PairKind::GaussianUnknownVar;
    r.p_ = p;
    r.u_ = u;
    r.x_only_ = half_log1p_sq(p.mu - u.mu, p.eta);
    r.y_only_ = half_log1p_sq(p.mu - u.mu, u.eta);
    return r;
}

PairRate PairRate::weibull(const Theta& p, const Theta& u, double tau, const ThetaBox& box, int nodes) {
    if (!(p.mu > u.mu)) throw ConfigError("preferred design must have the larger mean");
    if (!(p.eta > 0.0 && u.eta > 0.0)) throw ConfigError("Weibull shapes must be positive");
    if (nodes < 2) throw ConfigError("Weibull rate table needs at least two nodes");
    PairRate r;
    r.kind_ = PairKind::WeibullCensored;
    r.p_ = p;
    r.u_ = u;
    r.tau_ = tau;
    const auto [k_lo, k_hi] = weibull_shape_range(box);
    auto table = std::make_shared<Table>();
    const auto n = static_cast<std::size_t>(nodes);
    table->mu.resize(n);
    table->h1.resize(n);
    table->h2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = i + 1 == n ? p.mu : u.mu + (p.mu - u.mu) * static_cast<double>(i) / (n - 1);
        table->mu[i] = mu;
        table->h1[i] = i + 1 == n ? 0.0 : weibull_profile_kl(p, mu, tau, k_lo, k_hi);
        table->h2[i] = i == 0 ? 0.0 : weibull_profile_kl(u, mu, tau, k_lo, k_hi);
    }
    r.x_only_ = table->h1.front();
    r.y_only_ = table->h2.back();
    r.table_ = std::move(table);
    return r;
}

PairRate PairRate::harmonic(double scale) {
    if (!(scale > 0.0)) throw ConfigError("harmonic rate scale must be positive");
    PairRate r;
    r.kind_ = PairKind::Harmonic;
    r.scale_ = scale;
    r.x_only_ = r.y_only_ = 2.0 * scale;
    return r;
}

PairRate PairRate::minimum(double scale) {
    if (!(scale > 0.0)) throw ConfigError("min rate scale must be positive");
    PairRate r;
    r.kind_ = PairKind::Min;
    r.scale_ = scale;
    r.x_only_ = r.y_only_ = scale;
    return r;
}

RateValue PairRate::evaluate(double x, double y) const {
    if (!(x > 0.0) || !(y > 0.0)) {
        const double mu = !(x > 0.0) ? u_.mu : p_.mu;
        return {0.0, kind_ == PairKind::Harmonic || kind_ == PairKind::Min ? kNaN : mu};
    }
    if (std::isinf(x) || std::isinf(y)) {
        if (std::isinf(x) && std::isinf(y)) return {kInf, kNaN};
        return std::isinf(y) ? RateValue{x * x_only_, u_.mu} : RateValue{y * y_only_, p_.mu};
    }
    switch (kind_) {
    case PairKind::GaussianKnownVar: {
        const double v = rate_gaussian_known_var(x, y, p_.mu, u_.mu, p_.eta, u_.eta);
        // Crossing value minimizing the weighted quadratic KL terms.
        const double wp = x / p_.eta, wu = y / u_.eta;
        return {v, (wp * p_.mu + wu * u_.mu) / (wp + wu)};
    }
    case PairKind::GaussianUnknownVar: return rate_gaussian_unknown_var(x, y, p_, u_);
    case PairKind::WeibullCensored: {
        const auto& t = *table_;
        RateValue best{kInf, kNaN};
        for (std::size_t i = 0; i < t.mu.size(); ++i) {
            const double v = x * t.h1[i] + y * t.h2[i];
            if (v < best.value) best = {v, t.mu[i]};
        }
        return best;
    }
    case PairKind::Harmonic: return {scale_ * 2.0 * x * y / (x + y), kNaN};
    case PairKind::Min: return {scale_ * std::min(x, y), kNaN};
    }
    return {kNaN, kNaN};
}

double PairRate::operator()(double x, double y) const { return evaluate(x, y).value; }

RateGradient PairRate::gradient(double x, double y) const {
    if (!(x > 0.0) && !(y > 0.0)) return {0.0, 0.0, true};
    if (!(x > 0.0)) return {x_only_, 0.0, false};
    if (!(y > 0.0)) return {0.0, y_only_, false};
    switch (kind_) {
    case PairKind::GaussianKnownVar: {
        const double d2 = (p_.mu - u_.mu) * (p_.mu - u_.mu);
        const double den = p_.eta / x + u_.eta / y;
        return {d2 * p_.eta / (x * x * den * den), d2 * u_.eta / (y * y * den * den), false};
    }
    case PairKind::GaussianUnknownVar: {
        const double mu = evaluate(x, y).crossing_mu;
        return {half_log1p_sq(p_.mu - mu, p_.eta), half_log1p_sq(mu - u_.mu, u_.eta), false};
    }
    case PairKind::WeibullCensored: {
        const auto& t = *table_;
        std::size_t arg = 0;
        double best = kInf;
        for (std::size_t i = 0; i < t.mu.size(); ++i) {
            const double v = x * t.h1[i] + y * t.h2[i];
            if (v < best) {
                best = v;
                arg = i;
            }
        }
        return {t.h1[arg], t.h2[arg], false};
    }
    case PairKind::Harmonic: {
        const double s = (x + y) * (x + y);
        return {scale_ * 2.0 * y * y / s, scale_ * 2.0 * x * x / s, false};
    }
    case PairKind::Min:
        if (std::abs(x - y) <= 1e-9 * std::max(x, y)) return {kNaN, kNaN, true};
        return x < y ? RateGradient{scale_, 0.0, false} : RateGradient{0.0, scale_, false};
    }
    return {kNaN, kNaN, true};
}

double PairRate::invert_y(double x, double z) const {
    if (!(z > 0.0)) return 0.0;
    if (!(x > 0.0)) return kInf;
    switch (kind_) {
    case PairKind::GaussianKnownVar: {
        const double d2 = (p_.mu - u_.mu) * (p_.mu - u_.mu);
        const double room = d2 / z - p_.eta / x;
        return room > 0.0 ? u_.eta / room : kInf;
    }
    case PairKind::Harmonic: {
        const double den = 2.0 * scale_ * x - z;
        return den > 0.0 ? z * x / den : kInf;
    }
    case PairKind::Min: return scale_ * x >= z ? z / scale_ : kInf;
    default: break;
    }
    if (z >= x * x_only_) return kInf;
    double hi = 1.0;
    double fhi = (*this)(x, hi) - z;
    while (fhi < 0.0) {
        hi *= 2.0;
        if (hi > 1e300) return kInf;
        fhi = (*this)(x, hi) - z;
    }
    return bracketed_root([&](double y) { return (*this)(x, y) - z; }, 0.0, hi, -z, fhi);
}

double PairRate::invert_x(double y, double z) const {
    if (!(z > 0.0)) return 0.0;
    if (!(y > 0.0)) return kInf;
    switch (kind_) {
    case PairKind::GaussianKnownVar: {
        const double d2 = (p_.mu - u_.mu) * (p_.mu - u_.mu);
        const double room = d2 / z - u_.eta / y;
        return room > 0.0 ? p_.eta / room : kInf;
    }
    case PairKind::Harmonic: {
        const double den = 2.0 * scale_ * y - z;
        return den > 0.0 ? z * y / den : kInf;
    }
    case PairKind::Min: return scale_ * y >= z ? z / scale_ : kInf;
    default: break;
    }
    if (z >= y * y_only_) return kInf;
    double hi = 1.0;
    double fhi = (*this)(hi, y) - z;
    while (fhi < 0.0) {
        hi *= 2.0;
        if (hi > 1e300) return kInf;
        fhi = (*this)(hi, y) - z;
    }
    return bracketed_root([&](double x) { return (*this)(x, y) - z; }, 0.0, hi, -z, fhi);
}

nlohmann::json PairRate::to_json() const {
    using nlohmann::json;
    auto theta = [](const Theta& t) { return json{{"mu", t.mu}, {"eta", t.eta}}; };
    switch (kind_) {
    case PairKind::Harmonic: return {{"type", "harmonic"}, {"scale", scale_}};
    case PairKind::Min: return {{"type", "min"}, {"scale", scale_}};
    case PairKind::GaussianKnownVar:
        return {{"type", "gaussian-known-var"}, {"preferred", theta(p_)}, {"undesired", theta(u_)}};
    case PairKind::GaussianUnknownVar:
        return {{"type", "gaussian-unknown-var"}, {"preferred", theta(p_)}, {"undesired", theta(u_)}};
    case PairKind::WeibullCensored:
        return {{"type", "weibull-censored"},
                {"preferred", theta(p_)},
                {"undesired", theta(u_)},
                {"tau", std::isfinite(tau_) ? json(tau_) : json(nullptr)}};
    }
    return {};
}

PairRate PairRate::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("type")) throw ConfigError("rate spec needs a 'type'");
    const auto type = j.at("type").get<std::string>();
    auto theta = [&](const char* key) {
        const auto& t = j.at(key);
        return Theta{t.at("mu").get<double>(), t.at("eta").get<double>()};
    };
    if (type == "harmonic") return harmonic(j.value("scale", 1.0));
    if (type == "min") return minimum(j.value("scale", 1.0));
    if (type == "gaussian-known-var") return gaussian_known_var(theta("preferred"), theta("undesired"));
    if (type == "gaussian-unknown-var") return gaussian_unknown_var(theta("preferred"), theta("undesired"));
    if (type == "weibull-censored") {
        double tau = kInf;
        if (j.contains("tau") && !j.at("tau").is_null()) tau = j.at("tau").get<double>();
        return weibull(theta("preferred"), theta("undesired"), tau, ThetaBox{0.0, 200.0, 0.0, 20.0},
                       j.value("nodes", 257));
    }
    throw ConfigError("unknown rate type '" + type +
                      "' (expected harmonic | min | gaussian-known-var | gaussian-unknown-var | "
                      "weibull-censored)");
}

RateGradient gradient_fd(const PairRate& rate, double x, double y) {
    const double hx = 1e-6 * x, hy = 1e-6 * y;
    return {(rate(x + hx, y) - rate(x - hx, y)) / (2.0 * hx),
            (rate(x, y + hy) - rate(x, y - hy)) / (2.0 * hy), false};
}

} // namespace cttts
