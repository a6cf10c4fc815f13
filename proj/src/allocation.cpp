// SPDX-License-Identifier: Apache-2.0
#include "allocation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <boost/math/tools/toms748_solve.hpp>

#include "error.hpp"

namespace cttts {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGammaLo = 1e-3;
constexpr double kGammaHi = 1.0 - 1e-3;

double relative_spread(const std::vector<double>& v) {
    if (v.empty()) return kNaN;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (!(mean > 0.0)) return kNaN;
    return (*hi - *lo) / mean;
}

// Row minima over U for every p, then column minima over P for every u.
std::vector<double> row_col_minima(const ContextProblem& cp, std::span<const double> beta, double scale) {
    const std::size_t np = cp.preferred.size(), nu = cp.undesired.size();
    std::vector<double> rows(np, kInf), cols(nu, kInf);
    for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t j = 0; j < nu; ++j) {
            const double g = scale * cp.pair(i, j)(beta[cp.preferred[i]], beta[cp.undesired[j]]);
            rows[i] = std::min(rows[i], g);
            cols[j] = std::min(cols[j], g);
        }
    }
    rows.insert(rows.end(), cols.begin(), cols.end());
    return rows;
}

double context_objective(const ContextProblem& cp, std::span<const double> beta) {
    double v = kInf;
    for (std::size_t i = 0; i < cp.preferred.size(); ++i)
        for (std::size_t j = 0; j < cp.undesired.size(); ++j)
            v = std::min(v, cp.pair(i, j)(beta[cp.preferred[i]], beta[cp.undesired[j]]));
    return v;
}

void assemble(AllocationVector& out, const StaticProblem& problem) {
    const AlphaResult a = alpha_star(out.context_values);
    out.alpha = a.alpha;
    out.value = a.value;
    out.gamma.assign(problem.contexts.size(), 0.0);
    for (std::size_t c = 0; c < problem.contexts.size(); ++c)
        for (std::size_t p : problem.contexts[c].preferred) out.gamma[c] += out.beta[c][p];
}

} // namespace

// ---------------------------------------------------------------- problem construction

void ContextProblem::validate() const {
    const std::size_t n = design_ids.size();
    if (n < 2) throw ConfigError("context '" + id + "' needs at least two designs");
    if (preferred.empty()) throw ConfigError("context '" + id + "' has an empty preferred set");
    if (undesired.empty()) throw ConfigError("context '" + id + "' has an empty undesired set");
    std::vector<int> seen(n, 0);
    for (std::size_t p : preferred) {
        if (p >= n) throw ConfigError("context '" + id + "': preferred index out of range");
        ++seen[p];
    }
    for (std::size_t u : undesired) {
        if (u >= n) throw ConfigError("context '" + id + "': undesired index out of range");
        ++seen[u];
    }
    if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; }))
        throw ConfigError("context '" + id + "': preferred and undesired sets must partition the designs");
    if (pairs.size() != preferred.size() * undesired.size())
        throw ConfigError("context '" + id + "': one rate per (preferred, undesired) pair required");
}

bool StaticProblem::all_best() const noexcept {
    return std::all_of(contexts.begin(), contexts.end(),
                       [](const ContextProblem& c) { return c.preferred.size() == 1; });
}

StaticProblem static_problem(const ProblemInstance& instance, std::span<const Theta> thetas,
                             RateFamily family, int weibull_nodes) {
    if (thetas.size() != instance.num_designs()) throw ConfigError("one parameter per design required");
    std::vector<double> mus(thetas.size());
    for (std::size_t d = 0; d < thetas.size(); ++d) mus[d] = thetas[d].mu;
    StaticProblem out;
    for (const auto& ctx : instance.contexts()) {
        ContextProblem cp;
        cp.id = ctx.id;
        for (std::size_t j = 0; j < ctx.size; ++j) cp.design_ids.push_back(instance.design(ctx.first + j).id);
        const auto top = select_top(mus, ctx);
        std::vector<char> is_top(ctx.size, 0);
        for (std::size_t d : top) is_top[d - ctx.first] = 1;
        for (std::size_t j = 0; j < ctx.size; ++j) (is_top[j] ? cp.preferred : cp.undesired).push_back(j);
        for (std::size_t p : cp.preferred) {
            for (std::size_t u : cp.undesired) {
                const Theta& tp = thetas[ctx.first + p];
                const Theta& tu = thetas[ctx.first + u];
                switch (family) {
                case RateFamily::GaussianKnownVar: cp.pairs.push_back(PairRate::gaussian_known_var(tp, tu)); break;
                case RateFamily::GaussianUnknownVar:
                    cp.pairs.push_back(PairRate::gaussian_unknown_var(tp, tu));
                    break;
                case RateFamily::WeibullCensored:
                    cp.pairs.push_back(PairRate::weibull(tp, tu, instance.tau(), instance.box(), weibull_nodes));
                    break;
                }
            }
        }
        out.contexts.push_back(std::move(cp));
    }
    return out;
}

StaticProblem static_problem(const ProblemInstance& instance, RateFamily family) {
    std::vector<Theta> thetas;
    for (const auto& d : instance.designs()) thetas.push_back(d.theta);
    return static_problem(instance, thetas, family);
}

StaticProblem static_problem_from_json(const nlohmann::json& j) {
    static const std::unordered_set<std::string> top_keys = {"kind", "contexts", "gamma"};
    static const std::unordered_set<std::string> ctx_keys = {"id", "designs", "preferred", "pairs"};
    static const std::unordered_set<std::string> pair_keys = {"p", "u", "rate"};
    auto check_keys = [](const nlohmann::json& obj, const std::unordered_set<std::string>& allowed,
                         const std::string& where) {
        if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
        for (const auto& [key, _] : obj.items())
            if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    };
    check_keys(j, top_keys, "rate problem");
    if (j.value("kind", std::string("rate-problem")) != "rate-problem")
        throw ConfigError("rate problem documents need kind = rate-problem");
    try {
        StaticProblem out;
        std::size_t index = 0;
        for (const auto& jc : j.at("contexts")) {
            check_keys(jc, ctx_keys, "rate problem context");
            ContextProblem cp;
            cp.id = jc.value("id", "c" + std::to_string(index++));
            cp.design_ids = jc.at("designs").get<std::vector<std::string>>();
            auto local = [&](const std::string& name) {
                auto it = std::find(cp.design_ids.begin(), cp.design_ids.end(), name);
                if (it == cp.design_ids.end())
                    throw ConfigError("context '" + cp.id + "' has no design '" + name + "'");
                return static_cast<std::size_t>(it - cp.design_ids.begin());
            };
            std::vector<char> pref(cp.design_ids.size(), 0);
            for (const auto& p : jc.at("preferred").get<std::vector<std::string>>()) pref[local(p)] = 1;
            for (std::size_t d = 0; d < cp.design_ids.size(); ++d)
                (pref[d] ? cp.preferred : cp.undesired).push_back(d);
            std::vector<std::optional<PairRate>> grid(cp.preferred.size() * cp.undesired.size());
            for (const auto& jp : jc.at("pairs")) {
                check_keys(jp, pair_keys, "rate problem pair");
                const std::size_t p = local(jp.at("p").get<std::string>());
                const std::size_t u = local(jp.at("u").get<std::string>());
                const auto pi = std::find(cp.preferred.begin(), cp.preferred.end(), p);
                const auto ui = std::find(cp.undesired.begin(), cp.undesired.end(), u);
                if (pi == cp.preferred.end() || ui == cp.undesired.end())
                    throw ConfigError("pair (" + cp.design_ids[p] + ", " + cp.design_ids[u] +
                                      ") must join a preferred and an undesired design");
                auto& slot = grid[static_cast<std::size_t>(pi - cp.preferred.begin()) * cp.undesired.size() +
                                  static_cast<std::size_t>(ui - cp.undesired.begin())];
                if (slot) throw ConfigError("duplicate pair in context '" + cp.id + "'");
                slot = PairRate::from_json(jp.at("rate"));
            }
            for (auto& g : grid) {
                if (!g) throw ConfigError("context '" + cp.id + "' is missing a pair rate");
                cp.pairs.push_back(*g);
            }
            cp.validate();
            out.contexts.push_back(std::move(cp));
        }
        if (out.contexts.empty()) throw ConfigError("rate problem has no contexts");
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed rate problem: ") + e.what());
    }
}

nlohmann::json to_json(const AllocationVector& a, const StaticProblem& problem) {
    using nlohmann::json;
    json contexts = json::array();
    for (std::size_t c = 0; c < problem.contexts.size(); ++c) {
        const auto& cp = problem.contexts[c];
        json beta = json::object();
        for (std::size_t d = 0; d < cp.size(); ++d) beta[cp.design_ids[d]] = a.beta[c][d];
        json pref = json::array();
        for (std::size_t p : cp.preferred) pref.push_back(cp.design_ids[p]);
        contexts.push_back({{"id", cp.id},
                            {"alpha", a.alpha[c]},
                            {"gamma", a.gamma[c]},
                            {"value", a.context_values[c]},
                            {"preferred", pref},
                            {"beta", beta}});
    }
    return {{"value", a.value}, {"contexts", contexts}, {"degraded", a.degraded}, {"warnings", a.warnings}};
}

// ---------------------------------------------------------------- m = 1 solvers

BalanceResult solve_balance_best(double gamma, std::span<const PairRate> rates) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (rates.empty()) throw ConfigError("balance problem needs at least one undesired design");
    const double mass = 1.0 - gamma;
    BalanceResult out;
    if (rates.size() == 1) {
        out.beta = {mass};
        out.value = rates[0](gamma, mass);
        return out;
    }
    double z_hi = kInf;
    for (const auto& r : rates) z_hi = std::min(z_hi, r(gamma, mass));
    if (!(z_hi > 0.0) || !std::isfinite(z_hi))
        throw RuntimeError("balance problem does not bracket a positive common rate");

    auto total = [&](double z) {
        double s = 0.0;
        for (const auto& r : rates) s += r.invert_y(gamma, z);
        return s;
    };
    double z = z_hi;
    const double s_hi = total(z_hi);
    if (s_hi > mass) {
        auto f = [&](double zz) { return total(zz) - mass; };
        boost::uintmax_t iters = 300;
        const auto r = boost::math::tools::toms748_solve(f, 0.0, z_hi, -mass, s_hi - mass,
                                                          boost::math::tools::eps_tolerance<double>(52), iters);
        z = f(r.second) <= 0.0 ? r.second : r.first;
    }
    out.beta.resize(rates.size());
    double used = 0.0;
    for (std::size_t j = 0; j < rates.size(); ++j) used += (out.beta[j] = rates[j].invert_y(gamma, z));
    out.beta.back() += std::max(0.0, mass - used);
    out.value = kInf;
    for (std::size_t j = 0; j < rates.size(); ++j) out.value = std::min(out.value, rates[j](gamma, out.beta[j]));
    return out;
}

AlphaResult alpha_star(std::span<const double> values) {
    if (values.empty()) throw ConfigError("alpha_star needs at least one context");
    double inv_sum = 0.0;
    for (double v : values) {
        if (!(v > 0.0)) throw ConfigError("alpha_star needs strictly positive context rates");
        inv_sum += 1.0 / v;
    }
    AlphaResult out;
    for (double v : values) out.alpha.push_back((1.0 / v) / inv_sum);
    out.value = 1.0 / inv_sum;
    return out;
}

namespace {

std::vector<double> beta_from_balance(const ContextProblem& cp, double gamma, const BalanceResult& b) {
    std::vector<double> beta(cp.size(), 0.0);
    beta[cp.preferred[0]] = gamma;
    for (std::size_t j = 0; j < cp.undesired.size(); ++j) beta[cp.undesired[j]] = b.beta[j];
    return beta;
}

void require_best(const StaticProblem& problem) {
    for (const auto& cp : problem.contexts) {
        cp.validate();
        if (cp.preferred.size() != 1)
            throw ConfigError("context '" + cp.id + "' has |P| > 1; use the top-m solver");
    }
}

// Σ ∂1G/∂2G - 1 at the balanced allocation for gamma.
double eq9_gap(const ContextProblem& cp, double gamma, const BalanceResult& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < cp.undesired.size(); ++j) {
        const auto g = cp.best_row()[j].gradient(gamma, b.beta[j]);
        if (g.kink || !(g.dy > 0.0)) return kNaN;
        s += g.dx / g.dy;
    }
    return s - 1.0;
}

} // namespace

AllocationVector solve_fixed_gamma(const StaticProblem& problem, std::span<const double> gamma) {
    require_best(problem);
    if (gamma.size() != problem.contexts.size()) throw ConfigError("one gamma per context required");
    AllocationVector out;
    for (std::size_t c = 0; c < problem.contexts.size(); ++c) {
        const auto& cp = problem.contexts[c];
        const auto b = solve_balance_best(gamma[c], cp.best_row());
        out.beta.push_back(beta_from_balance(cp, gamma[c], b));
        out.context_values.push_back(b.value);
    }
    assemble(out, problem);
    return out;
}

AllocationVector optimize_gamma(const StaticProblem& problem) {
    require_best(problem);
    AllocationVector out;
    for (const auto& cp : problem.contexts) {
        const auto row = cp.best_row();
        auto neg_value = [&](double g) { return -solve_balance_best(g, row).value; };

        // Coarse grid followed by golden section.
        constexpr int kGrid = 50;
        double best_g = kGammaLo, best_v = kInf;
        int best_i = 0;
        std::vector<double> xs(kGrid);
        for (int i = 0; i < kGrid; ++i) {
            xs[static_cast<std::size_t>(i)] = kGammaLo + (kGammaHi - kGammaLo) * i / (kGrid - 1);
            const double v = neg_value(xs[static_cast<std::size_t>(i)]);
            if (v < best_v) {
                best_v = v;
                best_g = xs[static_cast<std::size_t>(i)];
                best_i = i;
            }
        }
        double lo = xs[static_cast<std::size_t>(std::max(best_i - 1, 0))];
        double hi = xs[static_cast<std::size_t>(std::min(best_i + 1, kGrid - 1))];
        constexpr double kInvPhi = 0.6180339887498949;
        double a = hi - kInvPhi * (hi - lo), b = lo + kInvPhi * (hi - lo);
        double fa = neg_value(a), fb = neg_value(b);
        for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
            if (fa <= fb) {
                hi = b; b = a; fb = fa;
                a = hi - kInvPhi * (hi - lo);
                fa = neg_value(a);
            } else {
                lo = a; a = b; fa = fb;
                b = lo + kInvPhi * (hi - lo);
                fb = neg_value(b);
            }
        }
        if (fa < best_v) { best_v = fa; best_g = a; }
        if (fb < best_v) { best_v = fb; best_g = b; }

        // Polish with the stationarity condition when every rate is smooth.
        const bool smooth = std::all_of(row.begin(), row.end(), [](const PairRate& r) { return r.smooth(); });
        if (smooth) {
            auto gap = [&](double g) { return eq9_gap(cp, g, solve_balance_best(g, row)); };
            double glo = std::max(kGammaLo, best_g - 1e-6), ghi = std::min(kGammaHi, best_g + 1e-6);
            double flo = gap(glo), fhi = gap(ghi);
            for (int k = 0; k < 40 && flo > 0.0 && fhi > 0.0 && ghi < kGammaHi; ++k) {
                ghi = std::min(kGammaHi, best_g + (ghi - best_g) * 4.0);
                fhi = gap(ghi);
            }
            for (int k = 0; k < 40 && flo < 0.0 && fhi < 0.0 && glo > kGammaLo; ++k) {
                glo = std::max(kGammaLo, best_g - (best_g - glo) * 4.0);
                flo = gap(glo);
            }
            if (std::isfinite(flo) && std::isfinite(fhi) && flo > 0.0 && fhi < 0.0) {
                boost::uintmax_t iters = 200;
                const auto r = boost::math::tools::toms748_solve(
                    gap, glo, ghi, flo, fhi, boost::math::tools::eps_tolerance<double>(50), iters);
                const double g = 0.5 * (r.first + r.second);
                const double v = neg_value(g);
                if (v <= best_v + 1e-14 * std::abs(best_v)) {
                    best_v = v;
                    best_g = g;
                }
            }
        }
        const auto bal = solve_balance_best(best_g, row);
        out.beta.push_back(beta_from_balance(cp, best_g, bal));
        out.context_values.push_back(bal.value);
    }
    assemble(out, problem);
    return out;
}

// ---------------------------------------------------------------- top-m solver

namespace {

// Homogeneous reformulation min Σψ s.t. every pair rate >= 1, written over the
// smaller side's variables v; the other side is set to its cheapest feasible value.
class Reformulation {
public:
    explicit Reformulation(const ContextProblem& cp) : cp_(cp) {
        on_p_ = cp.preferred.size() <= cp.undesired.size();
        n_ = on_p_ ? cp.preferred.size() : cp.undesired.size();
        m_ = on_p_ ? cp.undesired.size() : cp.preferred.size();
        dom_.assign(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t o = 0; o < m_; ++o) {
                const double lim = on_p_ ? pair(i, o).rate_x_only() : pair(i, o).rate_y_only();
                dom_[i] = std::max(dom_[i], 1.0 / lim);
            }
    }

    std::size_t dim() const noexcept { return n_; }
    double domain(std::size_t i) const { return dom_[i]; }

    const PairRate& pair(std::size_t i, std::size_t o) const {
        return on_p_ ? cp_.pair(i, o) : cp_.pair(o, i);
    }
    double other(std::size_t i, std::size_t o, double v) const {
        return on_p_ ? pair(i, o).invert_y(v, 1.0) : pair(i, o).invert_x(v, 1.0);
    }
    double other_slope(std::size_t i, std::size_t o, double v, double w) const {
        const auto g = on_p_ ? pair(i, o).gradient(v, w) : pair(i, o).gradient(w, v);
        if (g.kink) return 0.0;
        return on_p_ ? -g.dx / g.dy : -g.dy / g.dx;
    }

    // Objective and a subgradient; +inf outside the domain.
    double eval(std::span<const double> v, std::vector<double>* grad) const {
        double f = 0.0;
        for (std::size_t i = 0; i < n_; ++i) f += v[i];
        if (grad) grad->assign(n_, 1.0);
        for (std::size_t o = 0; o < m_; ++o) {
            double w = -kInf;
            std::size_t arg = 0;
            for (std::size_t i = 0; i < n_; ++i) {
                const double h = other(i, o, v[i]);
                if (h > w) {
                    w = h;
                    arg = i;
                }
            }
            if (!std::isfinite(w)) return kInf;
            f += w;
            if (grad) {
                const double s = other_slope(arg, o, v[arg], w);
                if (std::isfinite(s)) (*grad)[arg] += s;
            }
        }
        return f;
    }

    std::vector<double> full(std::span<const double> v) const {
        std::vector<double> psi(cp_.size(), 0.0);
        const auto& side = on_p_ ? cp_.preferred : cp_.undesired;
        const auto& rest = on_p_ ? cp_.undesired : cp_.preferred;
        for (std::size_t i = 0; i < n_; ++i) psi[side[i]] = v[i];
        for (std::size_t o = 0; o < m_; ++o) {
            double w = 0.0;
            for (std::size_t i = 0; i < n_; ++i) w = std::max(w, other(i, o, v[i]));
            psi[rest[o]] = w;
        }
        return psi;
    }

private:
    const ContextProblem& cp_;
    bool on_p_ = true;
    std::size_t n_ = 0, m_ = 0;
    std::vector<double> dom_;
};

std::vector<double> minimize_1d_convex(const Reformulation& r) {
    const double dom = r.domain(0);
    auto slope = [&](double v) {
        std::vector<double> g;
        const double vv[1] = {v};
        const double f = r.eval(vv, &g);
        return std::isfinite(f) ? g[0] : -kInf;
    };
    double lo = dom, hi = dom > 0.0 ? 2.0 * dom : 1.0;
    for (int k = 0; k < 2000 && !(slope(hi) >= 0.0); ++k) hi *= 2.0;
    for (int k = 0; k < 400 && hi - lo > 1e-15 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (slope(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return {hi};
}

std::vector<double> minimize_ellipsoid(const Reformulation& r) {
    const std::size_t n = r.dim();
    std::vector<double> v0(n);
    for (std::size_t i = 0; i < n; ++i) v0[i] = r.domain(i) > 0.0 ? 2.0 * r.domain(i) : 1.0;
    double f0 = r.eval(v0, nullptr);
    for (int k = 0; k < 200 && !std::isfinite(f0); ++k) {
        for (double& x : v0) x *= 2.0;
        f0 = r.eval(v0, nullptr);
    }
    if (!std::isfinite(f0)) throw RuntimeError("top-m refinement found no feasible start");

    std::vector<double> best = v0;
    double best_f = f0;
    std::vector<double> c(n, 0.5 * f0);
    std::vector<double> P(n * n, 0.0);
    const double radius = 0.5 * f0 * std::sqrt(static_cast<double>(n)) * 1.01;
    for (std::size_t i = 0; i < n; ++i) P[i * n + i] = radius * radius;
    const double nn = static_cast<double>(n);
    std::vector<double> g(n), Pg(n);
    const int max_iter = static_cast<int>(400 * n * (n + 1)) + 2000;
    for (int it = 0; it < max_iter; ++it) {
        std::size_t bad = n;
        for (std::size_t i = 0; i < n; ++i)
            if (!(c[i] > r.domain(i))) {
                bad = i;
                break;
            }
        double f = kInf;
        if (bad == n) f = r.eval(c, &g);
        if (bad < n || !std::isfinite(f)) {
            if (bad == n) bad = static_cast<std::size_t>(std::min_element(c.begin(), c.end()) - c.begin());
            std::fill(g.begin(), g.end(), 0.0);
            g[bad] = -1.0;
        } else if (f < best_f) {
            best_f = f;
            best = c;
        }
        for (std::size_t i = 0; i < n; ++i) {
            Pg[i] = 0.0;
            for (std::size_t k = 0; k < n; ++k) Pg[i] += P[i * n + k] * g[k];
        }
        double gPg = 0.0;
        for (std::size_t i = 0; i < n; ++i) gPg += g[i] * Pg[i];
        if (!(gPg > 0.0)) break;
        const double s = std::sqrt(gPg);
        if (std::isfinite(f) && s < 1e-14 * std::abs(best_f)) break;
        for (std::size_t i = 0; i < n; ++i) c[i] -= Pg[i] / (s * (nn + 1.0));
        const double scale = nn * nn / (nn * nn - 1.0);
        const double w = 2.0 / ((nn + 1.0) * gPg);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) P[i * n + k] = scale * (P[i * n + k] - w * Pg[i] * Pg[k]);
    }
    return best;
}

} // namespace

AllocationVector solve_topm_allocation(const StaticProblem& problem, const TopmOptions& options,
                                       TopmTrace* trace) {
    AllocationVector out;
    if (trace) trace->averaged_objective.clear();
    std::vector<std::string> degraded_contexts;
    for (const auto& cp : problem.contexts) {
        cp.validate();
        const std::size_t n = cp.size();
        std::vector<double> beta(n, 1.0 / static_cast<double>(n)), avg(n, 0.0), grad(n);
        std::vector<std::pair<int, double>> checkpoints;
        int next_checkpoint = 1;
        for (int t = 1; t <= options.iterations; ++t) {
            // Supergradient of the active minimum pair.
            double best = kInf;
            std::size_t bi = 0, bj = 0;
            for (std::size_t i = 0; i < cp.preferred.size(); ++i)
                for (std::size_t j = 0; j < cp.undesired.size(); ++j) {
                    const double v = cp.pair(i, j)(beta[cp.preferred[i]], beta[cp.undesired[j]]);
                    if (v < best) {
                        best = v;
                        bi = i;
                        bj = j;
                    }
                }
            auto g = cp.pair(bi, bj).gradient(beta[cp.preferred[bi]], beta[cp.undesired[bj]]);
            if (g.kink) g = {0.5 * cp.pair(bi, bj).rate_x_only(), 0.5 * cp.pair(bi, bj).rate_y_only(), false};
            std::fill(grad.begin(), grad.end(), 0.0);
            grad[cp.preferred[bi]] = g.dx;
            grad[cp.undesired[bj]] = g.dy;
            const double gmax = std::max(std::abs(g.dx), std::abs(g.dy));
            if (gmax > 0.0 && std::isfinite(gmax)) {
                const double eta = options.step / std::sqrt(static_cast<double>(t));
                double sum = 0.0;
                for (std::size_t d = 0; d < n; ++d) sum += (beta[d] *= std::exp(eta * grad[d] / gmax));
                for (double& b : beta) b /= sum;
            }
            for (std::size_t d = 0; d < n; ++d) avg[d] += (beta[d] - avg[d]) / static_cast<double>(t);
            if (t == next_checkpoint || t == options.iterations) {
                checkpoints.emplace_back(t, context_objective(cp, avg));
                if (t == next_checkpoint) next_checkpoint *= 2;
            }
        }
        std::vector<double> chosen = options.iterations > 0 ? avg : beta;
        double value = context_objective(cp, chosen);

        const std::size_t side = std::min(cp.preferred.size(), cp.undesired.size());
        if (options.refine && side <= options.refine_cap) {
            try {
                Reformulation r(cp);
                const auto v = r.dim() == 1 ? minimize_1d_convex(r) : minimize_ellipsoid(r);
                auto psi = r.full(v);
                const double total = std::accumulate(psi.begin(), psi.end(), 0.0);
                if (std::isfinite(total) && total > 0.0) {
                    for (double& p : psi) p /= total;
                    const double rv = context_objective(cp, psi);
                    if (rv >= value) {
                        value = rv;
                        chosen = psi;
                    }
                }
            } catch (const RuntimeError& e) {
                out.warnings.push_back("context '" + cp.id + "': refinement skipped (" + e.what() + ")");
            }
        }
        const double residual = relative_spread(row_col_minima(cp, chosen, 1.0));
        if (!(residual <= options.residual_threshold)) degraded_contexts.push_back(cp.id);
        out.beta.push_back(std::move(chosen));
        out.context_values.push_back(value);
        if (trace) trace->averaged_objective.push_back(std::move(checkpoints));
    }
    assemble(out, problem);
    if (!degraded_contexts.empty()) {
        out.degraded = true;
        std::string list;
        for (const auto& id : degraded_contexts) list += (list.empty() ? "" : ", ") + id;
        out.warnings.push_back("balance residual above threshold in context(s): " + list);
    }
    return out;
}

// ---------------------------------------------------------------- checkers

KktReport kkt_residual_best(const AllocationVector& a, const StaticProblem& problem) {
    require_best(problem);
    KktReport rep;
    std::vector<double> scaled;
    for (std::size_t c = 0; c < problem.contexts.size(); ++c) {
        const auto& cp = problem.contexts[c];
        const double x = a.beta[c][cp.preferred[0]];
        double s = 0.0;
        bool any = false;
        for (std::size_t j = 0; j < cp.undesired.size(); ++j) {
            const double y = a.beta[c][cp.undesired[j]];
            if (!(x > 0.0) || !(y > 0.0)) throw ConfigError("KKT check needs a strictly positive allocation");
            const auto& rate = cp.best_row()[j];
            scaled.push_back(a.alpha[c] * rate(x, y));
            const auto g = rate.gradient(x, y);
            if (g.kink || !(g.dy > 0.0) || !std::isfinite(g.dx / g.dy)) {
                rep.kinks.push_back(cp.id + "/" + cp.design_ids[cp.undesired[j]]);
                continue;
            }
            s += g.dx / g.dy;
            any = true;
        }
        rep.eq9.push_back(any ? std::abs(s - 1.0) : kNaN);
    }
    rep.eq9_max = 0.0;
    for (double v : rep.eq9)
        if (std::isfinite(v)) rep.eq9_max = std::max(rep.eq9_max, v);
    rep.eq10_spread = relative_spread(scaled);
    return rep;
}

double balance_residual_topm(const AllocationVector& a, const StaticProblem& problem) {
    std::vector<double> all;
    for (std::size_t c = 0; c < problem.contexts.size(); ++c) {
        const auto& cp = problem.contexts[c];
        for (double b : a.beta[c])
            if (!(b > 0.0)) throw ConfigError("balance residual needs a strictly positive allocation");
        const auto v = row_col_minima(cp, a.beta[c], a.alpha[c]);
        all.insert(all.end(), v.begin(), v.end());
    }
    return relative_spread(all);
}

Prop6Report prop6_check(const AllocationVector& a, const StaticProblem& problem,
                        const std::vector<std::vector<int>>& vartheta) {
    if (vartheta.size() != problem.contexts.size()) throw ConfigError("one vartheta pattern per context required");
    Prop6Report rep;
    rep.classes_balanced = true;
    rep.pattern_consistent = true;
    for (std::size_t c = 0; c < problem.contexts.size(); ++c) {
        const auto& cp = problem.contexts[c];
        const std::size_t np = cp.preferred.size(), nu = cp.undesired.size();
        if (vartheta[c].size() != np * nu) throw ConfigError("vartheta pattern has the wrong size");
        for (const auto& pr : cp.pairs)
            if (pr.kind() != PairKind::GaussianKnownVar)
                throw ConfigError("equivalence-class check applies to gaussian-known-var rates only");

        // Binding value and pattern consistency.
        std::vector<double> g(np * nu);
        double z = kInf;
        for (std::size_t i = 0; i < np; ++i)
            for (std::size_t j = 0; j < nu; ++j) {
                g[i * nu + j] = a.alpha[c] * cp.pair(i, j)(a.beta[c][cp.preferred[i]], a.beta[c][cp.undesired[j]]);
                z = std::min(z, g[i * nu + j]);
            }
        std::vector<char> p_hit(np, 0), u_hit(nu, 0);
        for (std::size_t i = 0; i < np; ++i)
            for (std::size_t j = 0; j < nu; ++j) {
                const bool binding = std::abs(g[i * nu + j] - z) <= 1e-6 * z;
                const bool claimed = vartheta[c][i * nu + j] != 0;
                if (binding != claimed) rep.pattern_consistent = false;
                if (claimed) p_hit[i] = u_hit[j] = 1;
            }
        if (std::count(p_hit.begin(), p_hit.end(), 0) || std::count(u_hit.begin(), u_hit.end(), 0))
            rep.pattern_consistent = false;

        // Union-find over P ∪ U (P first) along claimed binding pairs.
        std::vector<std::size_t> parent(np + nu);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (std::size_t i = 0; i < np; ++i)
            for (std::size_t j = 0; j < nu; ++j)
                if (vartheta[c][i * nu + j]) parent[find(i)] = find(np + j);
        std::unordered_map<std::size_t, std::pair<double, double>> sums;
        for (std::size_t i = 0; i < np; ++i) {
            const double s = a.beta[c][cp.preferred[i]] / std::sqrt(cp.pair(i, 0).preferred().eta);
            sums[find(i)].first += s * s;
        }
        for (std::size_t j = 0; j < nu; ++j) {
            const double s = a.beta[c][cp.undesired[j]] / std::sqrt(cp.pair(0, j).undesired().eta);
            sums[find(np + j)].second += s * s;
        }
        std::vector<std::size_t> roots;
        for (const auto& [root, _] : sums) roots.push_back(root);
        std::sort(roots.begin(), roots.end());
        for (std::size_t root : roots) {
            const auto [sp, su] = sums[root];
            const double res = std::abs(sp - su) / std::max(sp, su);
            rep.class_residuals.push_back(res);
            if (!(res <= 1e-6)) rep.classes_balanced = false;
        }
    }
    rep.passed = rep.classes_balanced && rep.pattern_consistent;
    if (!rep.pattern_consistent)
        rep.message = "binding pattern differs from the claimed vartheta";
    else if (!rep.classes_balanced)
        rep.message = "equivalence-class balance violated";
    else
        rep.message = "ok";
    return rep;
}

EmpiricalRates empirical_rates(const StaticProblem& truth, std::span<const std::size_t> counts,
                               std::span<const std::size_t> context_first, std::span<const double> gamma) {
    if (context_first.size() != truth.contexts.size()) throw ConfigError("context offsets do not match the problem");
    const bool best = truth.all_best();
    if (best) {
        if (gamma.size() != truth.contexts.size()) throw ConfigError("one gamma per context required");
        for (double g : gamma)
            if (!(g > 0.0 && g < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    }
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    EmpiricalRates out;
    for (std::size_t c = 0; c < truth.contexts.size(); ++c) {
        const auto& cp = truth.contexts[c];
        std::size_t n_c = 0;
        for (std::size_t d = 0; d < cp.size(); ++d) n_c += counts[context_first[c] + d];
        if (n_c == 0) {
            out.values.emplace_back(std::nullopt);
            out.spread.push_back(kNaN);
            continue;
        }
        const double alpha = static_cast<double>(n_c) / total;
        std::vector<double> beta(cp.size());
        for (std::size_t d = 0; d < cp.size(); ++d)
            beta[d] = static_cast<double>(counts[context_first[c] + d]) / static_cast<double>(n_c);
        std::vector<double> vals;
        if (cp.preferred.size() == 1 && best) {
            for (std::size_t j = 0; j < cp.undesired.size(); ++j)
                vals.push_back(alpha * cp.best_row()[j](gamma[c], beta[cp.undesired[j]]));
        } else {
            vals = row_col_minima(cp, beta, alpha);
        }
        out.spread.push_back(relative_spread(vals));
        out.values.emplace_back(std::move(vals));
    }
    return out;
}

std::vector<EmpiricalRates> empirical_rate_trajectory(const StaticProblem& truth,
                                                      const std::vector<std::vector<std::size_t>>& snapshots,
                                                      std::span<const std::size_t> context_first,
                                                      std::span<const double> gamma) {
    std::vector<EmpiricalRates> out;
    out.reserve(snapshots.size());
    for (const auto& s : snapshots) out.push_back(empirical_rates(truth, s, context_first, gamma));
    return out;
}

} // namespace cttts
