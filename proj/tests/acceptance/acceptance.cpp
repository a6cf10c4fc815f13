// Acceptance suite: prints one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "allocation.hpp"
#include "cttts/cttts.h"
#include "harness.hpp"
#include "policies.hpp"
#include "posterior.hpp"
#include "rates.hpp"

using namespace cttts;

namespace {

const double kInf = std::numeric_limits<double>::infinity();
const std::string kData = CTTTS_TEST_DATA;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::size_t categorical(const std::vector<double>& p, Rng& rng) {
    double u = rng.uniform(), acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if ((acc += p[i]) > u) return i;
    return p.size() - 1;
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    for (auto& x : p) x = -std::log(rng.uniform_open());
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& x : p) x /= s;
    return p;
}

// ---------------------------------------------------------------- 1, 2

Outcome criterion1() {
    Rng rng(101);
    const std::vector<double> gamma{0.5, 0.5};
    const int K = 1000000;
    double worst = 0.0;
    int failures = 0;
    TopSets first, second;
    std::vector<std::size_t> dis;
    for (int cfg = 0; cfg < 20; ++cfg) {
        const std::vector<std::vector<double>> pi{random_simplex(rng, 3), random_simplex(rng, 3)};
        const auto a = analytic_policy_prob(pi, gamma);
        auto draw = [&](Rng& r, TopSets& t) {
            t.assign(2, {});
            for (std::size_t c = 0; c < 2; ++c) t[c] = {c * 3 + categorical(pi[c], r)};
        };
        auto on_cap = [](Rng&, const TopSets&) -> StepDecision { throw RuntimeError("cap"); };
        std::vector<int> hits(6, 0);
        for (int i = 0; i < K; ++i)
            ++hits[top_two_step(gamma, draw, on_cap, rng, TopTwoOptions{1000000, false}, first, second, dis).design];
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t d = 0; d < 3; ++d) {
                const double p = a.psi[c][d], se = std::sqrt(p * (1 - p) / K);
                const double z = std::abs(hits[c * 3 + d] / double(K) - p) / se;
                worst = std::max(worst, z);
                failures += z > 4.0;
            }
    }
    return {failures == 0, fmt("20 configs x 10^6 steps, max |z| = %.2f, cells beyond 4 SE: %d", worst, failures)};
}

Outcome criterion2() {
    Rng rng(202);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const double p1 = rng.uniform(), g = rng.uniform();
        const std::vector<double> gamma{g};
        const auto a = analytic_policy_prob({{p1, 1 - p1}}, gamma);
        worst = std::max(worst, std::abs(a.psi[0][0] - (g * p1 + (1 - g) * (1 - p1))));
        worst = std::max(worst, std::abs(a.psi[0][1] - (g * (1 - p1) + (1 - g) * p1)));
    }
    return {worst <= 1e-12, fmt("100 random (pi, gamma), max error %.2e (tol 1e-12)", worst)};
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
    std::ifstream f(kData + "/counterexample.json");
    std::stringstream ss;
    ss << f.rdbuf();
    cttts_string* out = nullptr;
    if (cttts_solve_allocation(ss.str().c_str(), "{\"gamma_mode\": \"fixed\", \"gamma\": 0.1}", kData.c_str(), &out) !=
        CTTTS_OK)
        return {false, std::string("solve failed: ") + cttts_last_error()};
    const auto j = nlohmann::json::parse(std::string(cttts_string_data(out), cttts_string_size(out)));
    cttts_string_free(out);
    const double value = j.at("value").get<double>();
    const auto& b = j.at("contexts")[0].at("beta");
    const double b1 = b.at("d1").get<double>(), b2 = b.at("d2").get<double>(), b3 = b.at("d3").get<double>();
    // Independent evaluation of the two rate functions at the returned beta.
    const double g2 = 2.0 / (1.0 / b1 + 1.0 / b2), g3 = std::min(b1, b3);
    const bool ok = std::abs(value - 0.1) <= 1e-6 && std::min(g2, g3) >= 0.1 - 1e-6;
    return {ok, fmt("Gamma = %.9f, beta = (%.6f, %.6f, %.6f), min G = %.9f", value, b1, b2, b3, std::min(g2, g3))};
}

// ---------------------------------------------------------------- 4, 5

Outcome criterion4() {
    Rng rng(404);
    double eq9 = 0.0, eq10 = 0.0;
    for (int t = 0; t < 10; ++t) {
        std::vector<std::vector<Theta>> ds(3);
        for (auto& c : ds)
            for (int d = 0; d < 5; ++d) c.push_back({rng.normal(0, 3), 0.5 + 4.5 * rng.uniform()});
        ProblemInstance inst(Family::Gaussian, {"a", "b", "c"}, ds, {1, 1, 1}, kInf, ThetaBox{});
        const auto p = static_problem(inst, RateFamily::GaussianKnownVar);
        const auto k = kkt_residual_best(optimize_gamma(p), p);
        eq9 = std::max(eq9, k.eq9_max);
        eq10 = std::max(eq10, k.eq10_spread);
    }
    return {eq9 <= 1e-4 && eq10 <= 1e-4,
            fmt("10 instances 3x5: max stationarity residual %.2e, max context spread %.2e (tol 1e-4)", eq9, eq10)};
}

Outcome criterion5() {
    Rng rng(505);
    const int trials = 10000;
    int bad_closed = 0, bad_generic = 0;
    for (int t = 0; t < trials; ++t) {
        const Theta p{rng.normal(0, 2), 0.2 + 4 * rng.uniform()};
        const Theta u{p.mu - 0.05 - 3 * rng.uniform(), 0.2 + 4 * rng.uniform()};
        double x = rng.uniform(), y = rng.uniform(), x2 = rng.uniform(), y2 = rng.uniform();
        const double h = 0.1 + 9.9 * rng.uniform();
        auto check = [&](const std::function<double(double, double)>& G, double tol) {
            const double lo_x = std::min(x, x2), hi_x = std::max(x, x2);
            const double lo_y = std::min(y, y2), hi_y = std::max(y, y2);
            const double g = G(x, y);
            bool ok = G(hi_x, y) >= G(lo_x, y) - tol && G(x, hi_y) >= G(x, lo_y) - tol;
            ok = ok && G((x + x2) / 2, (y + y2) / 2) >= (g + G(x2, y2)) / 2 - tol;
            ok = ok && std::abs(G(h * x, h * y) - h * g) <= tol * std::max(1.0, h * g);
            return ok;
        };
        bad_closed += !check([&](double a, double b) { return rate_gaussian_known_var(a, b, p.mu, u.mu, p.eta, u.eta); },
                             1e-9);
        bad_generic += !check(
            [&](double a, double b) { return rate_generic(a, b, p, u, RateFamily::GaussianUnknownVar).value; }, 1e-6);
    }
    return {bad_closed == 0 && bad_generic == 0,
            fmt("%d trials: closed-form failures %d (tol 1e-9), generic unknown-variance failures %d (tol 1e-6)",
                trials, bad_closed, bad_generic)};
}

// ---------------------------------------------------------------- 6, 7, 11

struct TopTwoRuns {
    ProblemInstance inst;
    std::vector<ReplicationResult> coin, tune;
    std::vector<std::size_t> checkpoints;
};

ProblemInstance spaced_instance() {
    std::vector<std::vector<Theta>> ds(3);
    for (auto& c : ds)
        for (int d = 0; d < 5; ++d) c.push_back({double(d), 25.0});
    return ProblemInstance(Family::Gaussian, {"c0", "c1", "c2"}, ds, {1, 1, 1}, kInf, ThetaBox{});
}

const TopTwoRuns& top_two_runs() {
    static const TopTwoRuns runs = [] {
        TopTwoRuns r{spaced_instance(), {}, {}, {2000, 20000}};
        auto base = std::make_shared<const ProblemInstance>(r.inst);
        for (auto kind : {PolicyKind::TtttsCoin, PolicyKind::TtttsTune}) {
            ExperimentConfig c;
            c.instance = base;
            PolicyConfig p;
            p.kind = kind;
            p.name = std::string(to_string(kind));
            p.gamma = 0.5;
            c.policies = {p};
            c.run.budget = 20000;
            c.run.checkpoints = r.checkpoints;
            c.run.record_counts = true;
            c.reps = 100;
            c.seed = 606;
            c.parallelism = threads();
            c.keep_replications = true;
            finalize(c);
            auto res = run_experiment(c);
            (kind == PolicyKind::TtttsCoin ? r.coin : r.tune) = std::move(res.replications[0]);
        }
        return r;
    }();
    return runs;
}

Outcome criterion6() {
    const auto& r = top_two_runs();
    int good = 0;
    double worst_median = 0.0;
    std::vector<double> devs;
    for (const auto& rep : r.coin) {
        bool all = true;
        for (std::size_t c = 0; c < r.inst.num_contexts(); ++c) {
            const auto& ctx = r.inst.context(c);
            const std::size_t best = true_top_m(r.inst, c)[0];
            std::size_t n_c = 0;
            for (std::size_t d = ctx.first; d < ctx.first + ctx.size; ++d) n_c += rep.final_counts[d];
            const double dev = std::abs(double(rep.final_counts[best]) / n_c - 0.5);
            devs.push_back(dev);
            all = all && dev <= 0.1;
        }
        good += all;
    }
    std::nth_element(devs.begin(), devs.begin() + devs.size() / 2, devs.end());
    worst_median = devs[devs.size() / 2];
    return {good >= 90, fmt("%d/100 reps with |beta(best) - 0.5| <= 0.1 in every context (need >= 90); median "
                            "deviation %.3f",
                            good, worst_median)};
}

Outcome criterion7() {
    const auto& r = top_two_runs();
    const auto truth = static_problem(r.inst, RateFamily::GaussianUnknownVar);
    std::vector<std::size_t> first;
    for (const auto& ctx : r.inst.contexts()) first.push_back(ctx.first);
    const std::vector<double> gamma(r.inst.num_contexts(), 0.5);
    const std::size_t C = r.inst.num_contexts();
    std::vector<double> mean_late(C, 0.0);
    int shrank = 0;
    for (const auto& rep : r.coin) {
        const auto early = empirical_rates(truth, rep.count_snapshots[0], first, gamma);
        const auto late = empirical_rates(truth, rep.count_snapshots[1], first, gamma);
        double e = 0.0, l = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            mean_late[c] += late.spread[c] / r.coin.size();
            e += early.spread[c] / C;
            l += late.spread[c] / C;
        }
        shrank += l < e;
    }
    const double worst = *std::max_element(mean_late.begin(), mean_late.end());
    return {worst <= 0.5 && shrank >= 80,
            fmt("mean spread at T=20000 per context (%.3f, %.3f, %.3f) (need <= 0.5); smaller than at T=2000 in "
                "%d/100 reps (need >= 80)",
                mean_late[0], mean_late[1], mean_late[2], shrank)};
}

Outcome criterion11() {
    const auto& r = top_two_runs();
    auto count_ok = [](const std::vector<ReplicationResult>& reps) {
        int ok = 0;
        for (const auto& rep : reps) ok += *std::min_element(rep.final_counts.begin(), rep.final_counts.end()) >= 20;
        return ok;
    };
    const int coin = count_ok(r.coin), tune = count_ok(r.tune);
    return {coin >= 95 && tune >= 95,
            fmt("min_d N(d) >= 20 at T=20000: coin %d/100, tune %d/100 (need >= 95 each)", coin, tune)};
}

// ---------------------------------------------------------------- 8, 9

MetricsCurve run_policies(std::shared_ptr<const ProblemInstance> inst, std::vector<PolicyConfig> policies,
                          std::size_t budget, std::size_t reps, std::uint64_t seed) {
    ExperimentConfig c;
    c.instance = std::move(inst);
    c.policies = std::move(policies);
    c.run.budget = budget;
    c.run.checkpoints = {budget};
    c.reps = reps;
    c.seed = seed;
    c.parallelism = threads();
    finalize(c);
    return run_experiment(c).curve;
}

PolicyConfig policy(const char* name, PolicyKind kind, ModelKind model = ModelKind::Gaussian) {
    PolicyConfig p;
    p.name = name;
    p.kind = kind;
    p.model = model;
    return p;
}

Outcome criterion8() {
    auto inst = std::make_shared<const ProblemInstance>(generate_gaussian_instance(1, 5, 10, 1));
    const auto curve = run_policies(inst,
                                    {policy("ttts", PolicyKind::TtttsCoin), policy("ea", PolicyKind::EA),
                                     policy("bold", PolicyKind::BoldMC)},
                                    10000, 500, 11);
    const auto& t = curve.points[0].back();
    const auto& e = curve.points[1].back();
    const auto& b = curve.points[2].back();
    const bool ok = t.pcs >= e.pcs + 0.05 && t.pcs >= b.pcs - 2 * t.pcs_se;
    return {ok, fmt("PCS at T=10000: TTTS-C %.3f (SE %.3f), EA %.3f, BOLDmc %.3f", t.pcs, t.pcs_se, e.pcs, b.pcs)};
}

Outcome criterion9() {
    auto inst = std::make_shared<const ProblemInstance>(generate_weibull_instance(1));
    const auto curve = run_policies(inst,
                                    {policy("ttts-cw", PolicyKind::TtttsCoin, ModelKind::Weibull),
                                     policy("ttts-cn", PolicyKind::TtttsCoin, ModelKind::Gaussian),
                                     policy("ea", PolicyKind::EA)},
                                    5000, 1000, 9);
    const double w = curve.points[0].back().pcse, n = curve.points[1].back().pcse, e = curve.points[2].back().pcse;
    return {w >= n + 0.03 && w >= e + 0.03, fmt("PCSE at T=5000: TTTS-Cw %.3f, TTTS-Cn %.3f, EA %.3f", w, n, e)};
}

// ---------------------------------------------------------------- 10

Outcome criterion10() {
    const double e1 = std::abs(kl_gaussian({0, 1}, {1, 1}) - 0.5);
    const double e2 = std::abs(kl_gaussian({0, 1}, {0, 4}) - (std::log(2.0) + 0.125 - 0.5));
    const double e3 = std::abs(kl_gaussian({2, 3}, {2, 3}));
    const double hand = std::max({e1, e2, e3});

    Rng rng(1010);
    const double tau = 150.0;
    const int K = 1000000;
    double worst_z = 0.0;
    for (int t = 0; t < 10; ++t) {
        const Theta a{90 + 20 * rng.uniform(), 2 + 2 * rng.uniform()};
        const Theta b{90 + 20 * rng.uniform(), 2 + 2 * rng.uniform()};
        const double ra = a.mu / std::tgamma(1 + 1 / a.eta), rb = b.mu / std::tgamma(1 + 1 / b.eta);
        auto loglik = [&](double y, double rho, double k) {
            if (y >= tau) return -std::pow(tau / rho, k);
            return std::log(k / rho) + (k - 1) * std::log(y / rho) - std::pow(y / rho, k);
        };
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < K; ++i) {
            const double y = std::min(ra * std::pow(-std::log(rng.uniform_open()), 1 / a.eta), tau);
            const double l = loglik(y, ra, a.eta) - loglik(y, rb, b.eta);
            s += l;
            s2 += l * l;
        }
        const double mean = s / K, se = std::sqrt((s2 / K - mean * mean) / K);
        worst_z = std::max(worst_z, std::abs(kl_weibull_censored(a, b, tau) - mean) / se);
    }
    return {hand <= 1e-12 && worst_z <= 4.0,
            fmt("Gaussian hand values max error %.1e (tol 1e-12); Weibull vs 10^6-draw MC on 10 pairs, max |z| %.2f",
                hand, worst_z)};
}

// ---------------------------------------------------------------- 12

Outcome criterion12() {
    std::ifstream f(kData + "/minimal_config.json");
    std::stringstream ss;
    ss << f.rdbuf();
    const auto dir = std::filesystem::temp_directory_path() / "cttts_acceptance_12";
    std::filesystem::create_directories(dir);
    std::vector<std::string> bytes;
    for (std::size_t par : {1, 8}) {
        cttts_experiment* exp = nullptr;
        if (cttts_experiment_from_json(ss.str().c_str(), kData.c_str(), &exp) != CTTTS_OK)
            return {false, cttts_last_error()};
        cttts_experiment_set_reps(exp, 40);
        cttts_experiment_set_budget(exp, 400);
        cttts_experiment_set_parallelism(exp, par);
        const auto path = (dir / ("p" + std::to_string(par) + ".csv")).string();
        const auto st = cttts_experiment_run(exp, path.c_str(), nullptr, nullptr);
        cttts_experiment_free(exp);
        if (st != CTTTS_OK) return {false, cttts_last_error()};
        std::ifstream in(path, std::ios::binary);
        std::stringstream b;
        b << in.rdbuf();
        bytes.push_back(b.str());
    }
    std::filesystem::remove_all(dir);
    return {bytes[0] == bytes[1] && !bytes[0].empty(),
            fmt("CSV at parallelism 1 and 8: %zu vs %zu bytes, %s", bytes[0].size(), bytes[1].size(),
                bytes[0] == bytes[1] ? "identical" : "different")};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"exact step probabilities vs Monte Carlo", criterion1},
        {"two-design reduction", criterion2},
        {"flat-rate counterexample", criterion3},
        {"KKT self-consistency", criterion4},
        {"rate-function properties", criterion5},
        {"gamma convergence", criterion6},
        {"balance trajectory", criterion7},
        {"policy ordering (Gaussian)", criterion8},
        {"Weibull objective", criterion9},
        {"KL oracles", criterion10},
        {"consistency", criterion11},
        {"determinism", criterion12},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!wanted.empty() && !wanted.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
