#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"
#include "policies.hpp"

using namespace cttts;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

ProblemInstance gaussian(const std::vector<std::vector<double>>& mus, std::vector<std::size_t> m = {}) {
    std::vector<std::string> ids;
    std::vector<std::vector<Theta>> ds(mus.size());
    for (std::size_t c = 0; c < mus.size(); ++c) {
        ids.push_back("c" + std::to_string(c));
        for (double mu : mus[c]) ds[c].push_back({mu, 1.0});
    }
    if (m.empty()) m.assign(mus.size(), 1);
    return ProblemInstance(Family::Gaussian, ids, ds, m, kInf, ThetaBox{});
}

std::size_t categorical(const std::vector<double>& p, Rng& rng) {
    double u = rng.uniform(), acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if ((acc += p[i]) > u) return i;
    return p.size() - 1;
}

std::vector<std::vector<double>> random_pi(Rng& rng, std::size_t contexts, std::size_t designs) {
    std::vector<std::vector<double>> pi(contexts, std::vector<double>(designs));
    for (auto& row : pi) {
        for (auto& x : row) x = 0.05 + rng.uniform();
        const double s = std::accumulate(row.begin(), row.end(), 0.0);
        for (auto& x : row) x /= s;
    }
    return pi;
}

// Textbook top-two sampling probability for a single context.
std::vector<double> ttts_single_context(const std::vector<double>& pi, double gamma) {
    std::vector<double> psi(pi.size());
    for (std::size_t d = 0; d < pi.size(); ++d) {
        double s = 0.0;
        for (std::size_t j = 0; j < pi.size(); ++j)
            if (j != d) s += pi[j] / (1.0 - pi[j]);
        psi[d] = pi[d] * (gamma + (1.0 - gamma) * s);
    }
    return psi;
}

struct Fixture {
    ProblemInstance inst;
    AllocationHistory hist;
    NormalGammaModel model;
    explicit Fixture(ProblemInstance i)
        : inst(std::move(i)), hist(inst), model(inst.num_designs(), inst.box()) {}
    void add(std::size_t d, std::initializer_list<double> xs) {
        for (double x : xs) {
            hist.record(d, x);
            model.observe(d, x);
        }
    }
    PolicyView view() const { return {inst, hist, model}; }
};

} // namespace

TEST_CASE("top-two step with deterministic draws") {
    TopSets first, second;
    std::vector<std::size_t> dis;
    int calls = 0;
    auto draw = [&](Rng&, TopSets& t) { t = {{calls++ == 0 ? std::size_t{0} : std::size_t{1}}}; };
    auto on_cap = [](Rng&, const TopSets&) -> StepDecision { throw std::logic_error("unreachable"); };
    Rng rng(1);
    const std::vector<double> g1{1.0}, g0{0.0};
    CHECK(top_two_step(g1, draw, on_cap, rng, {}, first, second, dis).design == 0);
    calls = 0;
    CHECK(top_two_step(g0, draw, on_cap, rng, {}, first, second, dis).design == 1);

    // Agreeing draws exhaust the cap.
    auto same = [](Rng&, TopSets& t) { t = {{0}}; };
    TopTwoOptions strict{5, false};
    CHECK_THROWS_AS(top_two_step(g1, same, on_cap, rng, strict, first, second, dis), RuntimeError);
    auto fewest = [](Rng&, const TopSets&) { return StepDecision{0, 7, 0, true}; };
    const auto fb = top_two_step(g1, same, fewest, rng, TopTwoOptions{5, true}, first, second, dis);
    CHECK(fb.fallback);
    CHECK(fb.design == 7);
    CHECK(fb.resamples_used == 5);
}

TEST_CASE("analytic step probabilities: closed forms") {
    const std::vector<double> half{0.5};
    auto r = analytic_policy_prob({{0.9, 0.1}}, half);
    CHECK(r.psi[0][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.psi[0][1] == doctest::Approx(0.5).epsilon(1e-12));
    const std::vector<double> one{1.0};
    const std::vector<double> pi{0.2, 0.5, 0.3};
    auto e = analytic_policy_prob({pi}, one);
    for (std::size_t d = 0; d < 3; ++d) CHECK(e.psi[0][d] == doctest::Approx(pi[d]).epsilon(1e-12));

    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_pi(rng, 1, 4)[0];
        const std::vector<double> g{rng.uniform()};
        const auto a = analytic_policy_prob({p}, g);
        const auto ref = ttts_single_context(p, g[0]);
        for (std::size_t d = 0; d < 4; ++d) CHECK(a.psi[0][d] == doctest::Approx(ref[d]).epsilon(1e-12));
    }
    CHECK_THROWS(analytic_policy_prob({{1.0, 0.0}}, half));
}

TEST_CASE("analytic step probabilities match simulated steps") {
    Rng rng(8);
    const auto pi = random_pi(rng, 2, 3);
    const std::vector<double> gamma{0.5, 0.5};
    const auto a = analytic_policy_prob(pi, gamma);
    double total = 0.0;
    for (const auto& row : a.psi) total += std::accumulate(row.begin(), row.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.alpha[0] + a.alpha[1] == doctest::Approx(1.0).epsilon(1e-12));

    const int K = 300000;
    std::vector<std::vector<int>> rej(2, std::vector<int>(3, 0)), cond = rej;
    TopSets first, second;
    std::vector<std::size_t> dis;
    auto draw = [&](Rng& r, TopSets& t) {
        t.assign(2, {});
        for (std::size_t c = 0; c < 2; ++c) t[c] = {c * 3 + categorical(pi[c], r)};
    };
    auto on_cap = [](Rng&, const TopSets&) -> StepDecision { throw std::logic_error("cap"); };
    for (int i = 0; i < K; ++i) {
        const auto s = top_two_step(gamma, draw, on_cap, rng, TopTwoOptions{100000, false}, first, second, dis);
        ++rej[s.context][s.design - 3 * s.context];

        std::vector<std::size_t> leaders{categorical(pi[0], rng), categorical(pi[1], rng)};
        const auto d = sample_disagreement(pi, leaders, rng);
        REQUIRE(d.has_value());
        const std::size_t pick = rng.bernoulli(gamma[d->context]) ? leaders[d->context] : d->design;
        ++cond[d->context][pick];
    }
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t d = 0; d < 3; ++d) {
            const double p = a.psi[c][d], se = std::sqrt(p * (1 - p) / K);
            CHECK(std::abs(rej[c][d] / double(K) - p) < 4 * se);
            CHECK(std::abs(cond[c][d] / double(K) - p) < 4 * se);
        }

    // No disagreement is possible when every context is certain.
    CHECK_FALSE(sample_disagreement({{1.0, 0.0}, {0.0, 1.0}}, std::vector<std::size_t>{0, 1}, rng).has_value());
}

TEST_CASE("equal allocation round-robin") {
    Fixture f(gaussian({{3, 2, 1}, {1, 0}, {5, 4, 3, 2}}));
    EqualAllocation ea(f.inst);
    Rng rng(1);
    const std::size_t D = f.inst.num_designs();
    std::vector<int> hits(D, 0), ctx(3, 0);
    std::size_t first_design = 0;
    for (std::size_t t = 0; t < 3 * D; ++t) {
        const auto s = ea.step(f.view(), rng);
        if (t == 0) first_design = s.design;
        if (t == D) CHECK(s.design == first_design);
        ++hits[s.design];
        ++ctx[s.context];
        if (t + 1 == D)
            for (int h : hits) CHECK(h == 1);
    }
    for (int h : hits) CHECK(h == 3);
    CHECK(ctx == std::vector<int>{9, 6, 12});

    Fixture g(gaussian({{1, 2}, {3, 4}}));
    EqualAllocation ea2(g.inst);
    std::vector<int> visits(2, 0);
    for (int t = 0; t < 2 * 5; ++t) ++visits[ea2.step(g.view(), rng).context];
    CHECK(visits == std::vector<int>{5, 5});
}

TEST_CASE("candidate triple equals brute force") {
    auto inst = gaussian({{2, 1, 0}});
    const std::vector<double> mu{2, 1, 0}, var{1, 1, 1}, n{10, 10, 10};
    const auto t = candidate_triple(inst, mu, var, n);
    CHECK(t.d == 0);
    CHECK(t.dp == 1);
    CHECK(t.ratio == doctest::Approx(5.0));

    Rng rng(14);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t C = 1 + rng.index(4);
        std::vector<std::vector<double>> mus(C);
        std::vector<std::size_t> ms(C);
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t k = 2 + rng.index(5);
            for (std::size_t d = 0; d < k; ++d) mus[c].push_back(std::round(rng.normal(0, 3) * 8) / 8 + 1e-6 * d);
            ms[c] = 1 + rng.index(k - 1);
        }
        auto in = gaussian(mus, ms);
        const std::size_t D = in.num_designs();
        std::vector<double> m(D), v(D), cnt(D);
        for (std::size_t d = 0; d < D; ++d) {
            m[d] = in.design(d).theta.mu;
            v[d] = 0.1 + rng.uniform();
            cnt[d] = 2 + rng.index(50);
        }
        // Oracle: every (c, p in true top, u outside) pair.
        double best = kInf;
        std::size_t bc = 0, bd = 0, bu = 0;
        for (std::size_t c = 0; c < C; ++c) {
            const auto top = true_top_m(in, c);
            const auto& ctx = in.context(c);
            for (std::size_t p : top)
                for (std::size_t u = ctx.first; u < ctx.first + ctx.size; ++u) {
                    if (std::find(top.begin(), top.end(), u) != top.end()) continue;
                    const double r = (m[p] - m[u]) * (m[p] - m[u]) / (v[p] / cnt[p] + v[u] / cnt[u]);
                    if (r < best) best = r, bc = c, bd = p, bu = u;
                }
        }
        const auto got = candidate_triple(in, m, v, cnt);
        CHECK(got.ratio == best);
        CHECK(got.context == bc);
        CHECK(got.d == bd);
        CHECK(got.dp == bu);
    }
}

TEST_CASE("BOLDmc decisions") {
    SUBCASE("smaller gap wins the context") {
        Fixture f(gaussian({{5.0, 4.0}, {20.0, 0.0}}));
        f.add(0, {4.0, 6.0});
        f.add(1, {3.9, 5.9});
        f.add(2, {9.0, 11.0});
        f.add(3, {-1.0, 1.0});
        BoldMC b;
        Rng rng(1);
        CHECK(b.step(f.view(), rng).context == 0);
    }
    SUBCASE("balanced sums explore") {
        Fixture f(gaussian({{2.0, 1.0}}));
        f.add(0, {1.0, 3.0});
        f.add(1, {0.0, 2.0});
        BoldMC b;
        Rng rng(1);
        CHECK(b.step(f.view(), rng).design == 1);
    }
    SUBCASE("needs two samples") {
        Fixture f(gaussian({{2.0, 1.0}}));
        f.add(0, {1.0, 3.0});
        f.add(1, {0.0});
        BoldMC b;
        Rng rng(1);
        CHECK_THROWS_AS(b.step(f.view(), rng), RuntimeError);
    }
}

TEST_CASE("AOAmc look-ahead") {
    auto inst = gaussian({{2.0, 1.0}});
    const std::vector<double> mu{2.0, 1.0}, var{1.5, 0.7};
    for (auto n : {std::vector<double>{3, 8}, std::vector<double>{10, 10}, std::vector<double>{40, 2}}) {
        const double with_d = AoaMC::lookahead_min_ratio(inst, 0, mu, var, n, 0);
        const double with_dp = AoaMC::lookahead_min_ratio(inst, 0, mu, var, n, 1);
        // With one pair the comparison reduces to var/(N(N+1)) per design.
        const bool prefer_d = var[0] / (n[0] * (n[0] + 1)) > var[1] / (n[1] * (n[1] + 1));
        CHECK((with_d > with_dp) == prefer_d);
        CHECK(with_d == doctest::Approx(1.0 / (var[0] / (n[0] + 1) + var[1] / n[1])));
    }

    SUBCASE("symmetric context explores") {
        Fixture f(gaussian({{1.0, -1.0}}));
        f.add(0, {0.5, 1.5});
        f.add(1, {-0.5, -1.5});
        AoaMC a;
        Rng rng(1);
        CHECK(a.step(f.view(), rng).design == 1);
    }
    SUBCASE("undersampled preferred design") {
        Fixture f(gaussian({{1.0, -1.0}}));
        f.add(0, {0.5, 1.5});
        for (int i = 0; i < 50; ++i) f.add(1, {-1.5, -0.5});
        AoaMC a;
        Rng rng(1);
        CHECK(a.step(f.view(), rng).design == 0);
    }
}

TEST_CASE("final selection") {
    Fixture f(gaussian({{3.0, 0.0, -3.0}, {1.0, 0.9}}));
    for (int i = 0; i < 200; ++i) {
        f.add(0, {3.0 + (i % 2 ? 0.1 : -0.1)});
        f.add(1, {0.0 + (i % 2 ? 0.1 : -0.1)});
        f.add(2, {-3.0 + (i % 2 ? 0.1 : -0.1)});
    }
    f.add(3, {1.0, 1.0});
    f.add(4, {0.9, 0.9});
    Rng rng(2);
    const auto plugin = select_final(f.model, f.inst, SelectionMode::Plugin);
    const auto bayes = select_final(f.model, f.inst, SelectionMode::Bayes, &rng, 500);
    CHECK(plugin[0] == true_top_m(f.inst, 0));
    CHECK(bayes[0] == true_top_m(f.inst, 0));
    CHECK(plugin[1] == std::vector<std::size_t>{3});
}

TEST_CASE("gamma tuning") {
    SUBCASE("symmetric context solves to one half") {
        Fixture f(gaussian({{1.0, -1.0}}));
        f.add(0, {0.5, 1.5, 1.0});
        f.add(1, {-0.5, -1.5, -1.0});
        PolicyConfig cfg;
        cfg.kind = PolicyKind::TtttsTune;
        TopTwoPolicy p(f.inst, cfg);
        p.tune(f.view());
        CHECK(p.tunes() == 1);
        CHECK(std::abs(p.gamma()[0] - 0.5) <= 1e-3);
    }
    SUBCASE("tuning runs at schedule crossings") {
        Fixture f(gaussian({{1.0, 0.0, -0.5}}));
        f.add(0, {0.5, 1.5});
        f.add(1, {-0.5, 0.5});
        f.add(2, {-1.0, 0.0});
        PolicyConfig cfg;
        cfg.kind = PolicyKind::TtttsTune;
        cfg.tune_schedule = {4, 100};
        TopTwoPolicy p(f.inst, cfg);
        Rng rng(3);
        p.step(f.view(), rng);
        CHECK(p.tunes() == 1);
        p.step(f.view(), rng);
        CHECK(p.tunes() == 1);
    }
}

TEST_CASE("policy construction") {
    auto inst = gaussian({{1.0, 0.0}});
    CHECK_THROWS_AS(policy_kind_from_string("ttts-magic"), ConfigError);
    CHECK(valid_policy_kinds().find("tttsc-coin") != std::string::npos);
    PolicyConfig bad;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(make_policy(bad, inst), ConfigError);
    for (auto k : {PolicyKind::TtttsCoin, PolicyKind::TtttsTune, PolicyKind::EA, PolicyKind::BoldMC, PolicyKind::AoaMC}) {
        PolicyConfig c;
        c.kind = k;
        CHECK(make_policy(c, inst)->kind() == k);
    }
}
