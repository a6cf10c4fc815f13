#include <doctest.h>

#include <cmath>
#include <limits>

#include "error.hpp"
#include "rates.hpp"

using namespace cttts;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Unknown-variance objective with the nuisance profiled out in closed form.
double unknown_var_objective(double x, double y, const Theta& p, const Theta& u, double mu) {
    return x * 0.5 * std::log1p((p.mu - mu) * (p.mu - mu) / p.eta) +
           y * 0.5 * std::log1p((u.mu - mu) * (u.mu - mu) / u.eta);
}

double brute_unknown_var(double x, double y, const Theta& p, const Theta& u, int n = 100000) {
    double best = kInf;
    for (int i = 0; i <= n; ++i) {
        const double mu = u.mu + (p.mu - u.mu) * i / n;
        best = std::min(best, unknown_var_objective(x, y, p, u, mu));
    }
    return best;
}

} // namespace

TEST_CASE("known-variance closed form") {
    CHECK(rate_gaussian_known_var(0.5, 0.5, 1.0, 0.0, 1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(rate_gaussian_known_var(0.5, 0.0, 1.0, 0.0, 1.0, 1.0) == 0.0);
    CHECK(rate_gaussian_known_var(0.0, 0.5, 1.0, 0.0, 1.0, 1.0) == 0.0);
    const double g = rate_gaussian_known_var(0.2, 0.3, 2.0, -1.0, 1.5, 0.7);
    CHECK(rate_gaussian_known_var(0.6, 0.9, 2.0, -1.0, 1.5, 0.7) == doctest::Approx(3 * g).epsilon(1e-14));
}

TEST_CASE("generic rate: zero allocation") {
    CHECK(rate_generic(0.0, 0.0, {1, 1}, {0, 1}, RateFamily::GaussianUnknownVar).value == 0.0);
}

TEST_CASE("generic unknown-variance rate against a grid") {
    const Theta p{1.0, 1.0}, u{0.0, 1.0};
    const double brute = brute_unknown_var(0.5, 0.5, p, u);
    CHECK(std::abs(rate_generic(0.5, 0.5, p, u, RateFamily::GaussianUnknownVar).value - brute) < 1e-5);
    CHECK(std::abs(rate_gaussian_unknown_var(0.5, 0.5, p, u).value - brute) < 1e-5);

    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
        const Theta a{1 + 3 * rng.uniform(), 0.2 + 4 * rng.uniform()};
        const Theta b{a.mu - 0.1 - 2 * rng.uniform(), 0.2 + 4 * rng.uniform()};
        const double x = rng.uniform(), y = rng.uniform();
        const double ref = brute_unknown_var(x, y, a, b, 20000);
        const double exact = rate_gaussian_unknown_var(x, y, a, b).value;
        CHECK(exact <= ref + 1e-12);
        CHECK(std::abs(exact - ref) < 1e-6);
        CHECK(rate_generic(x, y, a, b, RateFamily::GaussianUnknownVar).value == doctest::Approx(exact).epsilon(1e-9));
    }
}

TEST_CASE("generic known-variance rate is half the closed form") {
    // The generic infimum of the Gaussian KL terms carries the 1/2 of the
    // Gaussian KL; the closed form omits it.
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const Theta a{2 * rng.uniform() + 0.5, 0.1 + 3 * rng.uniform()};
        const Theta b{a.mu - 0.05 - 2 * rng.uniform(), 0.1 + 3 * rng.uniform()};
        const double x = 0.01 + rng.uniform(), y = 0.01 + rng.uniform();
        const double closed = rate_gaussian_known_var(x, y, a.mu, b.mu, a.eta, b.eta);
        const double gen = rate_generic(x, y, a, b, RateFamily::GaussianKnownVar).value;
        CHECK(gen == doctest::Approx(0.5 * closed).epsilon(1e-8));
    }
}

TEST_CASE("rate properties on random pairs") {
    Rng rng(11);
    const auto pair = PairRate::gaussian_unknown_var({1.0, 2.0}, {0.2, 0.5});
    for (int i = 0; i < 2000; ++i) {
        const double mu1 = rng.normal(0, 2), mu2 = mu1 - 0.1 - rng.uniform();
        const double v1 = 0.1 + rng.uniform() * 4, v2 = 0.1 + rng.uniform() * 4;
        const double x = rng.uniform(), y = rng.uniform(), x2 = rng.uniform(), y2 = rng.uniform();
        auto G = [&](double a, double b) { return rate_gaussian_known_var(a, b, mu1, mu2, v1, v2); };
        const double lo_x = std::min(x, x2), hi_x = std::max(x, x2);
        CHECK(G(hi_x, y) >= G(lo_x, y) - 1e-9);
        CHECK(G(x, std::max(y, y2)) >= G(x, std::min(y, y2)) - 1e-9);
        CHECK(G((x + x2) / 2, (y + y2) / 2) >= (G(x, y) + G(x2, y2)) / 2 - 1e-9);
        const double h = 0.1 + 5 * rng.uniform();
        CHECK(G(h * x, h * y) == doctest::Approx(h * G(x, y)).epsilon(1e-9));

        CHECK(pair(hi_x, y) >= pair(lo_x, y) - 1e-9);
        CHECK(pair((x + x2) / 2, (y + y2) / 2) >= (pair(x, y) + pair(x2, y2)) / 2 - 1e-9);
        CHECK(pair(h * x, h * y) == doctest::Approx(h * pair(x, y)).epsilon(1e-9));
    }
}

TEST_CASE("synthetic pair rates") {
    const auto harm = PairRate::harmonic();
    const auto mn = PairRate::minimum();
    CHECK(harm(0.1, 0.1) == doctest::Approx(0.1));
    CHECK(harm(0.2, 0.6) == doctest::Approx(2.0 / (5.0 + 1.0 / 0.6)));
    CHECK(mn(0.1, 0.8) == doctest::Approx(0.1));
    CHECK(mn(0.5, 0.3) == doctest::Approx(0.3));
    CHECK(mn.smooth() == false);
    CHECK(harm(0.1, harm.invert_y(0.1, 0.09)) == doctest::Approx(0.09).epsilon(1e-12));
    // Unattainable levels.
    CHECK(harm.invert_y(0.1, 0.25) == kInf);
    CHECK(mn.invert_y(0.1, 0.2) == kInf);
    CHECK(mn.invert_y(0.1, 0.05) == doctest::Approx(0.05));
}

TEST_CASE("pair rate gradients agree with finite differences") {
    const auto kv = PairRate::gaussian_known_var({2.0, 1.5}, {0.5, 3.0});
    const auto uv = PairRate::gaussian_unknown_var({2.0, 1.5}, {0.5, 3.0});
    const auto wb = PairRate::weibull({104.0, 3.1}, {97.0, 2.4}, 150.0, ThetaBox{0, 200, 0, 20});
    for (const PairRate* r : {&kv, &uv, &wb}) {
        for (auto [x, y] : {std::pair{0.3, 0.4}, std::pair{0.05, 0.6}, std::pair{0.7, 0.02}}) {
            const auto g = r->gradient(x, y), fd = gradient_fd(*r, x, y);
            CHECK(g.dx == doctest::Approx(fd.dx).epsilon(1e-4));
            CHECK(g.dy == doctest::Approx(fd.dy).epsilon(1e-4));
        }
    }
}

TEST_CASE("inverse of the pair rate") {
    const auto uv = PairRate::gaussian_unknown_var({1.0, 1.0}, {0.0, 2.0});
    const double x = 0.3;
    for (double z : {0.01, 0.03, 0.05}) {
        const double y = uv.invert_y(x, z);
        REQUIRE(std::isfinite(y));
        CHECK(uv(x, y) == doctest::Approx(z).epsilon(1e-9));
        const double x2 = uv.invert_x(y, z);
        CHECK(x2 == doctest::Approx(x).epsilon(1e-7));
    }
    CHECK(uv.invert_y(x, 2 * x * uv.rate_x_only()) == kInf);
}

TEST_CASE("Weibull pair rate") {
    const Theta p{104.0, 3.1}, u{97.0, 2.4};
    const ThetaBox box{0, 200, 0, 20};
    const double tau = 150.0;
    const auto table = PairRate::weibull(p, u, tau, box);
    for (auto [x, y] : {std::pair{0.5, 0.5}, std::pair{0.1, 0.9}, std::pair{0.8, 0.05}}) {
        const double direct = rate_generic(x, y, p, u, RateFamily::WeibullCensored, tau, box).value;
        CHECK(table(x, y) == doctest::Approx(direct).epsilon(1e-6));
    }
    // Profiling the nuisance never exceeds the KL at the true shape.
    const auto [klo, khi] = weibull_shape_range(box);
    for (double mu : {98.0, 100.0, 103.0}) {
        const double prof = weibull_profile_kl(p, mu, tau, klo, khi);
        CHECK(prof <= kl_weibull_censored(p, {mu, p.eta}, tau) + 1e-12);
        CHECK(prof >= 0.0);
    }
    CHECK(weibull_profile_kl(p, p.mu, tau, klo, khi) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("rate input validation") {
    CHECK_THROWS_AS(PairRate::gaussian_known_var({0.0, 1.0}, {1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(rate_family_from_string("laplace"), ConfigError);
    CHECK_THROWS_AS(PairRate::from_json(nlohmann::json{{"type", "cauchy"}}), ConfigError);
}
