// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace cttts {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a base
/// seed and a counter (replication index, stream id).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t counter) noexcept;

/// Deterministic pseudo-random stream. One instance per consumer; not
/// thread-safe.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    [[nodiscard]] static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        return Rng(mix_seed(seed, stream));
    }

    double uniform() { return std::generate_canonical<double, 53>(engine_); }
    // (0, 1]; safe for -log(u).
    double uniform_open() { return 1.0 - uniform(); }
    double normal(double mean, double sd) {
        return mean + sd * std::normal_distribution<double>(0.0, 1.0)(engine_);
    }
    // Gamma with shape/rate parameterization.
    double gamma(double shape, double rate) {
        return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
    }
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }
    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace cttts
