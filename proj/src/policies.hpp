// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "allocation.hpp"
#include "error.hpp"
#include "instance.hpp"
#include "posterior.hpp"
#include "rng.hpp"

namespace cttts {

enum class PolicyKind { TtttsCoin, TtttsTune, EA, BoldMC, AoaMC };

std::string_view to_string(PolicyKind kind) noexcept;
PolicyKind policy_kind_from_string(std::string_view name);
/// Comma-separated list of accepted policy kinds (for diagnostics).
std::string valid_policy_kinds();

struct StepDecision {
    std::size_t context = 0;
    std::size_t design = 0;
    std::size_t resamples_used = 0;
    bool fallback = false;
};

struct TopTwoOptions {
    std::size_t resample_cap = 1000;
    bool fallback = true;
};

/// Per-context candidate top sets, sorted ascending (global design indices).
using TopSets = std::vector<std::vector<std::size_t>>;

/// One top-two allocation step. `draw(rng, tops)` fills a fresh joint draw of
/// per-context top sets. When `resample_cap` redraws all agree with the first
/// draw, `on_cap(rng, first)` decides the step.
template <class Draw, class OnCap>
StepDecision top_two_step(std::span<const double> gamma, Draw&& draw, OnCap&& on_cap, Rng& rng,
                          const TopTwoOptions& opt, TopSets& first, TopSets& second,
                          std::vector<std::size_t>& disagree) {
    draw(rng, first);
    const std::size_t n_ctx = first.size();
    StepDecision out;
    disagree.clear();
    while (out.resamples_used < opt.resample_cap) {
        draw(rng, second);
        ++out.resamples_used;
        for (std::size_t c = 0; c < n_ctx; ++c)
            if (first[c] != second[c]) disagree.push_back(c);
        if (!disagree.empty()) break;
    }
    if (disagree.empty()) {
        if (!opt.fallback) throw RuntimeError("top-two resampling cap exhausted");
        StepDecision fb = on_cap(rng, static_cast<const TopSets&>(first));
        fb.resamples_used = out.resamples_used;
        return fb;
    }
    const std::size_t c = disagree[rng.index(disagree.size())];
    // k-th element of a \ b for sorted vectors.
    auto nth_difference = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                             std::size_t k) {
        for (std::size_t d : a)
            if (!std::binary_search(b.begin(), b.end(), d) && k-- == 0) return d;
        return a.back();
    };
    auto count_difference = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        std::size_t n = 0;
        for (std::size_t d : a) n += std::binary_search(b.begin(), b.end(), d) ? 0 : 1;
        return n;
    };
    const std::size_t exploit = nth_difference(first[c], second[c], rng.index(count_difference(first[c], second[c])));
    const std::size_t explore = nth_difference(second[c], first[c], rng.index(count_difference(second[c], first[c])));
    out.context = c;
    out.design = rng.bernoulli(gamma[c]) ? exploit : explore;
    return out;
}

struct Disagreement {
    std::size_t context = 0;
    std::size_t design = 0; // local index of the second draw's best design
};

/// Exact draw of a second top-two sample conditioned on disagreeing with the
/// first (m = 1 everywhere): pi[c] holds the best-design probabilities of
/// context c over its local designs and leaders[c] the first draw's best.
/// The context is uniform over the disagreeing ones. Nullopt when no
/// disagreement has positive probability.
std::optional<Disagreement> sample_disagreement(const std::vector<std::vector<double>>& pi,
                                                std::span<const std::size_t> leaders, Rng& rng);

/// State visible to a policy at a decision point.
struct PolicyView {
    const ProblemInstance& instance;
    const AllocationHistory& history;
    const PosteriorModel& model;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual StepDecision step(const PolicyView& view, Rng& rng) = 0;
    virtual PolicyKind kind() const noexcept = 0;
    /// Current per-context gamma (empty for policies without one).
    virtual std::span<const double> gamma() const noexcept { return {}; }
    std::span<const std::string> warnings() const noexcept { return warnings_; }
    std::size_t tie_events() const noexcept { return tie_events_; }
    std::size_t fallbacks() const noexcept { return fallbacks_; }

protected:
    std::vector<std::string> warnings_;
    std::size_t tie_events_ = 0;
    std::size_t fallbacks_ = 0;
};

enum class CapFallback { Conditional, Fewest };

std::string_view to_string(CapFallback f) noexcept;
CapFallback cap_fallback_from_string(std::string_view name);

struct PolicyConfig {
    std::string name;
    PolicyKind kind = PolicyKind::TtttsCoin;
    double gamma = 0.5;
    ModelKind model = ModelKind::Gaussian;
    std::vector<std::size_t> tune_schedule{10, 100, 1000, 10000};
    std::size_t resample_cap = 1000;
    /// Cap-exhaustion rule: exact conditional second draw (when the model
    /// provides best-design probabilities and m = 1) or the least-sampled design.
    CapFallback fallback = CapFallback::Conditional;
    /// Redraws attempted before the exact conditional draw takes over.
    std::size_t conditional_probe = 16;
    /// Weibull rate-table resolution used when tuning gamma.
    int tune_weibull_nodes = 65;
};

/// Model that a policy kind uses when none is configured.
ModelKind default_model(PolicyKind kind, Family family) noexcept;

std::unique_ptr<Policy> make_policy(const PolicyConfig& config, const ProblemInstance& instance);

/// Top-two Thompson sampling over the posterior model.
class TopTwoPolicy final : public Policy {
public:
    TopTwoPolicy(const ProblemInstance& instance, const PolicyConfig& config);
    StepDecision step(const PolicyView& view, Rng& rng) override;
    PolicyKind kind() const noexcept override { return tune_ ? PolicyKind::TtttsTune : PolicyKind::TtttsCoin; }
    std::span<const double> gamma() const noexcept override { return gamma_; }
    /// Re-solves gamma from the posterior means (invoked on schedule crossings).
    void tune(const PolicyView& view);
    std::size_t tunes() const noexcept { return tunes_; }

private:
    bool tune_ = false;
    std::vector<double> gamma_;
    std::vector<std::size_t> schedule_;
    std::size_t next_checkpoint_ = 0;
    std::size_t tunes_ = 0;
    TopTwoOptions options_;
    CapFallback fallback_ = CapFallback::Conditional;
    std::size_t probe_ = 16;
    int tune_nodes_ = 65;
    // Best-design probabilities per context, valid while the context's sample count is unchanged.
    std::vector<std::vector<double>> pi_;
    std::vector<std::size_t> pi_stamp_;
    std::vector<std::size_t> leaders_;
    std::vector<double> mu_;
    TopSets first_, second_;
    std::vector<std::size_t> disagree_;
};

/// Equal allocation: round-robin over contexts, and over designs within each.
class EqualAllocation final : public Policy {
public:
    explicit EqualAllocation(const ProblemInstance& instance);
    StepDecision step(const PolicyView& view, Rng& rng) override;
    PolicyKind kind() const noexcept override { return PolicyKind::EA; }

private:
    std::vector<std::size_t> next_local_, taken_;
    std::size_t next_context_ = 0;
};

struct CandidateTriple {
    std::size_t context = 0;
    std::size_t d = 0;  // preferred candidate (global index)
    std::size_t dp = 0; // undesired candidate
    double ratio = 0.0;
};

/// argmin over contexts and (P, U) pairs of (m_d - m_d')² / (v_d/N_d + v_d'/N_d'),
/// scanning contexts, then d, then d' in increasing index with strict <.
CandidateTriple candidate_triple(const ProblemInstance& instance, std::span<const double> means,
                                 std::span<const double> variances, std::span<const double> counts);

/// Sample-mean/sample-variance balance tracker.
class BoldMC final : public Policy {
public:
    StepDecision step(const PolicyView& view, Rng& rng) override;
    PolicyKind kind() const noexcept override { return PolicyKind::BoldMC; }

private:
    std::vector<double> means_, vars_, counts_;
};

/// One-step look-ahead on the posterior mean and predictive variance.
class AoaMC final : public Policy {
public:
    StepDecision step(const PolicyView& view, Rng& rng) override;
    PolicyKind kind() const noexcept override { return PolicyKind::AoaMC; }

    /// Context min-ratio after adding one sample to `extra`.
    static double lookahead_min_ratio(const ProblemInstance& instance, std::size_t context,
                                      std::span<const double> means, std::span<const double> variances,
                                      std::span<const double> counts, std::size_t extra);

private:
    std::vector<double> means_, vars_, counts_;
};

enum class SelectionMode { Plugin, Bayes };

SelectionMode selection_mode_from_string(std::string_view name);

/// Per-context selected sets. Bayes mode uses `draws` joint posterior samples.
TopSets select_final(const PosteriorModel& model, const ProblemInstance& instance, SelectionMode mode,
                     Rng* rng = nullptr, std::size_t draws = 1000);

struct PolicyProbabilities {
    std::vector<std::vector<double>> psi;  // per context, per design
    std::vector<double> alpha;
    std::vector<std::vector<double>> beta;
};

/// Exact step probabilities of the top-two rule given per-context
/// probabilities of being best (m = 1).
PolicyProbabilities analytic_policy_prob(const std::vector<std::vector<double>>& pi,
                                         std::span<const double> gamma);

} // namespace cttts
