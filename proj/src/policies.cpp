// SPDX-License-Identifier: Apache-2.0
#include "policies.hpp"

#include <cmath>
#include <map>

namespace cttts {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kVarianceFloor = 1e-12;
constexpr std::size_t kMaxWarnings = 32;

constexpr std::pair<PolicyKind, std::string_view> kKindNames[] = {
    {PolicyKind::TtttsCoin, "tttsc-coin"},
    {PolicyKind::TtttsTune, "tttsc-tune"},
    {PolicyKind::EA, "ea"},
    {PolicyKind::BoldMC, "boldmc"},
    {PolicyKind::AoaMC, "aoamc"},
};

bool contains_sorted(const std::vector<std::size_t>& v, std::size_t x) {
    return std::binary_search(v.begin(), v.end(), x);
}

} // namespace

std::string_view to_string(PolicyKind kind) noexcept {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "unknown";
}

std::string valid_policy_kinds() {
    std::string out;
    for (const auto& [k, name] : kKindNames) {
        if (!out.empty()) out += ", ";
        out += name;
    }
    return out;
}

PolicyKind policy_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    throw ConfigError("unknown policy '" + std::string(name) + "'; valid policies: " + valid_policy_kinds());
}

std::string_view to_string(CapFallback f) noexcept {
    return f == CapFallback::Conditional ? "conditional" : "fewest";
}

CapFallback cap_fallback_from_string(std::string_view name) {
    if (name == "conditional") return CapFallback::Conditional;
    if (name == "fewest") return CapFallback::Fewest;
    throw ConfigError("unknown fallback '" + std::string(name) + "' (valid: conditional, fewest)");
}

std::optional<Disagreement> sample_disagreement(const std::vector<std::vector<double>>& pi,
                                                std::span<const std::size_t> leaders, Rng& rng) {
    const std::size_t n = pi.size();
    if (leaders.size() != n) throw ConfigError("sample_disagreement: leaders size mismatch");
    // q[c] = P(second draw's best in c differs from the leader); summed over
    // the non-leaders so that tiny values keep their relative precision.
    std::vector<double> q(n), log_agree_suffix(n + 1, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        double v = 0.0;
        for (std::size_t d = 0; d < pi[c].size(); ++d)
            if (d != leaders[c]) v += pi[c][d];
        q[c] = std::clamp(v, 0.0, 1.0);
    }
    for (std::size_t c = n; c-- > 0;) log_agree_suffix[c] = log_agree_suffix[c + 1] + std::log1p(-q[c]);
    if (!(log_agree_suffix[0] < 0.0)) return std::nullopt;

    std::vector<std::size_t> delta;
    for (std::size_t c = 0; c < n; ++c) {
        double p = q[c];
        if (delta.empty()) {
            // First disagreement: condition on at least one among c, c+1, ...
            const double any = -std::expm1(log_agree_suffix[c]);
            p = any > 0.0 ? std::min(1.0, q[c] / any) : 0.0;
        }
        if (p > 0.0 && rng.uniform() < p) delta.push_back(c);
    }
    if (delta.empty()) return std::nullopt;
    Disagreement out;
    out.context = delta[rng.index(delta.size())];
    const auto& w = pi[out.context];
    double u = rng.uniform() * q[out.context];
    std::size_t last = leaders[out.context];
    for (std::size_t d = 0; d < w.size(); ++d) {
        if (d == leaders[out.context] || !(w[d] > 0.0)) continue;
        last = d;
        if (u < w[d]) break;
        u -= w[d];
    }
    out.design = last;
    return out;
}

ModelKind default_model(PolicyKind kind, Family family) noexcept {
    if (kind == PolicyKind::BoldMC || kind == PolicyKind::AoaMC) return ModelKind::Gaussian;
    return family == Family::WeibullCensored ? ModelKind::Weibull : ModelKind::Gaussian;
}

std::unique_ptr<Policy> make_policy(const PolicyConfig& config, const ProblemInstance& instance) {
    switch (config.kind) {
    case PolicyKind::TtttsCoin:
    case PolicyKind::TtttsTune: return std::make_unique<TopTwoPolicy>(instance, config);
    case PolicyKind::EA: return std::make_unique<EqualAllocation>(instance);
    case PolicyKind::BoldMC: return std::make_unique<BoldMC>();
    case PolicyKind::AoaMC: return std::make_unique<AoaMC>();
    }
    throw ConfigError("unsupported policy kind");
}

// ---------------------------------------------------------------- top-two

TopTwoPolicy::TopTwoPolicy(const ProblemInstance& instance, const PolicyConfig& config)
    : tune_(config.kind == PolicyKind::TtttsTune),
      gamma_(instance.num_contexts(), config.gamma),
      schedule_(config.tune_schedule),
      tune_nodes_(config.tune_weibull_nodes),
      mu_(instance.num_designs()),
      first_(instance.num_contexts()),
      second_(instance.num_contexts()) {
    if (!(config.gamma > 0.0 && config.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (config.resample_cap < 1) throw ConfigError("resample_cap must be at least 1");
    for (std::size_t i = 1; i < schedule_.size(); ++i)
        if (schedule_[i] <= schedule_[i - 1]) throw ConfigError("tune_schedule must be strictly increasing");
    options_.resample_cap = config.resample_cap;
    fallback_ = config.fallback;
    probe_ = std::max<std::size_t>(1, config.conditional_probe);
    pi_.resize(instance.num_contexts());
    pi_stamp_.assign(instance.num_contexts(), std::numeric_limits<std::size_t>::max());
    leaders_.resize(instance.num_contexts());
    bool all_best = true;
    for (const auto& ctx : instance.contexts()) all_best = all_best && ctx.m == 1;
    if (!all_best) fallback_ = CapFallback::Fewest;
}

void TopTwoPolicy::tune(const PolicyView& view) {
    const auto& model = view.model;
    std::vector<Theta> thetas(view.instance.num_designs());
    for (std::size_t d = 0; d < thetas.size(); ++d) thetas[d] = {model.mean_mu(d), model.mean_eta(d)};
    try {
        for (const auto& t : thetas)
            if (!std::isfinite(t.mu) || !(t.eta > 0.0) || !std::isfinite(t.eta))
                throw RuntimeError("plug-in estimate undefined");
        const auto problem = static_problem(view.instance, thetas, model.rate_family(), tune_nodes_);
        const auto alloc = problem.all_best() ? optimize_gamma(problem) : solve_topm_allocation(problem);
        for (std::size_t c = 0; c < gamma_.size(); ++c) gamma_[c] = std::clamp(alloc.gamma[c], 1e-3, 1.0 - 1e-3);
        ++tunes_;
    } catch (const std::exception& e) {
        if (warnings_.size() < kMaxWarnings)
            warnings_.push_back("gamma tuning at T=" + std::to_string(view.history.total()) +
                                " kept previous gamma: " + e.what());
    }
}

StepDecision TopTwoPolicy::step(const PolicyView& view, Rng& rng) {
    if (tune_) {
        bool crossed = false;
        while (next_checkpoint_ < schedule_.size() && view.history.total() >= schedule_[next_checkpoint_]) {
            ++next_checkpoint_;
            crossed = true;
        }
        if (crossed) tune(view);
    }
    const auto& instance = view.instance;
    auto draw = [&](Rng& r, TopSets& tops) {
        view.model.sample_mu(r, mu_);
        for (std::size_t c = 0; c < instance.num_contexts(); ++c) {
            const auto& ctx = instance.context(c);
            select_top(mu_, ctx, tops[c]);
            double floor = kInf;
            for (std::size_t d : tops[c]) floor = std::min(floor, mu_[d]);
            for (std::size_t d = ctx.first; d < ctx.first + ctx.size; ++d)
                if (mu_[d] == floor && !contains_sorted(tops[c], d)) {
                    ++tie_events_;
                    break;
                }
        }
    };
    auto fewest = [&](Rng& r) {
        StepDecision out;
        out.context = r.index(instance.num_contexts());
        const auto& ctx = instance.context(out.context);
        out.design = ctx.first;
        for (std::size_t d = ctx.first + 1; d < ctx.first + ctx.size; ++d)
            if (view.history.count(d) < view.history.count(out.design)) out.design = d;
        out.fallback = true;
        return out;
    };
    auto on_cap = [&](Rng& r, const TopSets& first) {
        if (fallback_ == CapFallback::Conditional) {
            bool supported = true;
            for (std::size_t c = 0; c < instance.num_contexts() && supported; ++c) {
                const auto& ctx = instance.context(c);
                leaders_[c] = first[c].front() - ctx.first;
                const std::size_t stamp = view.history.context_count(c);
                if (pi_stamp_[c] == stamp) continue;
                pi_[c].resize(ctx.size);
                supported = view.model.best_probabilities(ctx.first, ctx.size, pi_[c]);
                pi_stamp_[c] = stamp;
            }
            if (!supported) {
                fallback_ = CapFallback::Fewest;
            } else if (auto dis = sample_disagreement(pi_, leaders_, r)) {
                StepDecision out;
                out.context = dis->context;
                const std::size_t first_design = instance.context(out.context).first;
                out.design = r.bernoulli(gamma_[out.context]) ? first_design + leaders_[out.context]
                                                              : first_design + dis->design;
                return out;
            }
        }
        return fewest(r);
    };
    TopTwoOptions opt = options_;
    if (fallback_ == CapFallback::Conditional) opt.resample_cap = std::min(opt.resample_cap, probe_);
    const auto decision = top_two_step(gamma_, draw, on_cap, rng, opt, first_, second_, disagree_);
    if (decision.fallback) ++fallbacks_;
    return decision;
}

// ---------------------------------------------------------------- equal allocation

EqualAllocation::EqualAllocation(const ProblemInstance& instance)
    : next_local_(instance.num_contexts(), 0), taken_(instance.num_contexts(), 0) {}

StepDecision EqualAllocation::step(const PolicyView& view, Rng&) {
    const auto& instance = view.instance;
    const std::size_t n = instance.num_contexts();
    bool exhausted = true;
    for (std::size_t c = 0; c < n; ++c) exhausted = exhausted && taken_[c] >= instance.context(c).size;
    if (exhausted) std::fill(taken_.begin(), taken_.end(), 0);
    std::size_t c = next_context_;
    for (std::size_t k = 0; k < n; ++k, c = (c + 1) % n)
        if (taken_[c] < instance.context(c).size) break;
    const auto& ctx = instance.context(c);
    StepDecision out;
    out.context = c;
    out.design = ctx.first + next_local_[c];
    next_local_[c] = (next_local_[c] + 1) % ctx.size;
    ++taken_[c];
    next_context_ = (c + 1) % n;
    return out;
}

// ---------------------------------------------------------------- BOLDmc / AOAmc

CandidateTriple candidate_triple(const ProblemInstance& instance, std::span<const double> means,
                                 std::span<const double> variances, std::span<const double> counts) {
    CandidateTriple best{0, 0, 0, kInf};
    bool found = false;
    std::vector<std::size_t> top;
    for (std::size_t c = 0; c < instance.num_contexts(); ++c) {
        const auto& ctx = instance.context(c);
        select_top(means, ctx, top);
        for (std::size_t p : top) {
            for (std::size_t u = ctx.first; u < ctx.first + ctx.size; ++u) {
                if (contains_sorted(top, u)) continue;
                const double diff = means[p] - means[u];
                const double ratio = diff * diff / (variances[p] / counts[p] + variances[u] / counts[u]);
                if (!found || ratio < best.ratio) {
                    best = {c, p, u, ratio};
                    found = true;
                }
            }
        }
    }
    if (!found) throw RuntimeError("no context has an undesired design");
    return best;
}

StepDecision BoldMC::step(const PolicyView& view, Rng&) {
    const auto& h = view.history;
    const std::size_t n = view.instance.num_designs();
    means_.resize(n);
    vars_.resize(n);
    counts_.resize(n);
    for (std::size_t d = 0; d < n; ++d) {
        const double v = h.sample_variance(d);
        if (std::isnan(v)) throw RuntimeError("BOLDmc needs at least two samples per design");
        means_[d] = h.mean(d);
        vars_[d] = std::max(v, kVarianceFloor);
        counts_[d] = static_cast<double>(h.count(d));
    }
    const auto t = candidate_triple(view.instance, means_, vars_, counts_);
    const auto& ctx = view.instance.context(t.context);
    const auto top = select_top(means_, ctx);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t d = ctx.first; d < ctx.first + ctx.size; ++d) {
        const double psi = h.psi(d);
        (contains_sorted(top, d) ? lhs : rhs) += psi * psi / vars_[d];
    }
    return {t.context, lhs < rhs ? t.d : t.dp, 0, false};
}

double AoaMC::lookahead_min_ratio(const ProblemInstance& instance, std::size_t context,
                                  std::span<const double> means, std::span<const double> variances,
                                  std::span<const double> counts, std::size_t extra) {
    const auto& ctx = instance.context(context);
    const auto top = select_top(means, ctx);
    auto n = [&](std::size_t d) { return counts[d] + (d == extra ? 1.0 : 0.0); };
    double best = kInf;
    for (std::size_t p : top)
        for (std::size_t u = ctx.first; u < ctx.first + ctx.size; ++u) {
            if (contains_sorted(top, u)) continue;
            const double diff = means[p] - means[u];
            best = std::min(best, diff * diff / (variances[p] / n(p) + variances[u] / n(u)));
        }
    return best;
}

StepDecision AoaMC::step(const PolicyView& view, Rng&) {
    const std::size_t n = view.instance.num_designs();
    means_.resize(n);
    vars_.resize(n);
    counts_.resize(n);
    for (std::size_t d = 0; d < n; ++d) {
        if (view.history.count(d) < 2) throw RuntimeError("AOAmc needs at least two samples per design");
        means_[d] = view.model.mean_mu(d);
        vars_[d] = std::max(view.model.predictive_variance(d), kVarianceFloor);
        counts_[d] = static_cast<double>(view.history.count(d));
    }
    const auto t = candidate_triple(view.instance, means_, vars_, counts_);
    const double with_d = lookahead_min_ratio(view.instance, t.context, means_, vars_, counts_, t.d);
    const double with_dp = lookahead_min_ratio(view.instance, t.context, means_, vars_, counts_, t.dp);
    return {t.context, with_d > with_dp ? t.d : t.dp, 0, false};
}

// ---------------------------------------------------------------- final selection

SelectionMode selection_mode_from_string(std::string_view name) {
    if (name == "plugin") return SelectionMode::Plugin;
    if (name == "bayes") return SelectionMode::Bayes;
    throw ConfigError("unknown selection mode '" + std::string(name) + "' (expected plugin | bayes)");
}

TopSets select_final(const PosteriorModel& model, const ProblemInstance& instance, SelectionMode mode,
                     Rng* rng, std::size_t draws) {
    const std::size_t n = instance.num_designs();
    std::vector<double> mu(n);
    for (std::size_t d = 0; d < n; ++d) mu[d] = model.mean_mu(d);
    TopSets plugin(instance.num_contexts());
    for (std::size_t c = 0; c < instance.num_contexts(); ++c) select_top(mu, instance.context(c), plugin[c]);
    if (mode == SelectionMode::Plugin) return plugin;
    if (!rng) throw ConfigError("bayes selection needs a random stream");
    if (draws < 1) throw ConfigError("bayes selection needs at least one draw");

    std::vector<std::map<std::vector<std::size_t>, std::size_t>> freq(instance.num_contexts());
    std::vector<std::size_t> top;
    for (std::size_t k = 0; k < draws; ++k) {
        model.sample_mu(*rng, mu);
        for (std::size_t c = 0; c < instance.num_contexts(); ++c) {
            select_top(mu, instance.context(c), top);
            ++freq[c][top];
        }
    }
    TopSets out(instance.num_contexts());
    for (std::size_t c = 0; c < instance.num_contexts(); ++c) {
        std::size_t best = 0;
        for (const auto& [set, count] : freq[c]) best = std::max(best, count);
        const auto it = freq[c].find(plugin[c]);
        if (it != freq[c].end() && it->second == best) {
            out[c] = plugin[c];
            continue;
        }
        for (const auto& [set, count] : freq[c])
            if (count == best) {
                out[c] = set;
                break;
            }
    }
    return out;
}

// ---------------------------------------------------------------- exact step probabilities

PolicyProbabilities analytic_policy_prob(const std::vector<std::vector<double>>& pi,
                                         std::span<const double> gamma) {
    const std::size_t nc = pi.size();
    if (nc == 0) throw ConfigError("policy probabilities need at least one context");
    if (nc > 12) throw ConfigError("policy probabilities support at most 12 contexts");
    if (gamma.size() != nc && gamma.size() != 1) throw ConfigError("gamma must have one entry or one per context");
    double combos = 1.0;
    for (std::size_t c = 0; c < nc; ++c) {
        const auto& row = pi[c];
        if (row.size() < 2) throw ConfigError("every context needs at least two designs");
        double s = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) throw ConfigError("probabilities must be nonnegative");
            if (p >= 1.0) throw ConfigError("degenerate probabilities: a context puts mass 1 on one design");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError("each context's probabilities must sum to 1");
        combos *= static_cast<double>(row.size());
    }
    if (combos > 1e6) throw ConfigError("too many best-design assignments to enumerate (limit 1e6)");
    auto g = [&](std::size_t c) { return gamma.size() == 1 ? gamma[0] : gamma[c]; };
    for (std::size_t c = 0; c < nc; ++c)
        if (!(g(c) >= 0.0 && g(c) <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");

    PolicyProbabilities out;
    out.psi.resize(nc);
    out.beta.resize(nc);
    out.alpha.assign(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) out.psi[c].assign(pi[c].size(), 0.0);

    std::vector<std::size_t> d1(nc, 0);
    std::vector<double> q(nc), e(nc + 1);
    while (true) {
        double w = 1.0;
        for (std::size_t c = 0; c < nc; ++c) {
            w *= pi[c][d1[c]];
            double other = 0.0;
            for (std::size_t d = 0; d < pi[c].size(); ++d)
                if (d != d1[c]) other += pi[c][d];
            q[c] = other;
        }
        if (w > 0.0) {
            const double scale = w / (1.0 - w);
            for (std::size_t c = 0; c < nc; ++c) {
                // Distribution of the number of other disagreeing contexts.
                std::fill(e.begin(), e.end(), 0.0);
                e[0] = 1.0;
                std::size_t k = 0;
                for (std::size_t o = 0; o < nc; ++o) {
                    if (o == c) continue;
                    ++k;
                    for (std::size_t j = k; j > 0; --j) e[j] = e[j] * (1.0 - q[o]) + e[j - 1] * q[o];
                    e[0] *= 1.0 - q[o];
                }
                double harmonic = 0.0;
                for (std::size_t j = 0; j <= k; ++j) harmonic += e[j] / static_cast<double>(j + 1);
                const double a = scale * q[c] * harmonic;
                out.alpha[c] += a;
                out.psi[c][d1[c]] += a * g(c);
                for (std::size_t d = 0; d < pi[c].size(); ++d)
                    if (d != d1[c]) out.psi[c][d] += a * (pi[c][d] / q[c]) * (1.0 - g(c));
            }
        }
        std::size_t c = 0;
        while (c < nc && ++d1[c] == pi[c].size()) d1[c++] = 0;
        if (c == nc) break;
    }
    for (std::size_t c = 0; c < nc; ++c) {
        out.beta[c].resize(pi[c].size());
        for (std::size_t d = 0; d < pi[c].size(); ++d)
            out.beta[c][d] = out.alpha[c] > 0.0 ? out.psi[c][d] / out.alpha[c] : 0.0;
    }
    return out;
}

} // namespace cttts
