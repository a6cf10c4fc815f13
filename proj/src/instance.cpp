// SPDX-License-Identifier: Apache-2.0
#include "instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "error.hpp"

namespace cttts {

std::string_view to_string(Family family) noexcept {
    switch (family) {
    case Family::Gaussian: return "gaussian";
    case Family::WeibullCensored: return "weibull-censored";
    }
    return "unknown";
}

Family family_from_string(std::string_view name) {
    if (name == "gaussian") return Family::Gaussian;
    if (name == "weibull-censored" || name == "weibull") return Family::WeibullCensored;
    throw ConfigError("unknown distribution family '" + std::string(name) +
                      "' (expected gaussian | weibull-censored)");
}

double weibull_scale_from_mean(double mu, double shape) {
    return mu / std::tgamma(1.0 + 1.0 / shape);
}

double weibull_mean_from_scale(double rho, double shape) {
    return rho * std::tgamma(1.0 + 1.0 / shape);
}

double weibull_inverse_cdf(double rho, double shape, double u) {
    return rho * std::pow(-std::log(u), 1.0 / shape);
}

namespace {

std::string design_id(std::size_t c, std::size_t j) {
    return "c" + std::to_string(c) + "_d" + std::to_string(j);
}

} // namespace

ProblemInstance::ProblemInstance(Family family,
                                 std::vector<std::string> context_ids,
                                 std::vector<std::vector<Theta>> designs,
                                 std::vector<std::size_t> m,
                                 double tau,
                                 ThetaBox box)
    : family_(family), tau_(tau), box_(box) {
    if (context_ids.empty()) throw ConfigError("instance has no contexts");
    if (designs.size() != context_ids.size() || m.size() != context_ids.size())
        throw ConfigError("contexts, designs and m must have the same length");
    if (!(box.mu_lo < box.mu_hi) || !(box.eta_lo < box.eta_hi))
        throw ConfigError("theta_box bounds must be increasing");
    if (family == Family::WeibullCensored && !(tau > 0.0))
        throw ConfigError("weibull-censored instances need a positive censoring time tau");

    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < context_ids.size(); ++c) {
        if (!seen.insert(context_ids[c]).second)
            throw ConfigError("duplicate context id '" + context_ids[c] + "'");
        const auto& ds = designs[c];
        if (ds.empty()) throw ConfigError("context '" + context_ids[c] + "' has no designs");
        if (m[c] < 1 || m[c] > ds.size())
            throw ConfigError("context '" + context_ids[c] + "' needs 1 <= m <= |D_c|");

        std::vector<double> mus;
        for (const auto& t : ds) mus.push_back(t.mu);
        std::sort(mus.begin(), mus.end());
        if (std::adjacent_find(mus.begin(), mus.end()) != mus.end())
            throw ConfigError("context '" + context_ids[c] + "' has tied performance parameters");

        contexts_.push_back({context_ids[c], designs_.size(), ds.size(), m[c]});
        for (std::size_t j = 0; j < ds.size(); ++j) {
            if (!box.contains_strictly(ds[j]))
                throw ConfigError("design " + design_id(c, j) + " lies outside theta_box");
            if (family == Family::Gaussian && !(ds[j].eta > 0.0))
                throw ConfigError("design " + design_id(c, j) + " needs a positive variance");
            if (family == Family::WeibullCensored && !(ds[j].eta > 0.0 && ds[j].mu > 0.0))
                throw ConfigError("design " + design_id(c, j) + " needs positive mean and shape");
            designs_.push_back({design_id(c, j), c, ds[j]});
        }
    }
}

std::size_t ProblemInstance::context_index(std::string_view id) const {
    for (std::size_t c = 0; c < contexts_.size(); ++c)
        if (contexts_[c].id == id) return c;
    throw ConfigError("unknown context id '" + std::string(id) + "'");
}

std::size_t ProblemInstance::design_index(std::string_view id) const {
    for (std::size_t d = 0; d < designs_.size(); ++d)
        if (designs_[d].id == id) return d;
    throw ConfigError("unknown design id '" + std::string(id) + "'");
}

double ProblemInstance::weibull_scale(std::size_t d) const {
    const auto& t = designs_.at(d).theta;
    return weibull_scale_from_mean(t.mu, t.eta);
}

void select_top(std::span<const double> values, const ContextSpec& ctx, std::vector<std::size_t>& out) {
    out.clear();
    if (ctx.m == 1) {
        std::size_t best = ctx.first;
        for (std::size_t d = ctx.first + 1; d < ctx.first + ctx.size; ++d)
            if (values[d] > values[best]) best = d;
        out.push_back(best);
        return;
    }
    out.resize(ctx.size);
    std::iota(out.begin(), out.end(), ctx.first);
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(ctx.m), out.end(),
                      [&](std::size_t a, std::size_t b) {
                          return values[a] > values[b] || (values[a] == values[b] && a < b);
                      });
    out.resize(ctx.m);
    std::sort(out.begin(), out.end());
}

std::vector<std::size_t> select_top(std::span<const double> values, const ContextSpec& ctx) {
    std::vector<std::size_t> out;
    select_top(values, ctx, out);
    return out;
}

std::vector<std::size_t> true_top_m(const ProblemInstance& instance, std::size_t context) {
    if (context >= instance.num_contexts())
        throw ConfigError("unknown context index " + std::to_string(context));
    std::vector<double> mus(instance.num_designs());
    for (std::size_t d = 0; d < mus.size(); ++d) mus[d] = instance.design(d).theta.mu;
    return select_top(mus, instance.context(context));
}

std::vector<std::size_t> true_top_m(const ProblemInstance& instance, std::string_view context_id) {
    return true_top_m(instance, instance.context_index(context_id));
}

Observation simulate(const ProblemInstance& instance, std::size_t design, Rng& rng) {
    if (design >= instance.num_designs())
        throw ConfigError("unknown design index " + std::to_string(design));
    const Theta& t = instance.design(design).theta;
    if (instance.family() == Family::Gaussian)
        return {design, rng.normal(t.mu, std::sqrt(t.eta))};
    const double rho = weibull_scale_from_mean(t.mu, t.eta);
    double w = 0.0;
    // u = 1 maps to a zero lifetime, which has no density under the model.
    while (!(w > 0.0)) w = weibull_inverse_cdf(rho, t.eta, rng.uniform_open());
    return {design, std::min(w, instance.tau())};
}

namespace {

// Redraws individual designs until all means in the context are distinct.
template <class Draw>
std::vector<Theta> draw_context(std::size_t n, Rng& rng, Draw draw) {
    std::vector<Theta> out;
    out.reserve(n);
    while (out.size() < n) {
        Theta t = draw(rng);
        const bool collides = std::any_of(out.begin(), out.end(),
                                          [&](const Theta& o) { return o.mu == t.mu; });
        if (!collides) out.push_back(t);
    }
    return out;
}

} // namespace

ProblemInstance generate_gaussian_instance(std::uint64_t seed, std::size_t n_contexts,
                                           std::size_t n_designs, std::size_t m) {
    if (n_contexts < 1 || n_designs < 1) throw ConfigError("need at least one context and one design");
    if (m < 1 || m > n_designs) throw ConfigError("need 1 <= m <= designs per context");
    Rng rng(mix_seed(seed, 0x6761757373ULL));
    std::vector<std::string> ids;
    std::vector<std::vector<Theta>> designs;
    for (std::size_t c = 0; c < n_contexts; ++c) {
        ids.push_back("c" + std::to_string(c));
        designs.push_back(draw_context(n_designs, rng, [](Rng& r) {
            const double mu = r.normal(0.0, std::sqrt(10.0));
            const double sd = 4.0 + 2.0 * r.uniform();
            return Theta{mu, sd * sd};
        }));
    }
    return ProblemInstance(Family::Gaussian, std::move(ids), std::move(designs),
                           std::vector<std::size_t>(n_contexts, m),
                           std::numeric_limits<double>::infinity(), ThetaBox{});
}

ProblemInstance generate_weibull_instance(std::uint64_t seed, double tau) {
    static constexpr std::size_t sizes[] = {5, 5, 7, 6, 7};
    static constexpr std::size_t targets[] = {1, 1, 1, 2, 2};
    Rng rng(mix_seed(seed, 0x77656962ULL));
    std::vector<std::string> ids;
    std::vector<std::vector<Theta>> designs;
    for (std::size_t c = 0; c < 5; ++c) {
        ids.push_back("c" + std::to_string(c));
        designs.push_back(draw_context(sizes[c], rng, [](Rng& r) {
            const double mu = 90.0 + 20.0 * r.uniform();
            const double k = 2.0 + 2.0 * r.uniform();
            return Theta{mu, k};
        }));
    }
    return ProblemInstance(Family::WeibullCensored, std::move(ids), std::move(designs),
                           std::vector<std::size_t>(std::begin(targets), std::end(targets)), tau,
                           ThetaBox{0.0, 200.0, 0.0, 20.0});
}

nlohmann::json to_json(const ProblemInstance& instance) {
    using nlohmann::json;
    json j;
    j["family"] = to_string(instance.family());
    json contexts = json::array();
    json m = json::array();
    for (const auto& c : instance.contexts()) {
        contexts.push_back(c.id);
        m.push_back(c.m);
    }
    json designs = json::array();
    for (const auto& d : instance.designs()) {
        designs.push_back({{"context", instance.context(d.context).id},
                           {"id", d.id},
                           {"mu", d.theta.mu},
                           {"eta", d.theta.eta}});
    }
    j["contexts"] = std::move(contexts);
    j["designs"] = std::move(designs);
    j["m"] = std::move(m);
    if (std::isfinite(instance.tau()))
        j["tau"] = instance.tau();
    else
        j["tau"] = nullptr;
    const auto& b = instance.box();
    j["theta_box"] = {{b.mu_lo, b.mu_hi}, {b.eta_lo, b.eta_hi}};
    return j;
}

ProblemInstance instance_from_json(const nlohmann::json& j) {
    static const std::unordered_set<std::string> allowed = {"family", "contexts", "designs", "m",
                                                            "tau", "theta_box"};
    if (!j.is_object()) throw ConfigError("instance document must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key)) throw ConfigError("unknown instance key '" + key + "'");
    try {
        const Family family = family_from_string(j.at("family").get<std::string>());
        auto ids = j.at("contexts").get<std::vector<std::string>>();
        auto m = j.at("m").get<std::vector<std::size_t>>();
        std::vector<std::vector<Theta>> designs(ids.size());
        std::vector<std::size_t> next_local(ids.size(), 0);
        for (const auto& d : j.at("designs")) {
            const auto ctx = d.at("context").get<std::string>();
            const auto it = std::find(ids.begin(), ids.end(), ctx);
            if (it == ids.end()) throw ConfigError("design refers to unknown context '" + ctx + "'");
            const auto c = static_cast<std::size_t>(it - ids.begin());
            if (d.contains("id")) {
                const auto expected = design_id(c, next_local[c]);
                if (d.at("id").get<std::string>() != expected)
                    throw ConfigError("design id '" + d.at("id").get<std::string>() +
                                      "' does not match its position (expected '" + expected + "')");
            }
            ++next_local[c];
            designs[c].push_back({d.at("mu").get<double>(), d.at("eta").get<double>()});
        }
        double tau = std::numeric_limits<double>::infinity();
        if (j.contains("tau") && !j.at("tau").is_null()) tau = j.at("tau").get<double>();
        ThetaBox box;
        if (j.contains("theta_box")) {
            const auto& b = j.at("theta_box");
            box = {b.at(0).at(0).get<double>(), b.at(0).at(1).get<double>(),
                   b.at(1).at(0).get<double>(), b.at(1).at(1).get<double>()};
        } else if (family == Family::WeibullCensored) {
            box = {0.0, 200.0, 0.0, 20.0};
        }
        return ProblemInstance(family, std::move(ids), std::move(designs), std::move(m), tau, box);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed instance document: ") + e.what());
    }
}

AllocationHistory::AllocationHistory(const ProblemInstance& instance)
    : counts_(instance.num_designs(), 0),
      context_counts_(instance.num_contexts(), 0),
      means_(instance.num_designs(), 0.0),
      m2_(instance.num_designs(), 0.0) {
    context_of_.reserve(instance.num_designs());
    for (const auto& d : instance.designs()) context_of_.push_back(d.context);
}

void AllocationHistory::record(std::size_t design, double value) {
    const auto n = static_cast<double>(++counts_[design]);
    ++context_counts_[context_of_[design]];
    ++total_;
    // Welford update.
    const double delta = value - means_[design];
    means_[design] += delta / n;
    m2_[design] += delta * (value - means_[design]);
}

double AllocationHistory::sample_variance(std::size_t d) const {
    if (counts_[d] < 2) return std::numeric_limits<double>::quiet_NaN();
    return m2_[d] / static_cast<double>(counts_[d] - 1);
}

double AllocationHistory::psi(std::size_t d) const {
    return total_ == 0 ? 0.0 : static_cast<double>(counts_[d]) / static_cast<double>(total_);
}

double AllocationHistory::alpha(std::size_t c) const {
    return total_ == 0 ? 0.0 : static_cast<double>(context_counts_[c]) / static_cast<double>(total_);
}

double AllocationHistory::beta(std::size_t d) const {
    const auto cc = context_counts_[context_of_[d]];
    return cc == 0 ? 0.0 : static_cast<double>(counts_[d]) / static_cast<double>(cc);
}

} // namespace cttts
