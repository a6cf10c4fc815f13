// SPDX-License-Identifier: Apache-2.0
#include "harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "error.hpp"
#include "rng.hpp"

namespace cttts {

std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t rep) noexcept {
    return mix_seed(base_seed, static_cast<std::uint64_t>(rep));
}

namespace {

enum Stream : std::uint64_t { kSimStream = 0, kPolicyStream = 1, kSelectStream = 2 };

} // namespace

ReplicationResult run_replication(const ProblemInstance& instance, const PolicyConfig& policy_config,
                                  const RunSettings& settings, std::uint64_t seed) {
    const std::size_t n = instance.num_designs();
    const std::size_t init_total = settings.init_per_design * n;
    if (settings.budget < init_total)
        throw ConfigError("budget " + std::to_string(settings.budget) + " is smaller than the initial " +
                          std::to_string(init_total) + " samples");
    if (settings.checkpoints.empty() || settings.checkpoints.back() > settings.budget)
        throw ConfigError("checkpoints must be non-empty and not exceed the budget");

    Rng sim = Rng::derive(seed, kSimStream);
    Rng prng = Rng::derive(seed, kPolicyStream);
    Rng srng = Rng::derive(seed, kSelectStream);

    auto model = make_model(policy_config.model, instance);
    auto policy = make_policy(policy_config, instance);
    AllocationHistory history(instance);

    ReplicationResult out;
    std::vector<std::vector<std::size_t>> truth(instance.num_contexts());
    for (std::size_t c = 0; c < truth.size(); ++c) truth[c] = true_top_m(instance, c);

    std::size_t next_cp = 0;
    auto record_checkpoints = [&] {
        while (next_cp < settings.checkpoints.size() && settings.checkpoints[next_cp] <= history.total()) {
            const TopSets sets = select_final(*model, instance, settings.selection, &srng, settings.bayes_draws);
            std::vector<char> row(truth.size());
            for (std::size_t c = 0; c < truth.size(); ++c) row[c] = sets[c] == truth[c] ? 1 : 0;
            out.correct.push_back(std::move(row));
            if (settings.record_counts)
                out.count_snapshots.emplace_back(history.counts().begin(), history.counts().end());
            ++next_cp;
        }
    };
    auto sample = [&](std::size_t d) {
        const Observation obs = simulate(instance, d, sim);
        model->observe(d, obs.value);
        history.record(d, obs.value);
    };

    for (std::size_t k = 0; k < settings.init_per_design; ++k)
        for (std::size_t d = 0; d < n; ++d) sample(d);
    record_checkpoints();

    const PolicyView view{instance, history, *model};
    while (history.total() < settings.budget) {
        const StepDecision step = policy->step(view, prng);
        sample(step.design);
        record_checkpoints();
    }

    out.final_counts.assign(history.counts().begin(), history.counts().end());
    const auto g = policy->gamma();
    out.final_gamma.assign(g.begin(), g.end());
    out.fallbacks = policy->fallbacks();
    out.tie_events = policy->tie_events();
    const auto w = policy->warnings();
    out.warnings.assign(w.begin(), w.end());
    return out;
}

std::vector<std::size_t> default_checkpoints(std::size_t start, std::size_t budget, std::size_t count) {
    if (budget == 0) throw ConfigError("budget must be positive");
    start = std::clamp<std::size_t>(start, 1, budget);
    std::vector<std::size_t> out;
    if (count < 2 || start == budget) return {budget};
    const double a = std::log(static_cast<double>(start));
    const double b = std::log(static_cast<double>(budget));
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        auto v = static_cast<std::size_t>(std::llround(std::exp(a + t * (b - a))));
        v = std::clamp(v, start, budget);
        if (out.empty() || v > out.back()) out.push_back(v);
    }
    if (out.back() != budget) out.push_back(budget);
    return out;
}

std::vector<CurvePoint> aggregate(const std::vector<ReplicationResult>& reps,
                                  const std::vector<std::size_t>& checkpoints, const std::vector<double>& weights) {
    std::vector<CurvePoint> out;
    const std::size_t R = reps.size();
    if (R == 0) return out;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double dR = static_cast<double>(R);
    auto binom_se = [&](double p) { return R > 1 ? std::sqrt(p * (1.0 - p) / dR) : nan; };
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const std::size_t n_ctx = reps.front().correct.at(k).size();
        std::vector<double> frac(n_ctx, 0.0);
        double joint = 0.0, sum_s = 0.0, sum_s2 = 0.0;
        for (const auto& r : reps) {
            const auto& row = r.correct.at(k);
            bool all = true;
            double s = 0.0;
            for (std::size_t c = 0; c < n_ctx; ++c) {
                frac[c] += row[c];
                all = all && row[c];
                s += weights[c] * row[c];
            }
            joint += all ? 1.0 : 0.0;
            sum_s += s;
            sum_s2 += s * s;
        }
        CurvePoint p;
        p.checkpoint = checkpoints[k];
        p.reps = R;
        p.pcs = joint / dR;
        p.pcs_se = binom_se(p.pcs);
        for (double& f : frac) f /= dR;
        const auto worst = std::min_element(frac.begin(), frac.end());
        p.pcsw = *worst;
        p.pcsw_se = binom_se(p.pcsw);
        p.pcse = sum_s / dR;
        if (R > 1) {
            const double var = std::max(0.0, (sum_s2 - dR * p.pcse * p.pcse) / (dR - 1.0));
            p.pcse_se = std::sqrt(var / dR);
        } else {
            p.pcse_se = nan;
        }
        out.push_back(p);
    }
    return out;
}

void finalize(ExperimentConfig& config) {
    if (!config.instance) throw ConfigError("experiment has no instance");
    if (config.policies.empty()) throw ConfigError("experiment has no policies");
    if (config.reps == 0) throw ConfigError("reps must be positive");
    if (config.parallelism == 0) throw ConfigError("parallelism must be positive");
    const ProblemInstance& inst = *config.instance;
    RunSettings& run = config.run;
    const std::size_t init_total = run.init_per_design * inst.num_designs();
    if (run.budget < init_total || run.budget == 0)
        throw ConfigError("budget " + std::to_string(run.budget) + " must be at least init_per_design x designs = " +
                          std::to_string(init_total));
    for (const auto& p : config.policies) {
        if ((p.kind == PolicyKind::BoldMC || p.kind == PolicyKind::AoaMC) && run.init_per_design < 2)
            throw ConfigError("policy '" + p.name + "' needs init_per_design >= 2");
        if (p.model == ModelKind::Weibull && inst.family() != Family::WeibullCensored)
            throw ConfigError("policy '" + p.name + "' uses the weibull model on a gaussian instance");
    }
    if (run.checkpoints.empty()) {
        run.checkpoints = default_checkpoints(std::max<std::size_t>(init_total, 1), run.budget);
    } else {
        for (std::size_t i = 0; i < run.checkpoints.size(); ++i) {
            const std::size_t t = run.checkpoints[i];
            if (t < init_total || t > run.budget)
                throw ConfigError("checkpoint " + std::to_string(t) + " outside [" + std::to_string(init_total) +
                                  ", " + std::to_string(run.budget) + "]");
            if (i > 0 && t <= run.checkpoints[i - 1]) throw ConfigError("checkpoints must be strictly increasing");
        }
    }
    const std::size_t n_ctx = inst.num_contexts();
    if (config.weights.empty()) {
        config.weights.assign(n_ctx, 1.0 / static_cast<double>(n_ctx));
    } else {
        if (config.weights.size() != n_ctx)
            throw ConfigError("weights must have one entry per context (" + std::to_string(n_ctx) + ")");
        double sum = 0.0;
        for (double w : config.weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weights must be finite and non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("weights must sum to 1");
    }
}

ExperimentResult run_experiment(const ExperimentConfig& config_in) {
    ExperimentConfig config = config_in;
    finalize(config);
    const auto t0 = std::chrono::steady_clock::now();
    const ProblemInstance& inst = *config.instance;
    const std::size_t n_pol = config.policies.size();
    const std::size_t R = config.reps;
    const std::size_t jobs = n_pol * R;

    std::vector<std::vector<ReplicationResult>> results(n_pol, std::vector<ReplicationResult>(R));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex err_mutex;
    std::size_t err_job = jobs;
    std::string err_message;

    auto worker = [&] {
        for (;;) {
            if (abort.load()) return;
            const std::size_t job = next.fetch_add(1);
            if (job >= jobs) return;
            const std::size_t p = job / R, r = job % R;
            try {
                results[p][r] = run_replication(inst, config.policies[p], config.run, replication_seed(config.seed, r));
            } catch (const std::exception& e) {
                std::lock_guard lock(err_mutex);
                if (job < err_job) {
                    err_job = job;
                    err_message = "policy '" + config.policies[p].name + "' replication " + std::to_string(r) +
                                  ": " + e.what();
                }
                abort.store(true);
            }
        }
    };
    const std::size_t threads = std::min(config.parallelism, jobs);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (err_job < jobs) throw RuntimeError(err_message);

    ExperimentResult out;
    out.curve.se_defined = R > 1;
    for (std::size_t p = 0; p < n_pol; ++p) {
        out.curve.policies.push_back(config.policies[p].name);
        out.curve.points.push_back(aggregate(results[p], config.run.checkpoints, config.weights));
        std::size_t fb = 0, ties = 0;
        std::vector<std::string> warns;
        for (std::size_t r = 0; r < R; ++r) {
            fb += results[p][r].fallbacks;
            ties += results[p][r].tie_events;
            for (const auto& w : results[p][r].warnings)
                if (warns.size() < 32) warns.push_back("replication " + std::to_string(r) + ": " + w);
        }
        out.fallbacks.push_back(fb);
        out.tie_events.push_back(ties);
        out.warnings.push_back(std::move(warns));
    }
    if (config.keep_replications) out.replications = std::move(results);
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    (void)inst;
    return out;
}

std::string curve_csv(const MetricsCurve& curve) {
    std::string s = "policy,checkpoint,pcs,pcs_se,pcsw,pcsw_se,pcse,pcse_se,reps\n";
    char buf[64];
    auto num = [&](double v) {
        if (std::isnan(v)) {
            s += "nan";
        } else {
            std::snprintf(buf, sizeof buf, "%.10g", v);
            s += buf;
        }
    };
    for (std::size_t p = 0; p < curve.policies.size(); ++p) {
        for (const auto& pt : curve.points[p]) {
            s += curve.policies[p];
            s += ',';
            s += std::to_string(pt.checkpoint);
            for (double v : {pt.pcs, pt.pcs_se, pt.pcsw, pt.pcsw_se, pt.pcse, pt.pcse_se}) {
                s += ',';
                num(v);
            }
            s += ',';
            s += std::to_string(pt.reps);
            s += '\n';
        }
    }
    return s;
}

void export_csv(const MetricsCurve& curve, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << curve_csv(curve);
    if (!f) throw IoError("failed writing '" + path + "'");
}

nlohmann::json run_metadata(const ExperimentConfig& config, const ExperimentResult& result,
                            const nlohmann::json& config_echo) {
    nlohmann::json j;
    j["version"] = CTTTS_VERSION;
    j["config"] = config_echo;
    j["seed"] = config.seed;
    j["reps"] = config.reps;
    j["budget"] = config.run.budget;
    j["parallelism"] = config.parallelism;
    j["wall_time_seconds"] = result.wall_seconds;
    j["se_defined"] = result.curve.se_defined;
    if (!result.curve.se_defined) j["se_note"] = "a single replication leaves standard errors undefined (nan)";
    nlohmann::json pols = nlohmann::json::array();
    for (std::size_t p = 0; p < result.curve.policies.size(); ++p) {
        pols.push_back({{"name", result.curve.policies[p]},
                        {"fallbacks", result.fallbacks[p]},
                        {"tie_events", result.tie_events[p]},
                        {"warnings", result.warnings[p]}});
    }
    j["policies"] = pols;
    j["instance"] = to_json(*config.instance);
    return j;
}

} // namespace cttts
