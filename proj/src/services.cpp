// SPDX-License-Identifier: Apache-2.0
#include "services.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "allocation.hpp"
#include "config.hpp"
#include "error.hpp"
#include "posterior.hpp"
#include "rates.hpp"

namespace cttts {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nan_safe(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number_or_null(x));
    return a;
}

Theta theta_from(const json& j, std::string_view where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(std::string(where) + " must be a [mu, eta] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

ThetaBox box_from(const json& j) {
    try {
        return {j.at(0).at(0).get<double>(), j.at(0).at(1).get<double>(), j.at(1).at(0).get<double>(),
                j.at(1).at(1).get<double>()};
    } catch (const json::exception&) {
        throw ConfigError("theta_box must be [[mu_lo, mu_hi], [eta_lo, eta_hi]]");
    }
}

std::vector<double> gamma_vector(const json& g, std::size_t n) {
    if (g.is_number()) return std::vector<double>(n, g.get<double>());
    if (g.is_array() && g.size() == n) {
        std::vector<double> out;
        for (const auto& v : g) {
            if (!v.is_number()) throw ConfigError("gamma entries must be numbers");
            out.push_back(v.get<double>());
        }
        return out;
    }
    if (g.is_array() && g.size() == 1 && g[0].is_number()) return std::vector<double>(n, g[0].get<double>());
    throw ConfigError("gamma must be a number or an array with one entry per context");
}

} // namespace

json solve_allocation_json(const json& problem_in, const json& options, const std::string& base_dir) {
    json opts = options.is_null() ? json::object() : options;
    require_keys(opts, {"gamma_mode", "gamma", "method", "family", "weibull_nodes", "iterations"},
                 "solver options");
    const std::string mode = opts.value("gamma_mode", std::string("optimize"));
    if (mode != "optimize" && mode != "fixed")
        throw ConfigError("gamma_mode must be 'optimize' or 'fixed'");
    const std::string method = opts.value("method", std::string("auto"));
    if (method != "auto" && method != "best" && method != "topm")
        throw ConfigError("method must be 'auto', 'best' or 'topm'");

    StaticProblem problem;
    json gamma_spec = opts.contains("gamma") ? opts["gamma"] : json();
    json source;
    if (problem_in.is_object() && problem_in.value("kind", std::string()) == "rate-problem") {
        if (opts.contains("family")) throw ConfigError("'family' applies to instance inputs only");
        problem = static_problem_from_json(problem_in);
        if (gamma_spec.is_null() && problem_in.contains("gamma")) gamma_spec = problem_in["gamma"];
        source = "rate-problem";
    } else {
        const ProblemInstance inst = instance_from_source(problem_in, base_dir);
        RateFamily family = inst.family() == Family::WeibullCensored ? RateFamily::WeibullCensored
                                                                      : RateFamily::GaussianUnknownVar;
        if (opts.contains("family")) family = rate_family_from_string(opts["family"].get<std::string>());
        if (family == RateFamily::WeibullCensored && inst.family() != Family::WeibullCensored)
            throw ConfigError("weibull-censored rates need a weibull instance");
        if (family != RateFamily::WeibullCensored && inst.family() == Family::WeibullCensored)
            throw ConfigError("gaussian rates need a gaussian instance");
        int nodes = 257;
        if (opts.contains("weibull_nodes")) nodes = opts["weibull_nodes"].get<int>();
        if (nodes < 9) throw ConfigError("weibull_nodes must be at least 9");
        std::vector<Theta> thetas;
        for (const auto& d : inst.designs()) thetas.push_back(d.theta);
        problem = static_problem(inst, thetas, family, nodes);
        source = std::string(to_string(family));
    }

    const bool all_best = problem.all_best();
    const bool use_topm = method == "topm" || (method == "auto" && !all_best);
    if (method == "best" && !all_best) throw ConfigError("method 'best' needs exactly one preferred design per context");

    AllocationVector alloc;
    json residuals = json::object();
    if (use_topm) {
        if (mode == "fixed") throw ConfigError("fixed gamma applies to the best-design solver only");
        TopmOptions topt;
        if (opts.contains("iterations")) topt.iterations = opts["iterations"].get<int>();
        if (topt.iterations < 1) throw ConfigError("iterations must be positive");
        alloc = solve_topm_allocation(problem, topt);
        residuals["balance"] = number_or_null(balance_residual_topm(alloc, problem));
    } else {
        if (mode == "fixed") {
            if (gamma_spec.is_null()) throw ConfigError("fixed gamma mode needs 'gamma'");
            alloc = solve_fixed_gamma(problem, gamma_vector(gamma_spec, problem.contexts.size()));
        } else {
            alloc = optimize_gamma(problem);
        }
        const KktReport k = kkt_residual_best(alloc, problem);
        residuals["gamma_stationarity"] = nan_safe(k.eq9);
        residuals["gamma_stationarity_max"] = number_or_null(k.eq9_max);
        residuals["context_balance"] = number_or_null(k.eq10_spread);
        residuals["kinks"] = k.kinks;
        residuals["balance"] = number_or_null(balance_residual_topm(alloc, problem));
    }
    json out = to_json(alloc, problem);
    out["solver"] = use_topm ? "topm" : "best";
    out["gamma_mode"] = mode;
    out["source"] = source;
    out["alpha"] = alloc.alpha;
    out["gamma"] = alloc.gamma;
    out["residuals"] = residuals;
    return out;
}

json rates_json(const json& request) {
    require_keys(request, {"op", "family", "psi", "theta", "tau", "theta_box", "method"}, "rates request");
    const std::string op = request.value("op", std::string("rate"));
    if (!request.contains("theta") || !request["theta"].is_array() || request["theta"].size() != 2)
        throw ConfigError("rates request needs 'theta': [[mu, eta], [mu, eta]]");
    const Theta a = theta_from(request["theta"][0], "theta[0]");
    const Theta b = theta_from(request["theta"][1], "theta[1]");
    const double tau = request.contains("tau") && !request["tau"].is_null() ? request["tau"].get<double>()
                                                                           : std::numeric_limits<double>::infinity();
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    json out{{"op", op}};

    if (op == "kl") {
        const std::string fam = request.value("family", std::string("gaussian"));
        if (request.contains("psi") || request.contains("method"))
            throw ConfigError("'psi' and 'method' apply to op 'rate' only");
        double v = 0.0;
        if (fam == "gaussian" || fam == "gaussian-known-var") {
            if (!(a.eta > 0.0) || !(b.eta > 0.0)) throw ConfigError("gaussian variances must be positive");
            v = kl_gaussian(a, b);
        } else if (fam == "weibull" || fam == "weibull-censored") {
            if (!(a.eta > 0.0) || !(b.eta > 0.0) || !(a.mu > 0.0) || !(b.mu > 0.0))
                throw ConfigError("weibull means and shapes must be positive");
            v = kl_weibull_censored(a, b, tau);
        } else {
            throw ConfigError("unknown KL family '" + fam + "' (valid: gaussian, weibull-censored)");
        }
        out["family"] = fam;
        out["value"] = v;
        return out;
    }
    if (op != "rate") throw ConfigError("unknown op '" + op + "' (valid: rate, kl)");

    const RateFamily family = rate_family_from_string(request.value("family", std::string("gaussian-known-var")));
    if (!request.contains("psi") || !request["psi"].is_array() || request["psi"].size() != 2)
        throw ConfigError("rate request needs 'psi': [psi_d, psi_d']");
    const double x = request["psi"][0].get<double>();
    const double y = request["psi"][1].get<double>();
    if (!(x >= 0.0) || !(y >= 0.0)) throw ConfigError("psi entries must be non-negative");
    const std::string method = request.value("method", std::string("exact"));
    if (method != "exact" && method != "generic") throw ConfigError("method must be 'exact' or 'generic'");
    ThetaBox box;
    if (request.contains("theta_box")) box = box_from(request["theta_box"]);
    else if (family == RateFamily::WeibullCensored) box = {0.0, 200.0, 0.0, 20.0};
    if (family == RateFamily::WeibullCensored && !std::isfinite(tau) && method == "exact")
        throw ConfigError("weibull-censored rates need a finite 'tau'");

    RateValue r;
    if (method == "generic" || family == RateFamily::WeibullCensored) {
        r = rate_generic(x, y, a, b, family, tau, box);
    } else if (family == RateFamily::GaussianKnownVar) {
        if (!(a.eta > 0.0) || !(b.eta > 0.0)) throw ConfigError("gaussian variances must be positive");
        r.value = rate_gaussian_known_var(x, y, a.mu, b.mu, a.eta, b.eta);
        const double wa = x / a.eta, wb = y / b.eta;
        r.crossing_mu = wa + wb > 0.0 ? (wa * a.mu + wb * b.mu) / (wa + wb) : std::numeric_limits<double>::quiet_NaN();
    } else {
        if (!(a.mu > b.mu)) throw ConfigError("rate needs mu_d > mu_d'");
        r = rate_gaussian_unknown_var(x, y, a, b);
    }
    out["family"] = std::string(to_string(family));
    out["method"] = method;
    out["value"] = r.value;
    out["crossing_mu"] = number_or_null(r.crossing_mu);
    return out;
}

json policy_prob_json(const json& request) {
    require_keys(request, {"pi", "gamma"}, "policy-prob request");
    if (!request.contains("pi") || !request["pi"].is_array()) throw ConfigError("policy-prob needs 'pi'");
    std::vector<std::vector<double>> pi;
    try {
        pi = request["pi"].get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
        throw ConfigError("'pi' must be an array of number arrays");
    }
    std::vector<double> gamma{0.5};
    if (request.contains("gamma")) gamma = gamma_vector(request["gamma"], pi.size());
    const PolicyProbabilities p = analytic_policy_prob(pi, gamma);
    return {{"psi", p.psi}, {"alpha", p.alpha}, {"beta", p.beta}};
}

json run_experiment_json(const ExperimentConfig& config, const json& config_echo, const std::string& csv_path,
                         const std::string& meta_path) {
    ExperimentConfig c = config;
    finalize(c);
    const ExperimentResult result = run_experiment(c);
    if (!csv_path.empty()) export_csv(result.curve, csv_path);
    const json meta = run_metadata(c, result, config_echo);
    if (!meta_path.empty()) {
        std::ofstream f(meta_path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + meta_path + "' for writing");
        f << meta.dump(2) << '\n';
        if (!f) throw IoError("failed writing '" + meta_path + "'");
    }
    json summary{{"csv", csv_path},
                 {"metadata", meta_path},
                 {"rows", c.policies.size() * c.run.checkpoints.size()},
                 {"wall_time_seconds", result.wall_seconds}};
    json finals = json::array();
    for (std::size_t p = 0; p < result.curve.policies.size(); ++p) {
        const CurvePoint& last = result.curve.points[p].back();
        finals.push_back({{"policy", result.curve.policies[p]},
                          {"checkpoint", last.checkpoint},
                          {"pcs", last.pcs},
                          {"pcsw", last.pcsw},
                          {"pcse", last.pcse},
                          {"fallbacks", result.fallbacks[p]}});
    }
    summary["final"] = finals;
    return summary;
}

} // namespace cttts
