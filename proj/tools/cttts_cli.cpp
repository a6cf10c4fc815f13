// SPDX-License-Identifier: Apache-2.0
// Command-line front end over the cttts C API.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cttts/cttts.h"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int exit_code(cttts_status s) {
    switch (s) {
    case CTTTS_OK: return 0;
    case CTTTS_INVALID_ARGUMENT:
    case CTTTS_CONFIG:
    case CTTTS_PARSE: return kExitConfig;
    default: return kExitRuntime;
    }
}

int fail(cttts_status s) {
    std::cerr << "error: " << cttts_last_error() << '\n';
    return exit_code(s);
}

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Emits a result string to stdout or to `out` when given.
int emit(cttts_string* s, const std::string& out) {
    std::string text(cttts_string_data(s), cttts_string_size(s));
    cttts_string_free(s);
    text += '\n';
    if (out.empty()) {
        std::cout << text;
        return 0;
    }
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text)) {
        std::cerr << "error: cannot write '" << out << "'\n";
        return kExitRuntime;
    }
    return 0;
}

std::string dir_of(const std::string& path) {
    return std::filesystem::absolute(path).parent_path().string();
}

struct RunArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps, budget, parallelism;
};

int cmd_run(const RunArgs& a) {
    const auto text = read_file(a.config);
    if (!text) {
        std::cerr << "error: cannot read config '" << a.config << "'\n";
        return kExitConfig;
    }
    cttts_experiment* exp = nullptr;
    if (auto s = cttts_experiment_from_json(text->c_str(), dir_of(a.config).c_str(), &exp)) return fail(s);
    std::unique_ptr<cttts_experiment, void (*)(cttts_experiment*)> guard(exp, cttts_experiment_free);

    std::optional<std::size_t> threads = a.parallelism;
    if (const char* env = std::getenv("CTTTS_THREADS"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (*end != '\0' || v == 0) {
            std::cerr << "error: CTTTS_THREADS must be a positive integer, got '" << env << "'\n";
            return kExitConfig;
        }
        threads = static_cast<std::size_t>(v);
    }
    if (a.seed)
        if (auto s = cttts_experiment_set_seed(exp, *a.seed)) return fail(s);
    if (a.reps)
        if (auto s = cttts_experiment_set_reps(exp, *a.reps)) return fail(s);
    if (a.budget)
        if (auto s = cttts_experiment_set_budget(exp, *a.budget)) return fail(s);
    if (threads)
        if (auto s = cttts_experiment_set_parallelism(exp, *threads)) return fail(s);

    const std::string csv = !a.out.empty() ? a.out : std::string(cttts_experiment_out(exp));
    if (csv.empty()) {
        std::cerr << "error: no output path (use --out or the config key 'out')\n";
        return kExitConfig;
    }
    const std::string meta = csv + ".meta.json";
    cttts_string* summary = nullptr;
    if (auto s = cttts_experiment_run(exp, csv.c_str(), meta.c_str(), &summary)) return fail(s);
    return emit(summary, "");
}

std::vector<double> split_numbers(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(v);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contextual top-two Thompson sampling: experiments, static allocations and rates"};
    app.set_version_flag("--version", std::string(cttts_version()));
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a macro-replication experiment and write the PCS curve CSV");
    run_cmd->add_option("--config", run.config, "Experiment configuration (JSON)")->required();
    run_cmd->add_option("--out", run.out, "CSV output path (metadata goes to <out>.meta.json)");
    run_cmd->add_option("--seed", run.seed, "Base seed");
    run_cmd->add_option("--reps", run.reps, "Macro replications")->check(CLI::PositiveNumber);
    run_cmd->add_option("--budget", run.budget, "Sampling budget T")->check(CLI::PositiveNumber);
    run_cmd->add_option("--parallelism", run.parallelism, "Worker threads (CTTTS_THREADS overrides)")
        ->check(CLI::PositiveNumber);

    std::string solve_config, solve_out, gamma_mode = "optimize", method = "auto", family, gamma_list;
    std::optional<int> weibull_nodes, iterations;
    auto* solve_cmd = app.add_subcommand("solve-allocation", "Solve the static allocation problem");
    solve_cmd->add_option("--config,--instance", solve_config,
                          "Instance, instance generator spec or rate-problem document (JSON)")
        ->required();
    solve_cmd->add_option("--gamma-mode", gamma_mode, "optimize or fixed")
        ->check(CLI::IsMember({"optimize", "fixed"}));
    solve_cmd->add_option("--gamma", gamma_list, "Fixed gamma: one value or comma-separated per context");
    solve_cmd->add_option("--method", method, "auto, best or topm")->check(CLI::IsMember({"auto", "best", "topm"}));
    solve_cmd->add_option("--family", family, "Rate family for instance inputs");
    solve_cmd->add_option("--weibull-nodes", weibull_nodes, "Crossing-value nodes of tabulated Weibull rates");
    solve_cmd->add_option("--iterations", iterations, "Top-m solver iterations");
    solve_cmd->add_option("--out", solve_out, "Write the JSON result here instead of stdout");

    std::string rates_config, rates_out, op = "rate", rate_family = "gaussian-known-var", psi, mu, eta, rate_method;
    std::optional<double> tau;
    auto* rates_cmd = app.add_subcommand("rates", "Evaluate a pair rate or a KL divergence");
    rates_cmd->add_option("--config", rates_config, "Request document (JSON); replaces the flags below");
    rates_cmd->add_option("--op", op, "rate or kl")->check(CLI::IsMember({"rate", "kl"}));
    rates_cmd->add_option("--family", rate_family,
                          "gaussian-known-var, gaussian-unknown-var or weibull-censored (kl: gaussian, "
                          "weibull-censored)");
    rates_cmd->add_option("--psi", psi, "psi_d,psi_d'");
    rates_cmd->add_option("--mu", mu, "mu_d,mu_d'");
    rates_cmd->add_option("--eta", eta, "Variances (gaussian) or shapes (weibull): eta_d,eta_d'");
    rates_cmd->add_option("--tau", tau, "Censoring time (weibull)");
    rates_cmd->add_option("--method", rate_method, "exact or generic");
    rates_cmd->add_option("--out", rates_out, "Write the JSON result here instead of stdout");

    std::string pp_config, pp_out, pp_pi, pp_gamma;
    auto* pp_cmd = app.add_subcommand("policy-prob", "Exact top-two step probabilities from best-design probabilities");
    pp_cmd->add_option("--config", pp_config, "Request document {\"pi\": [[...]], \"gamma\": [...]}");
    pp_cmd->add_option("--pi", pp_pi, "Per-context probabilities: 'a,b,c;d,e,f'");
    pp_cmd->add_option("--gamma", pp_gamma, "One value or comma-separated per context");
    pp_cmd->add_option("--out", pp_out, "Write the JSON result here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run_cmd) return cmd_run(run);

        if (*solve_cmd) {
            const auto text = read_file(solve_config);
            if (!text) {
                std::cerr << "error: cannot read '" << solve_config << "'\n";
                return kExitConfig;
            }
            nlohmann::json opts{{"gamma_mode", gamma_mode}, {"method", method}};
            if (!gamma_list.empty()) {
                const auto g = split_numbers(gamma_list);
                opts["gamma"] = g.size() == 1 ? nlohmann::json(g[0]) : nlohmann::json(g);
            }
            if (!family.empty()) opts["family"] = family;
            if (weibull_nodes) opts["weibull_nodes"] = *weibull_nodes;
            if (iterations) opts["iterations"] = *iterations;
            cttts_string* out = nullptr;
            if (auto s = cttts_solve_allocation(text->c_str(), opts.dump().c_str(), dir_of(solve_config).c_str(), &out))
                return fail(s);
            return emit(out, solve_out);
        }

        if (*rates_cmd) {
            std::string request;
            if (!rates_config.empty()) {
                const auto text = read_file(rates_config);
                if (!text) {
                    std::cerr << "error: cannot read '" << rates_config << "'\n";
                    return kExitConfig;
                }
                request = *text;
            } else {
                const auto m = split_numbers(mu), e = split_numbers(eta);
                if (m.size() != 2 || e.size() != 2) {
                    std::cerr << "error: --mu and --eta need two comma-separated values\n";
                    return kExitConfig;
                }
                nlohmann::json r{{"op", op},
                                 {"family", rate_family},
                                 {"theta", {{m[0], e[0]}, {m[1], e[1]}}}};
                if (op == "rate") {
                    const auto p = split_numbers(psi);
                    if (p.size() != 2) {
                        std::cerr << "error: --psi needs two comma-separated values\n";
                        return kExitConfig;
                    }
                    r["psi"] = p;
                    if (!rate_method.empty()) r["method"] = rate_method;
                }
                if (tau) r["tau"] = *tau;
                request = r.dump();
            }
            cttts_string* out = nullptr;
            if (auto s = cttts_rates(request.c_str(), &out)) return fail(s);
            return emit(out, rates_out);
        }

        if (*pp_cmd) {
            std::string request;
            if (!pp_config.empty()) {
                const auto text = read_file(pp_config);
                if (!text) {
                    std::cerr << "error: cannot read '" << pp_config << "'\n";
                    return kExitConfig;
                }
                request = *text;
            } else {
                nlohmann::json r;
                r["pi"] = nlohmann::json::array();
                std::stringstream ss(pp_pi);
                std::string row;
                while (std::getline(ss, row, ';')) r["pi"].push_back(split_numbers(row));
                if (!pp_gamma.empty()) r["gamma"] = split_numbers(pp_gamma);
                request = r.dump();
            }
            cttts_string* out = nullptr;
            if (auto s = cttts_policy_prob(request.c_str(), &out)) return fail(s);
            return emit(out, pp_out);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: not a number: '" << e.what() << "'\n";
        return kExitConfig;
    } catch (const std::out_of_range&) {
        std::cerr << "error: number out of range\n";
        return kExitConfig;
    }
    return 0;
}
