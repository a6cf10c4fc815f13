// SPDX-License-Identifier: Apache-2.0
#include "cttts/cttts.h"

#include <memory>
#include <new>
#include <string>

#include "config.hpp"
#include "error.hpp"
#include "harness.hpp"
#include "instance.hpp"
#include "services.hpp"

struct cttts_instance {
    std::shared_ptr<const cttts::ProblemInstance> inst;
};

struct cttts_experiment {
    cttts::ExperimentConfig config;
    nlohmann::json echo;
};

struct cttts_string {
    std::string text;
};

namespace {

thread_local std::string g_last_error;

template <class F>
cttts_status guarded(F&& f) {
    g_last_error.clear();
    try {
        f();
        return CTTTS_OK;
    } catch (const cttts::ParseError& e) {
        g_last_error = e.what();
        return CTTTS_PARSE;
    } catch (const cttts::ConfigError& e) {
        g_last_error = e.what();
        return CTTTS_CONFIG;
    } catch (const cttts::IoError& e) {
        g_last_error = e.what();
        return CTTTS_IO;
    } catch (const cttts::RuntimeError& e) {
        g_last_error = e.what();
        return CTTTS_RUNTIME;
    } catch (const nlohmann::json::exception& e) {
        g_last_error = std::string("invalid JSON value: ") + e.what();
        return CTTTS_CONFIG;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CTTTS_RUNTIME;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CTTTS_NUMERIC;
    } catch (...) {
        g_last_error = "unknown error";
        return CTTTS_NUMERIC;
    }
}

cttts_status null_arg(const char* what) {
    g_last_error = std::string("null argument: ") + what;
    return CTTTS_INVALID_ARGUMENT;
}

cttts_string* make_string(const nlohmann::json& j) { return new cttts_string{j.dump(2)}; }

} // namespace

extern "C" {

const char* cttts_version(void) { return CTTTS_VERSION; }

const char* cttts_last_error(void) { return g_last_error.c_str(); }

const char* cttts_string_data(const cttts_string* s) { return s ? s->text.c_str() : ""; }
size_t cttts_string_size(const cttts_string* s) { return s ? s->text.size() : 0; }
void cttts_string_free(cttts_string* s) { delete s; }

cttts_status cttts_instance_from_json(const char* json, cttts_instance** out) {
    if (!json) return null_arg("json");
    if (!out) return null_arg("out");
    return guarded([&] {
        auto j = cttts::parse_json_text(json, "instance");
        *out = new cttts_instance{std::make_shared<const cttts::ProblemInstance>(cttts::instance_from_json(j))};
    });
}

cttts_status cttts_instance_generate_gaussian(uint64_t seed, size_t contexts, size_t designs, size_t m,
                                              cttts_instance** out) {
    if (!out) return null_arg("out");
    return guarded([&] {
        *out = new cttts_instance{std::make_shared<const cttts::ProblemInstance>(
            cttts::generate_gaussian_instance(seed, contexts, designs, m))};
    });
}

cttts_status cttts_instance_generate_weibull(uint64_t seed, double tau, cttts_instance** out) {
    if (!out) return null_arg("out");
    return guarded([&] {
        *out = new cttts_instance{
            std::make_shared<const cttts::ProblemInstance>(cttts::generate_weibull_instance(seed, tau))};
    });
}

cttts_status cttts_instance_to_json(const cttts_instance* inst, cttts_string** out) {
    if (!inst) return null_arg("instance");
    if (!out) return null_arg("out");
    return guarded([&] { *out = make_string(cttts::to_json(*inst->inst)); });
}

size_t cttts_instance_num_contexts(const cttts_instance* inst) { return inst ? inst->inst->num_contexts() : 0; }
size_t cttts_instance_num_designs(const cttts_instance* inst) { return inst ? inst->inst->num_designs() : 0; }
void cttts_instance_free(cttts_instance* inst) { delete inst; }

cttts_status cttts_experiment_from_json(const char* json, const char* base_dir, cttts_experiment** out) {
    if (!json) return null_arg("json");
    if (!out) return null_arg("out");
    return guarded([&] {
        auto j = cttts::parse_json_text(json, "config");
        auto exp = std::make_unique<cttts_experiment>();
        exp->config = cttts::experiment_from_json(j, base_dir ? base_dir : "");
        exp->echo = std::move(j);
        *out = exp.release();
    });
}

cttts_status cttts_experiment_set_reps(cttts_experiment* exp, size_t reps) {
    if (!exp) return null_arg("experiment");
    if (reps == 0) {
        g_last_error = "reps must be positive";
        return CTTTS_CONFIG;
    }
    exp->config.reps = reps;
    exp->echo["reps"] = reps;
    return CTTTS_OK;
}

cttts_status cttts_experiment_set_budget(cttts_experiment* exp, size_t budget) {
    if (!exp) return null_arg("experiment");
    if (budget == 0) {
        g_last_error = "budget must be positive";
        return CTTTS_CONFIG;
    }
    exp->config.run.budget = budget;
    exp->echo["budget"] = budget;
    return CTTTS_OK;
}

cttts_status cttts_experiment_set_seed(cttts_experiment* exp, uint64_t seed) {
    if (!exp) return null_arg("experiment");
    exp->config.seed = seed;
    exp->echo["seed"] = seed;
    return CTTTS_OK;
}

cttts_status cttts_experiment_set_parallelism(cttts_experiment* exp, size_t threads) {
    if (!exp) return null_arg("experiment");
    if (threads == 0) {
        g_last_error = "parallelism must be positive";
        return CTTTS_CONFIG;
    }
    exp->config.parallelism = threads;
    return CTTTS_OK;
}

const char* cttts_experiment_out(const cttts_experiment* exp) { return exp ? exp->config.out.c_str() : ""; }

cttts_status cttts_experiment_run(cttts_experiment* exp, const char* csv_path, const char* meta_path,
                                  cttts_string** summary) {
    if (!exp) return null_arg("experiment");
    if (!csv_path || !*csv_path) return null_arg("csv_path");
    return guarded([&] {
        auto s = cttts::run_experiment_json(exp->config, exp->echo, csv_path, meta_path ? meta_path : "");
        if (summary) *summary = make_string(s);
    });
}

void cttts_experiment_free(cttts_experiment* exp) { delete exp; }

cttts_status cttts_solve_allocation(const char* problem_json, const char* options_json, const char* base_dir,
                                    cttts_string** out) {
    if (!problem_json) return null_arg("problem_json");
    if (!out) return null_arg("out");
    return guarded([&] {
        auto problem = cttts::parse_json_text(problem_json, "problem");
        nlohmann::json options = options_json ? cttts::parse_json_text(options_json, "options") : nlohmann::json();
        *out = make_string(cttts::solve_allocation_json(problem, options, base_dir ? base_dir : ""));
    });
}

cttts_status cttts_rates(const char* request_json, cttts_string** out) {
    if (!request_json) return null_arg("request_json");
    if (!out) return null_arg("out");
    return guarded([&] { *out = make_string(cttts::rates_json(cttts::parse_json_text(request_json, "request"))); });
}

cttts_status cttts_policy_prob(const char* request_json, cttts_string** out) {
    if (!request_json) return null_arg("request_json");
    if (!out) return null_arg("out");
    return guarded(
        [&] { *out = make_string(cttts::policy_prob_json(cttts::parse_json_text(request_json, "request"))); });
}

} // extern "C"
