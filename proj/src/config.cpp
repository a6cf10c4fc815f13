// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace cttts {

using nlohmann::json;

json parse_json_text(std::string_view text, std::string_view source) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        // Byte offset is 1-based and points just past the offending character.
        const std::size_t pos = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < pos; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string what = e.what();
        if (auto k = what.find("syntax error"); k != std::string::npos) what = what.substr(k);
        throw ParseError(std::string(source) + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": invalid JSON at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + what);
    }
}

json read_json_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_json_text(ss.str(), path);
}

void require_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            std::string list;
            for (auto a : allowed) {
                if (!list.empty()) list += ", ";
                list += a;
            }
            throw ConfigError("unknown key '" + key + "' in " + std::string(where) + " (allowed: " + list + ")");
        }
    }
}

namespace {

template <class T>
T get_as(const json& j, std::string_view key, std::string_view where) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("invalid value for '" + std::string(key) + "' in " + std::string(where));
    }
}

std::size_t get_count(const json& j, std::string_view key, std::string_view where) {
    if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<long long>() < 0))
        throw ConfigError("'" + std::string(key) + "' in " + std::string(where) + " must be a non-negative integer");
    return j.get<std::size_t>();
}

std::uint64_t get_seed(const json& j, std::string_view where) {
    if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<long long>() < 0))
        throw ConfigError("'seed' in " + std::string(where) + " must be a non-negative integer");
    return j.get<std::uint64_t>();
}

ModelKind model_from_string(std::string_view s) {
    if (s == "gaussian" || s == "normal-gamma") return ModelKind::Gaussian;
    if (s == "weibull" || s == "weibull-grid") return ModelKind::Weibull;
    throw ConfigError("unknown model '" + std::string(s) + "' (valid: gaussian, weibull)");
}

} // namespace

ProblemInstance instance_from_source(const json& spec, const std::string& base_dir) {
    if (!spec.is_object()) throw ConfigError("'instance' must be a JSON object");
    if (spec.contains("file")) {
        require_keys(spec, {"file"}, "instance");
        std::filesystem::path p = get_as<std::string>(spec["file"], "file", "instance");
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        return instance_from_json(read_json_file(p.string()));
    }
    if (spec.contains("generator")) {
        const auto gen = get_as<std::string>(spec["generator"], "generator", "instance");
        if (gen == "gaussian") {
            require_keys(spec, {"generator", "seed", "contexts", "designs", "m"}, "instance");
            const std::uint64_t seed = spec.contains("seed") ? get_seed(spec["seed"], "instance") : 1;
            const std::size_t nc = spec.contains("contexts") ? get_count(spec["contexts"], "contexts", "instance") : 10;
            const std::size_t nd = spec.contains("designs") ? get_count(spec["designs"], "designs", "instance") : 10;
            const std::size_t m = spec.contains("m") ? get_count(spec["m"], "m", "instance") : 1;
            return generate_gaussian_instance(seed, nc, nd, m);
        }
        if (gen == "weibull") {
            require_keys(spec, {"generator", "seed", "tau"}, "instance");
            const std::uint64_t seed = spec.contains("seed") ? get_seed(spec["seed"], "instance") : 1;
            const double tau = spec.contains("tau") ? get_as<double>(spec["tau"], "tau", "instance") : kDefaultWeibullTau;
            return generate_weibull_instance(seed, tau);
        }
        throw ConfigError("unknown generator '" + gen + "' (valid: gaussian, weibull)");
    }
    return instance_from_json(spec);
}

PolicyConfig policy_from_json(const json& j, Family family) {
    PolicyConfig p;
    if (j.is_string()) {
        p.kind = policy_kind_from_string(j.get<std::string>());
        p.name = j.get<std::string>();
        p.model = default_model(p.kind, family);
        return p;
    }
    require_keys(j,
                 {"name", "kind", "gamma", "model", "tune_schedule", "resample_cap", "fallback", "conditional_probe",
                  "tune_weibull_nodes"},
                 "policy");
    if (!j.contains("kind")) throw ConfigError("policy entry needs a 'kind' (valid: " + valid_policy_kinds() + ")");
    const auto kind = get_as<std::string>(j["kind"], "kind", "policy");
    p.kind = policy_kind_from_string(kind);
    p.name = j.contains("name") ? get_as<std::string>(j["name"], "name", "policy") : kind;
    if (p.name.empty() || p.name.find_first_of(",\"\r\n") != std::string::npos)
        throw ConfigError("policy name '" + p.name + "' must be non-empty without commas, quotes or newlines");
    if (j.contains("gamma")) {
        p.gamma = get_as<double>(j["gamma"], "gamma", "policy");
        if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw ConfigError("policy gamma must lie in (0, 1)");
    }
    p.model = j.contains("model") ? model_from_string(get_as<std::string>(j["model"], "model", "policy"))
                                  : default_model(p.kind, family);
    if (j.contains("tune_schedule")) {
        if (!j["tune_schedule"].is_array()) throw ConfigError("'tune_schedule' must be an array");
        p.tune_schedule.clear();
        for (const auto& v : j["tune_schedule"]) p.tune_schedule.push_back(get_count(v, "tune_schedule", "policy"));
        if (std::adjacent_find(p.tune_schedule.begin(), p.tune_schedule.end(), std::greater_equal<>()) !=
            p.tune_schedule.end())
            throw ConfigError("'tune_schedule' must be increasing");
    }
    if (j.contains("resample_cap")) {
        p.resample_cap = get_count(j["resample_cap"], "resample_cap", "policy");
        if (p.resample_cap == 0) throw ConfigError("'resample_cap' must be positive");
    }
    if (j.contains("fallback")) p.fallback = cap_fallback_from_string(get_as<std::string>(j["fallback"], "fallback", "policy"));
    if (j.contains("conditional_probe")) {
        p.conditional_probe = get_count(j["conditional_probe"], "conditional_probe", "policy");
        if (p.conditional_probe == 0) throw ConfigError("'conditional_probe' must be positive");
    }
    if (j.contains("tune_weibull_nodes")) {
        const std::size_t nodes = get_count(j["tune_weibull_nodes"], "tune_weibull_nodes", "policy");
        if (nodes < 9 || nodes > 4097) throw ConfigError("'tune_weibull_nodes' must be in [9, 4097]");
        p.tune_weibull_nodes = static_cast<int>(nodes);
    }
    return p;
}

ExperimentConfig experiment_from_json(const json& j, const std::string& base_dir) {
    require_keys(j,
                 {"description", "instance", "policies", "budget", "init_per_design", "checkpoints", "reps", "seed",
                  "weights", "parallelism", "selection", "bayes_draws", "out"},
                 "config");
    ExperimentConfig c;
    if (!j.contains("instance")) throw ConfigError("config needs an 'instance'");
    c.instance = std::make_shared<const ProblemInstance>(instance_from_source(j["instance"], base_dir));
    c.instance_spec = j["instance"];
    if (!j.contains("policies") || !j["policies"].is_array())
        throw ConfigError("config needs a 'policies' array (valid kinds: " + valid_policy_kinds() + ")");
    for (const auto& pj : j["policies"]) c.policies.push_back(policy_from_json(pj, c.instance->family()));
    for (std::size_t a = 0; a < c.policies.size(); ++a)
        for (std::size_t b = a + 1; b < c.policies.size(); ++b)
            if (c.policies[a].name == c.policies[b].name)
                throw ConfigError("duplicate policy name '" + c.policies[a].name + "'");
    if (!j.contains("budget")) throw ConfigError("config needs a 'budget'");
    c.run.budget = get_count(j["budget"], "budget", "config");
    if (j.contains("init_per_design")) c.run.init_per_design = get_count(j["init_per_design"], "init_per_design", "config");
    if (j.contains("checkpoints")) {
        if (!j["checkpoints"].is_array()) throw ConfigError("'checkpoints' must be an array");
        for (const auto& v : j["checkpoints"]) c.run.checkpoints.push_back(get_count(v, "checkpoints", "config"));
    }
    if (j.contains("reps")) c.reps = get_count(j["reps"], "reps", "config");
    if (j.contains("seed")) c.seed = get_seed(j["seed"], "config");
    if (j.contains("weights")) c.weights = get_as<std::vector<double>>(j["weights"], "weights", "config");
    if (j.contains("parallelism")) c.parallelism = get_count(j["parallelism"], "parallelism", "config");
    if (j.contains("selection"))
        c.run.selection = selection_mode_from_string(get_as<std::string>(j["selection"], "selection", "config"));
    if (j.contains("bayes_draws")) {
        c.run.bayes_draws = get_count(j["bayes_draws"], "bayes_draws", "config");
        if (c.run.bayes_draws == 0) throw ConfigError("'bayes_draws' must be positive");
    }
    if (j.contains("out")) {
        std::filesystem::path p = get_as<std::string>(j["out"], "out", "config");
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        c.out = p.string();
    }
    return c;
}

} // namespace cttts
