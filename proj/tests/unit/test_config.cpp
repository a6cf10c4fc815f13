#include <doctest.h>

#include <string>

#include "config.hpp"
#include "error.hpp"

using namespace cttts;
using nlohmann::json;

namespace {

const std::string kData = CTTTS_TEST_DATA;

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

template <class F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("JSON syntax errors carry a position") {
    CHECK_THROWS_AS(parse_json_text("{\n  \"a\": 1,\n  oops\n}", "cfg.json"), ParseError);
    const auto msg = error_of([] { parse_json_text("{\n  \"a\": 1,\n  oops\n}", "cfg.json"); });
    CHECK(contains(msg, "cfg.json:3:"));
    CHECK(contains(msg, "line 3"));
    CHECK_NOTHROW(parse_json_text("{\"a\": [1, 2]}", "ok"));
    CHECK_THROWS_AS(read_json_file(kData + "/does-not-exist.json"), ConfigError);
    CHECK_THROWS_AS(read_json_file(kData + "/malformed.json"), ParseError);
}

TEST_CASE("unknown keys are rejected by name") {
    const auto msg = error_of([] { require_keys(json{{"a", 1}, {"zz", 2}}, {"a", "b"}, "section"); });
    CHECK(contains(msg, "'zz'"));
    CHECK(contains(msg, "section"));
    CHECK_THROWS_AS(require_keys(json::array(), {"a"}, "section"), ConfigError);
}

TEST_CASE("instance sources") {
    const auto g = instance_from_source(json{{"generator", "gaussian"}, {"seed", 4}, {"contexts", 3}, {"designs", 5}, {"m", 2}}, "");
    CHECK(g.num_contexts() == 3);
    CHECK(g.num_designs() == 15);
    CHECK(g.context(0).m == 2);
    const auto w = instance_from_source(json{{"generator", "weibull"}, {"seed", 1}, {"tau", 120.0}}, "");
    CHECK(w.family() == Family::WeibullCensored);
    CHECK(w.tau() == 120.0);
    const auto inline_doc = instance_from_source(to_json(g), "");
    CHECK(to_json(inline_doc) == to_json(g));
    CHECK_THROWS_AS(instance_from_source(json{{"generator", "poisson"}}, ""), ConfigError);
    CHECK_THROWS_AS(instance_from_source(json{{"generator", "gaussian"}, {"colour", 1}}, ""), ConfigError);
    CHECK_THROWS_AS(instance_from_source(json{{"file", "nope.json"}}, kData), ConfigError);
}

TEST_CASE("policy entries") {
    const auto p = policy_from_json("tttsc-coin", Family::Gaussian);
    CHECK(p.kind == PolicyKind::TtttsCoin);
    CHECK(p.name == "tttsc-coin");
    const auto q = policy_from_json(json{{"name", "cw"}, {"kind", "tttsc-tune"}, {"model", "weibull"},
                                        {"tune_schedule", {100, 1000}}, {"fallback", "fewest"}},
                                    Family::WeibullCensored);
    CHECK(q.name == "cw");
    CHECK(q.model == ModelKind::Weibull);
    CHECK(q.fallback == CapFallback::Fewest);
    CHECK(q.tune_schedule == std::vector<std::size_t>{100, 1000});

    const auto msg = error_of([] { policy_from_json("ttts-magic", Family::Gaussian); });
    for (const char* k : {"tttsc-coin", "tttsc-tune", "ea", "boldmc", "aoamc"}) CHECK(contains(msg, k));
    CHECK_THROWS_AS(policy_from_json(json{{"kind", "ea"}, {"gamma", 1.5}}, Family::Gaussian), ConfigError);
    CHECK_THROWS_AS(policy_from_json(json{{"kind", "ea"}, {"name", "a,b"}}, Family::Gaussian), ConfigError);
    CHECK_THROWS_AS(policy_from_json(json{{"kind", "ea"}, {"tune_schedule", {5, 5}}}, Family::Gaussian), ConfigError);
}

TEST_CASE("experiment documents") {
    const auto j = read_json_file(kData + "/minimal_config.json");
    auto c = experiment_from_json(j, kData);
    CHECK(c.policies.size() == 3);
    CHECK(c.policies[2].name == "bold");
    CHECK(c.run.budget == 200);
    CHECK(c.run.init_per_design == 5);
    CHECK(c.reps == 6);
    CHECK(c.seed == 7);
    finalize(c);
    CHECK(c.run.checkpoints.back() == 200);
    CHECK(c.weights.size() == 2);

    auto dup = j;
    dup["policies"] = {"ea", "ea"};
    CHECK_THROWS_AS(experiment_from_json(dup, kData), ConfigError);
    auto extra = j;
    extra["budgett"] = 3;
    CHECK(contains(error_of([&] { experiment_from_json(extra, kData); }), "budgett"));
    auto neg = j;
    neg["reps"] = -2;
    CHECK_THROWS_AS(experiment_from_json(neg, kData), ConfigError);
    auto out = j;
    out["out"] = "result.csv";
    CHECK(experiment_from_json(out, kData).out == kData + "/result.csv");
    CHECK_THROWS_AS(experiment_from_json(read_json_file(kData + "/unknown_policy.json"), kData), ConfigError);
}
