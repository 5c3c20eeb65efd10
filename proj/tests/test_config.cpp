#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "coadapt/config.hpp"

using namespace coadapt;
using nlohmann::json;

namespace {

ErrorCode code_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("config unexpectedly accepted: " << doc.dump());
  return ErrorCode::kIo;
}

std::string field_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    return e.field() + " " + e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const auto c = parse_config(json{{"env", "shared-autonomy"}});
  CHECK(c.env == "shared-autonomy");
  CHECK(c.horizon == 10);
  CHECK(c.seed == 0);
  CHECK_FALSE(c.prior.has_value());
  CHECK(c.condition == "mutual-adaptation");
  CHECK(c.planner.update.on_zero == ZeroLikelihoodPolicy::kRaise);
  CHECK(c.human.eps_plan == 0.01);
  CHECK(c.server.port == 8080);
}

TEST_CASE("every section is read") {
  const json doc = json::parse(R"({
    "env": "assembly", "params": {"items": 3}, "horizon": 8, "seed": 42,
    "human_model": {"model": "fixed", "k": 2, "alpha_grid": [0, 1], "eps_learn": 0.5, "eps_plan": 0.02,
                    "fixed_types": ["order-0-1-2"]},
    "planner": {"prior": [1], "belief_cap": 500, "zero_likelihood": "smooth", "condition": "no-adaptation"},
    "simulate": {"condition": "robot-adaptation-only", "episodes": 3, "type": 0},
    "population": {"conditions": ["mutual-adaptation"], "mixture": [1], "episodes": 10, "traces": false},
    "crosstrain": {"rounds": 2, "true_preference": 1, "human_noise": 0.2, "fit_noise": 0.3},
    "cluster": {"k": 2, "per_type": 5, "restarts": 3, "fit_noise": 0.2, "held_out": 7, "demos": "d.jsonl"},
    "server": {"host": "0.0.0.0", "port": 0, "idle_timeout_s": 60, "cors_origin": "http://x"}
  })");
  const auto c = parse_config(doc);
  CHECK(c.horizon == 8);
  CHECK(c.seed == 42);
  CHECK(c.human.kind == HumanModelKind::kFixed);
  CHECK(c.human.k == 2);
  CHECK(c.human.fixed_types == std::vector<std::string>{"order-0-1-2"});
  CHECK(c.prior == std::vector<double>{1.0});
  CHECK(c.planner.belief_cap == 500);
  CHECK(c.planner.update.on_zero == ZeroLikelihoodPolicy::kSmooth);
  CHECK(c.condition == "no-adaptation");
  CHECK(c.simulate.episodes == 3);
  CHECK(c.simulate.type == 0);
  CHECK_FALSE(c.population.keep_traces);
  CHECK(c.crosstrain.true_preference == 1);
  CHECK(c.cluster.held_out == 7);
  CHECK(c.cluster.demos == "d.jsonl");
  CHECK(c.server.cors_origin == "http://x");
  CHECK(build_model(c).types.size() == 1);
}

TEST_CASE("unknown keys are rejected at every level, naming the field") {
  CHECK(code_of(json{{"env", "assembly"}, {"horizn", 3}}) == ErrorCode::kConfig);
  CHECK(field_of(json{{"env", "assembly"}, {"horizn", 3}}).find("horizn") != std::string::npos);
  for (const char* section : {"human_model", "planner", "simulate", "population", "crosstrain", "cluster", "server"}) {
    CAPTURE(section);
    json doc{{"env", "assembly"}, {section, {{"bogus", 1}}}};
    CHECK(code_of(doc) == ErrorCode::kConfig);
    CHECK(field_of(doc).find(std::string(section) + ".bogus") != std::string::npos);
  }
}

TEST_CASE("invalid values") {
  CHECK(code_of(json::object()) == ErrorCode::kConfig);
  CHECK(code_of(json::array()) == ErrorCode::kConfig);
  CHECK(code_of(json{{"env", 3}}) == ErrorCode::kConfig);
  CHECK(code_of(json{{"env", "assembly"}, {"horizon", 0}}) == ErrorCode::kConfig);
  CHECK(code_of(json{{"env", "assembly"}, {"params", 1}}) == ErrorCode::kConfig);
  CHECK(code_of(json{{"env", "assembly"}, {"planner", {{"prior", "peaked"}}}}) == ErrorCode::kConfig);
  CHECK(code_of(json{{"env", "assembly"}, {"planner", {{"zero_likelihood", "ignore"}}}}) == ErrorCode::kConfig);
  CHECK(code_of(json{{"env", "assembly"}, {"planner", {{"condition", "telepathy"}}}}) == ErrorCode::kBadCondition);
  CHECK(code_of(json{{"env", "assembly"}, {"population", {{"conditions", {"x"}}}}}) == ErrorCode::kBadCondition);
  CHECK(code_of(json{{"env", "assembly"}, {"human_model", {{"model", "oracle"}}}}) == ErrorCode::kConfig);
  CHECK(code_of(json{{"env", "assembly"}, {"server", {{"port", 70000}}}}) == ErrorCode::kConfig);
  CHECK(code_of(json{{"env", "assembly"}, {"server", {{"idle_timeout_s", 0}}}}) == ErrorCode::kConfig);
}

TEST_CASE("prior length must match the type space") {
  const auto c = parse_config(json{{"env", "shared-autonomy"}, {"planner", {{"prior", {0.5, 0.5}}}}});
  const auto m = build_model(c);
  CHECK(m.types.size() == 5);
  CHECK_THROWS_AS(prior_for(c, m), Error);
}

TEST_CASE("overrides") {
  json doc{{"env", "shared-autonomy"}};
  apply_override(doc, "horizon=6");
  apply_override(doc, "planner.prior=[0.1,0.2,0.3,0.2,0.2]");
  apply_override(doc, "planner.zero_likelihood=smooth");
  apply_override(doc, "params.width=11");
  CHECK(doc["horizon"] == 6);
  CHECK(doc["planner"]["prior"].size() == 5);
  CHECK(doc["planner"]["zero_likelihood"] == "smooth");
  CHECK(doc["params"]["width"] == 11);
  CHECK_NOTHROW(parse_config(doc));
  CHECK_THROWS_AS(apply_override(doc, "horizon"), Error);
  CHECK_THROWS_AS(apply_override(doc, "=3"), Error);
  CHECK_THROWS_AS(apply_override(doc, "a..b=3"), Error);
  CHECK_THROWS_AS(apply_override(doc, "horizon.x=3"), Error);
}

TEST_CASE("config files") {
  const auto dir = std::filesystem::temp_directory_path() / "coadapt-test-config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << R"({"env": "table-carrying", "horizon": 4})";
    std::ofstream(dir / "bad.json") << R"({"env": "table-carrying",)";
  }
  CHECK(load_json_file((dir / "ok.json").string())["horizon"] == 4);
  try {
    load_json_file((dir / "bad.json").string());
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
  CHECK_THROWS_AS(load_json_file((dir / "missing.json").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config hash is FNV-1a of the normalized document") {
  auto fnv = [](const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
  };
  const json a = json::parse(R"({"env":"assembly","horizon":5})");
  const json b = json::parse(R"({"horizon":5,"env":"assembly"})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(std::stoull(config_hash(a), nullptr, 16) == fnv(a.dump()));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(json::parse(R"({"env":"assembly","horizon":6})")));
  // Reference vector for FNV-1a/64.
  CHECK(fnv("a") == 0xaf63dc4c8601ec8cULL);
}
