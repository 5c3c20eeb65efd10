// Exercises the shared library through the public C header only.

#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "coadapt.h"

using nlohmann::json;

namespace {

struct Owned {
  char* s = nullptr;
  ~Owned() { coadapt_string_free(s); }
  json parse() const { return json::parse(s); }
};

coadapt_config* parse_config(const char* text) {
  coadapt_config* c = nullptr;
  REQUIRE(coadapt_config_parse(text, &c) == COADAPT_OK);
  return c;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(coadapt_version()) == "1.0.0");
  CHECK(std::string(coadapt_status_name(COADAPT_OK)) == "OK");
  CHECK(std::string(coadapt_status_name(COADAPT_ERR_BELIEF_EXPLOSION)) == "BeliefExplosion");
  CHECK(std::string(coadapt_status_name(COADAPT_ERR_INVALID_ARGUMENT)) == "InvalidArgument");
}

TEST_CASE("null arguments are reported, not dereferenced") {
  coadapt_config* c = nullptr;
  CHECK(coadapt_config_parse(nullptr, &c) == COADAPT_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(coadapt_last_error()) > 0);
  CHECK(coadapt_config_load("x.json", nullptr) == COADAPT_ERR_INVALID_ARGUMENT);
  double v = 0;
  CHECK(coadapt_policy_value(nullptr, &v) == COADAPT_ERR_INVALID_ARGUMENT);
  coadapt_config_free(nullptr);
  coadapt_policy_free(nullptr);
  coadapt_model_free(nullptr);
  coadapt_server_stop(nullptr);
  CHECK(coadapt_server_port(nullptr) == -1);
}

TEST_CASE("config errors map to status codes") {
  coadapt_config* c = nullptr;
  CHECK(coadapt_config_parse("{", &c) == COADAPT_ERR_CONFIG);
  CHECK(c == nullptr);
  CHECK(coadapt_config_parse(R"({"env":"assembly","oops":1})", &c) == COADAPT_ERR_CONFIG);
  CHECK(std::string(coadapt_last_error()).find("oops") != std::string::npos);
  CHECK(coadapt_config_parse(R"({"env":"assembly","planner":{"condition":"x"}})", &c) == COADAPT_ERR_BAD_CONDITION);
  CHECK(coadapt_config_load("/nonexistent/config.json", &c) == COADAPT_ERR_CONFIG);

  c = parse_config(R"({"env":"shared-autonomy","horizon":6})");
  // A rejected change leaves the config as it was.
  CHECK(coadapt_config_set(c, "horizon=0") == COADAPT_ERR_CONFIG);
  Owned doc;
  REQUIRE(coadapt_config_to_json(c, &doc.s) == COADAPT_OK);
  CHECK(doc.parse()["horizon"] == 6);
  CHECK(coadapt_config_set(c, "params.width=7") == COADAPT_OK);
  CHECK(coadapt_config_set_seed(c, 99) == COADAPT_OK);
  Owned doc2;
  REQUIRE(coadapt_config_to_json(c, &doc2.s) == COADAPT_OK);
  CHECK(doc2.parse()["params"]["width"] == 7);
  CHECK(doc2.parse()["seed"] == 99);

  coadapt_model* m = nullptr;
  REQUIRE(coadapt_config_set(c, "env=nowhere") == COADAPT_OK);
  CHECK(coadapt_model_build(c, &m) == COADAPT_ERR_UNKNOWN_ENVIRONMENT);
  REQUIRE(coadapt_config_set(c, "env=shared-autonomy") == COADAPT_OK);
  REQUIRE(coadapt_config_set(c, "params.depth=3") == COADAPT_OK);
  CHECK(coadapt_model_build(c, &m) == COADAPT_ERR_INVALID_PARAMS);
  coadapt_config_free(c);
}

TEST_CASE("compose applies overrides in order") {
  const char* sets[] = {"env=table-carrying", "horizon=5", "horizon=4"};
  coadapt_config* c = nullptr;
  REQUIRE(coadapt_config_compose(nullptr, sets, 3, &c) == COADAPT_OK);
  coadapt_model* m = nullptr;
  REQUIRE(coadapt_model_build(c, &m) == COADAPT_OK);
  Owned d;
  REQUIRE(coadapt_model_describe(m, &d.s) == COADAPT_OK);
  const json j = d.parse();
  CHECK(j["env"] == "table-carrying");
  CHECK(j["horizon"] == 4);
  CHECK(j["robot_actions"] == json::array({"cw", "ccw", "hold"}));
  CHECK(j["types"].size() == 5);
  coadapt_model_free(m);
  coadapt_config_free(c);
}

TEST_CASE("solve, save, load, export") {
  coadapt_config* c = parse_config(R"({"env":"shared-autonomy","horizon":6,"seed":3})");
  coadapt_policy* p = nullptr;
  REQUIRE(coadapt_policy_solve(c, nullptr, &p) == COADAPT_OK);
  double v = 0.0;
  REQUIRE(coadapt_policy_value(p, &v) == COADAPT_OK);
  const auto path = (std::filesystem::current_path() / "capi-out" / "policy.json").string();
  REQUIRE(coadapt_policy_save(p, path.c_str()) == COADAPT_OK);

  coadapt_policy* q = nullptr;
  REQUIRE(coadapt_policy_load(path.c_str(), &q) == COADAPT_OK);
  double w = 0.0;
  REQUIRE(coadapt_policy_value(q, &w) == COADAPT_OK);
  CHECK(w == v);
  Owned a, b;
  REQUIRE(coadapt_policy_tree_dot(p, -1, &a.s) == COADAPT_OK);
  REQUIRE(coadapt_policy_tree_dot(q, -1, &b.s) == COADAPT_OK);
  CHECK(std::string(a.s) == std::string(b.s));
  CHECK(std::string(a.s).rfind("digraph policy {", 0) == 0);
  Owned root;
  REQUIRE(coadapt_policy_tree_dot(q, 0, &root.s) == COADAPT_OK);
  CHECK(std::string(root.s).find("->") == std::string::npos);
  Owned bad;
  CHECK(coadapt_policy_tree_dot(q, 7, &bad.s) == COADAPT_ERR_INVALID_PARAMS);

  coadapt_policy* none = nullptr;
  CHECK(coadapt_policy_solve(c, "telepathy", &none) == COADAPT_ERR_BAD_CONDITION);
  CHECK(coadapt_policy_load("/nonexistent/policy.json", &none) != COADAPT_OK);

  coadapt_policy_free(p);
  coadapt_policy_free(q);
  coadapt_config_free(c);
}

TEST_CASE("belief explosion surfaces as its own status") {
  coadapt_config* c =
      parse_config(R"({"env":"table-carrying","horizon":8,"planner":{"belief_cap":10}})");
  coadapt_policy* p = nullptr;
  CHECK(coadapt_policy_solve(c, nullptr, &p) == COADAPT_ERR_BELIEF_EXPLOSION);
  CHECK(p == nullptr);
  coadapt_config_free(c);
}

TEST_CASE("run_command returns the summary") {
  coadapt_config* c = parse_config(R"({"env":"shared-autonomy","horizon":6,"seed":1,"simulate":{"episodes":2}})");
  Owned out;
  REQUIRE(coadapt_run_command("simulate", c, "capi-sim", 1, nullptr, -1, &out.s) == COADAPT_OK);
  const json j = out.parse();
  CHECK(j["command"] == "simulate");
  CHECK(std::filesystem::exists("capi-sim/traces/episode-00000.jsonl"));
  Owned none;
  CHECK(coadapt_run_command("dance", c, "capi-sim", 1, nullptr, -1, &none.s) != COADAPT_OK);
  CHECK(coadapt_run_command("simulate", nullptr, "capi-sim", 1, nullptr, -1, &none.s) == COADAPT_ERR_INVALID_ARGUMENT);
  coadapt_config_free(c);
}

TEST_CASE("server through the C API") {
  coadapt_config* c = parse_config(R"({"env":"shared-autonomy","horizon":4})");
  coadapt_server* s = nullptr;
  REQUIRE(coadapt_server_start(c, 0, &s) == COADAPT_OK);
  coadapt_config_free(c);
  const int port = coadapt_server_port(s);
  CHECK(port > 0);
  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/sessions", R"({"condition":"mutual-adaptation"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  coadapt_server_stop(s);
}
