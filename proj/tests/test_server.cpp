#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include "coadapt/config.hpp"
#include "coadapt/human_models.hpp"
#include "coadapt/server.hpp"

using namespace coadapt;
using nlohmann::json;

namespace {

const json kBase = {{"env", "shared-autonomy"}, {"horizon", 10}, {"seed", 7}};

struct Running {
  SessionServer server;
  httplib::Client client;
  explicit Running(json base = kBase, std::string origin = "*")
      : server(make_config(std::move(origin)), std::move(base)), client("127.0.0.1", server.start()) {}

  static ServerConfig make_config(std::string origin) {
    ServerConfig c;
    c.port = 0;
    c.cors_origin = std::move(origin);
    return c;
  }

  json post(const std::string& path, const json& body, int expect) {
    auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
  json get(const std::string& path, int expect) {
    auto res = client.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
};

// Human action of the plan the robot's action reveals: what a fully adaptive
// single-step-memory human answers next.
ActionIndex follow(ActionIndex robot) { return robot == 0 ? 0 : 2; }

}  // namespace

TEST_CASE("session lifecycle over HTTP") {
  Running r;
  const json created = r.post("/sessions", {{"condition", "mutual-adaptation"}}, 201);
  const std::string id = created["id"];
  CHECK(id.size() == 16);
  const json& s0 = created["state"];
  CHECK(s0["status"] == "active");
  CHECK(s0["t"] == 0);
  CHECK(s0["x"] == json::array({4}));
  CHECK(s0["belief"].size() == 5);
  CHECK(s0["legal_human_actions"] == json::array({0, 1, 2}));
  CHECK(s0["last_step"].is_null());

  const json step = r.post("/sessions/" + id + "/act", {{"aH", 0}}, 200);
  // json sorts keys on parse; the order is checked on the raw text.
  auto raw = r.client.Get("/sessions/" + id + "/trace");
  REQUIRE(raw);
  CHECK(raw->body.find(R"({"t":0,"x":[4],"aR":)") != std::string::npos);
  CHECK(step["y"] == -1);
  CHECK(step["status"] == "active");
  CHECK(step["state"]["t"] == 1);

  const json st = r.get("/sessions/" + id + "/state", 200);
  CHECK(st["last_step"]["aH"] == 0);
}

TEST_CASE("HTTP errors") {
  Running r;
  r.get("/sessions/doesnotexist/state", 404);
  r.post("/sessions/doesnotexist/act", {{"aH", 0}}, 404);
  r.post("/sessions", {{"condition", "telepathy"}}, 400);
  r.post("/sessions", {{"cond", "mutual-adaptation"}}, 400);
  r.post("/sessions", {{"condition", "mutual-adaptation"}, {"config", {{"env", "nowhere"}}}}, 400);
  r.post("/sessions", {{"condition", "mutual-adaptation"}, {"config", {{"env", "shared-autonomy"}, {"x", 1}}}}, 400);
  auto bad = r.client.Post("/sessions", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  const std::string id = r.post("/sessions", {{"condition", "no-adaptation"}}, 201)["id"];
  r.post("/sessions/" + id + "/act", {{"aH", 7}}, 400);
  r.post("/sessions/" + id + "/act", {{"aH", "left"}}, 400);
  r.post("/sessions/" + id + "/act", json::object(), 400);

  // A belief cap of one entry cannot hold the planner's memo.
  json tight = kBase;
  tight["planner"] = {{"belief_cap", 1}};
  r.post("/sessions", {{"condition", "mutual-adaptation"}, {"config", tight}}, 422);
}

TEST_CASE("finished sessions refuse further actions") {
  Running r(json{{"env", "shared-autonomy"}, {"horizon", 2}});
  const std::string id = r.post("/sessions", {{"condition", "mutual-adaptation"}}, 201)["id"];
  r.post("/sessions/" + id + "/act", {{"aH", 0}}, 200);
  const json last = r.post("/sessions/" + id + "/act", {{"aH", 0}}, 200);
  CHECK(last["status"] == "finished");
  r.post("/sessions/" + id + "/act", {{"aH", 0}}, 409);
  CHECK(r.get("/sessions/" + id + "/trace", 200)["steps"].size() == 2);
}

TEST_CASE("trace beliefs replay under the Bayes filter") {
  Running r;
  const std::string id = r.post("/sessions", {{"condition", "mutual-adaptation"}}, 201)["id"];
  // Mix of answers, including ones a BAM human could not give, to exercise smoothing.
  const std::vector<int> script{0, 2, 2, 1, 0, 2, 2, 2, 2, 2};
  for (int aH : script) {
    const json step = r.post("/sessions/" + id + "/act", {{"aH", aH}}, 200);
    if (step["status"] == "finished") break;
  }
  const json trace = r.get("/sessions/" + id + "/trace", 200);
  const auto model = build_model(parse_config(kBase));
  Belief b = Belief::uniform(model.types.size());
  HumanContext h = model.initial_context();
  for (const auto& s : trace["steps"]) {
    const StateIndex x = find_state(model, s["x"].get<std::vector<int>>());
    const ActionIndex aR = s["aR"], aH = s["aH"];
    b = belief_update(b, x, aR, aH, model, h, {ZeroLikelihoodPolicy::kSmooth, 1e-6});
    const auto logged = s["belief"].get<std::vector<double>>();
    for (std::size_t i = 0; i < logged.size(); ++i) CHECK(std::abs(logged[i] - b.probs()[i]) <= 1e-9);
    h = human::advance_context(model, h, x, aR, aH);
  }
}

TEST_CASE("scripted humans reach the expected goals") {
  Running r;
  SUBCASE("a follower ends at the robot goal") {
    const std::string id = r.post("/sessions", {{"condition", "mutual-adaptation"}}, 201)["id"];
    ActionIndex aH = 0;
    json step;
    do {
      step = r.post("/sessions/" + id + "/act", {{"aH", aH}}, 200);
      aH = follow(step["aR"].get<ActionIndex>());
    } while (step["status"] == "active");
    CHECK(step["state"]["state_class"] == "robot-goal");
  }
  SUBCASE("a stubborn human ends at the human goal") {
    const std::string id = r.post("/sessions", {{"condition", "mutual-adaptation"}}, 201)["id"];
    json step;
    do {
      step = r.post("/sessions/" + id + "/act", {{"aH", 0}}, 200);
    } while (step["status"] == "active");
    CHECK(step["state"]["state_class"] == "human-goal");
  }
}

TEST_CASE("CORS headers and preflight") {
  Running r(kBase, "http://localhost:5173");
  auto pre = r.client.Options("/sessions");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  auto res = r.client.Get("/sessions/none/state");
  REQUIRE(res);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
}

TEST_CASE("idle sessions expire") {
  SessionStore store(kBase, std::chrono::seconds(60));
  auto now = SessionStore::Clock::now();
  store.set_clock([&] { return now; });
  const std::string a = store.create({{"condition", "no-adaptation"}})["id"];
  const std::string b = store.create({{"condition", "no-adaptation"}})["id"];
  CHECK(store.size() == 2);
  now += std::chrono::seconds(45);
  store.state(b);  // keeps b alive
  now += std::chrono::seconds(30);
  CHECK(store.expire(now) == 1);
  CHECK_THROWS_AS(store.state(a), HttpError);
  CHECK_NOTHROW(store.state(b));
  now += std::chrono::seconds(61);
  try {
    store.state(b);
    FAIL("expected 404");
  } catch (const HttpError& e) {
    CHECK(e.status() == 404);
  }
  CHECK(store.size() == 0);
}

TEST_CASE("sessions are independent") {
  SessionStore store(kBase, std::chrono::seconds(60));
  const std::string a = store.create({{"condition", "mutual-adaptation"}})["id"];
  const std::string b = store.create({{"condition", "mutual-adaptation"}})["id"];
  CHECK(a != b);
  store.act(a, {{"aH", 0}});
  CHECK(store.state(a)["t"] == 1);
  CHECK(store.state(b)["t"] == 0);
}
