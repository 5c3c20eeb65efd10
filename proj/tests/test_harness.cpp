#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coadapt/environments.hpp"
#include "coadapt/harness.hpp"
#include "probes.hpp"

using namespace coadapt;
using nlohmann::json;

namespace {

std::shared_ptr<const GameModel> shared_autonomy(int T = 10) {
  return std::make_shared<const GameModel>(
      build_env("shared-autonomy", json::object(), T, probes::bam({0.0, 0.25, 0.5, 0.75, 1.0})));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("metrics of an empty trace") {
  const auto m = compute_metrics(EpisodeTrace{}, *shared_autonomy());
  CHECK(m.steps == 0);
  CHECK(m.robot_reward == 0.0);
  CHECK(m.disagreements == 0);
  CHECK(m.final_class.empty());
}

TEST_CASE("metrics count disagreements by hand") {
  const auto model = shared_autonomy();
  EpisodeTrace t;
  // Cells: 4 -(left vs right)-> 3 -(right vs left)-> 4 -(straight, straight)-> 4 -(right vs left)-> 5.
  t.steps.push_back({0, -1, {4}, 0, 2, {}, -1.0, 0.5, -1});
  t.steps.push_back({1, -1, {3}, 2, 0, {}, -1.0, 0.5, -1});
  t.steps.push_back({2, -1, {4}, 1, 1, {}, -1.0, 0.5, -1});
  t.steps.push_back({3, -1, {4}, 2, 0, {}, -1.0, 0.5, -1});
  const auto m = compute_metrics(t, *model);
  CHECK(m.steps == 4);
  CHECK(m.disagreements == 3);
  CHECK(m.robot_reward == doctest::Approx(-4.0));
  CHECK(m.human_reward == doctest::Approx(2.0));
  CHECK(m.final_class.empty());
}

TEST_CASE("estimate") {
  const auto e = estimate({1.0, 2.0, 3.0, 4.0});
  CHECK(e.n == 4);
  CHECK(e.mean == doctest::Approx(2.5));
  // Sample sd sqrt(5/3), divided by sqrt(4).
  CHECK(e.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(estimate({}).n == 0);
}

TEST_CASE("episodes are reproducible and independent of thread count") {
  const auto model = shared_autonomy(6);
  PopulationConfig cfg;
  cfg.episodes = 24;
  cfg.seed = 99;
  cfg.conditions = {kConditionMutual, kConditionNoAdaptation};
  const auto a = run_population(model, Belief::uniform(5), cfg);
  cfg.jobs = 4;
  const auto b = run_population(model, Belief::uniform(5), cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t c = 0; c < a.size(); ++c) {
    REQUIRE(a[c].traces.size() == 24);
    for (std::size_t i = 0; i < 24; ++i) CHECK(trace_to_jsonl(a[c].traces[i]) == trace_to_jsonl(b[c].traces[i]));
    CHECK(a[c].robot_reward.mean == b[c].robot_reward.mean);
  }
}

TEST_CASE("episode i does not depend on how many episodes run") {
  const auto model = shared_autonomy(6);
  PopulationConfig cfg;
  cfg.seed = 4;
  cfg.conditions = {kConditionMutual};
  cfg.episodes = 5;
  const auto few = run_population(model, Belief::uniform(5), cfg);
  cfg.episodes = 12;
  const auto many = run_population(model, Belief::uniform(5), cfg);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(trace_to_jsonl(few[0].traces[i]) == trace_to_jsonl(many[0].traces[i]));
    CHECK(few[0].initial_types[i] == many[0].initial_types[i]);
  }
}

TEST_CASE("conditions face the same users") {
  const auto model = shared_autonomy(6);
  PopulationConfig cfg;
  cfg.seed = 21;
  cfg.episodes = 30;
  const auto r = run_population(model, Belief::uniform(5), cfg);
  REQUIRE(r.size() == 3);
  CHECK(r[0].initial_types == r[1].initial_types);
  CHECK(r[1].initial_types == r[2].initial_types);
}

TEST_CASE("seeded episode rerun matches") {
  const auto model = shared_autonomy(8);
  const auto sol = solve_exact(model, model->initial_state, Belief::uniform(5));
  const auto a = run_episode(*model, *sol.policy, 2, 123, kConditionMutual);
  const auto b = run_episode(*model, *sol.policy, 2, 123, kConditionMutual);
  CHECK(trace_to_jsonl(a) == trace_to_jsonl(b));
  for (const auto& s : a.steps) {
    CHECK(s.y == 2);
    Belief check(s.belief);
    CHECK(check.valid());
  }
}

TEST_CASE("fully adaptive users end at the robot goal, stubborn ones at the human goal") {
  const auto model = shared_autonomy(10);
  PopulationConfig cfg;
  cfg.conditions = {kConditionMutual};
  cfg.episodes = 100;
  cfg.seed = 17;
  cfg.mixture = {0, 0, 0, 0, 1};
  const auto adaptive = run_population(model, Belief::uniform(5), cfg);
  CHECK(adaptive[0].robot_goal.mean >= 0.95);
  cfg.mixture = {1, 0, 0, 0, 0};
  const auto stubborn = run_population(model, Belief::uniform(5), cfg);
  CHECK(stubborn[0].human_goal.mean >= 0.95);
}

TEST_CASE("Monte-Carlo evaluation brackets the exact expectation") {
  const auto model = std::make_shared<const GameModel>(build_env("table-carrying", json::object(), 6, probes::bam({0.0, 0.5, 1.0})));
  const Belief prior({0.3, 0.3, 0.4});
  const auto sol = solve_exact(model, model->initial_state, prior);
  const double exact = evaluate_policy_exact(*model, *sol.policy, model->initial_state, prior, 6);
  const auto mc = evaluate_policy_pair(*model, *sol.policy, prior, 4000, 8, 4);
  CHECK(std::abs(mc.mean - exact) <= 4.0 * mc.stderr_ + 1e-9);
  const auto again = evaluate_policy_pair(*model, *sol.policy, prior, 4000, 8, 1);
  CHECK(again.mean == mc.mean);
}

TEST_CASE("population outputs") {
  const auto model = shared_autonomy(5);
  PopulationConfig cfg;
  cfg.episodes = 3;
  cfg.seed = 2;
  const auto r = run_population(model, Belief::uniform(5), cfg);
  const auto dir = std::filesystem::temp_directory_path() / "coadapt-test-population";
  std::filesystem::remove_all(dir);
  write_population_outputs(r, dir);
  const std::string csv = slurp(dir / "metrics.csv");
  CHECK(csv.rfind("condition,episodes,robot_reward_mean,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary.dump().find("mutual-adaptation") != std::string::npos);
  for (const auto& c : condition_names()) {
    for (int i = 0; i < 3; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "episode-%05d.jsonl", i);
      const auto p = dir / "traces" / c / name;
      CHECK(std::filesystem::exists(p));
      const auto trace = trace_from_jsonl(slurp(p));
      CHECK(!trace.steps.empty());
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("initial type draws follow the mixture") {
  const Belief mix({0.0, 1.0, 0.0});
  for (std::uint64_t s = 0; s < 50; ++s) CHECK(draw_initial_type(s, mix) == 1);
  const Belief even = Belief::uniform(2);
  int ones = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) ones += draw_initial_type(derive_seed(5, s), even);
  CHECK(ones > 900);
  CHECK(ones < 1100);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 7, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
}
