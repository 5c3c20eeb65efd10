// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "coadapt/app.hpp"
#include "coadapt/environments.hpp"
#include "coadapt/harness.hpp"
#include "coadapt/learning.hpp"
#include "coadapt/planner.hpp"
#include "probes.hpp"

namespace fs = std::filesystem;
using namespace coadapt;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

// Runs a criterion body; an exception is a failure with the message attached.
void criterion(int id, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [pass, detail] = body();
    report(id, pass, detail);
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::shared_ptr<const GameModel> shared_autonomy_population_model() {
  return std::make_shared<const GameModel>(build_env("shared-autonomy", json::object(), 10, HumanModelConfig{}));
}

// ---- 1 ---------------------------------------------------------------------

std::pair<bool, std::string> solver_oracle() {
  const auto start = Clock::now();
  const auto instances = probes::solver_instances();
  double worst = 0.0;
  for (const auto& inst : instances) {
    const Belief b0(inst.prior);
    const auto sol = solve_exact(inst.model, inst.model->initial_state, b0);
    const double brute = brute_force_value(*inst.model, inst.model->initial_state, b0, inst.model->horizon);
    worst = std::max(worst, std::abs(sol.value - brute));
  }
  const double elapsed = seconds_since(start);
  return {instances.size() >= 10 && worst <= 1e-9 && elapsed <= 60.0,
          fmt("%zu instances, max |exact - brute force| = %.3g (tol 1e-9), %.2f s (limit 60 s)", instances.size(),
              worst, elapsed)};
}

// ---- 2 ---------------------------------------------------------------------

std::pair<bool, std::string> bayes_filter() {
  const auto r = probes::run_filter_probes();
  return {r.cases > 0 && r.max_error <= 1e-9,
          fmt("%zu probe prefixes, max error %.3g (tol 1e-9)", r.cases, r.max_error)};
}

// ---- 3 ---------------------------------------------------------------------

std::pair<bool, std::string> goal_reproduction() {
  const auto model = shared_autonomy_population_model();
  const std::size_t nY = model->types.size();
  TypeIndex lo = 0, hi = 0;
  for (std::size_t y = 0; y < nY; ++y) {
    if (model->types[static_cast<TypeIndex>(y)].adaptability == 0.0) lo = static_cast<TypeIndex>(y);
    if (model->types[static_cast<TypeIndex>(y)].adaptability == 1.0) hi = static_cast<TypeIndex>(y);
  }
  PopulationConfig cfg;
  cfg.conditions = {kConditionMutual};
  cfg.episodes = 200;
  cfg.seed = 2024;
  cfg.jobs = threads();
  cfg.keep_traces = false;
  cfg.mixture.assign(nY, 0.0);
  cfg.mixture[static_cast<std::size_t>(hi)] = 1.0;
  const double robot_goal = run_population(model, Belief::uniform(nY), cfg)[0].robot_goal.mean;
  cfg.mixture.assign(nY, 0.0);
  cfg.mixture[static_cast<std::size_t>(lo)] = 1.0;
  const double human_goal = run_population(model, Belief::uniform(nY), cfg)[0].human_goal.mean;
  return {robot_goal >= 0.95 && human_goal >= 0.95,
          fmt("alpha=1 robot goal %.3f, alpha=0 human goal %.3f over 200 episodes each (need >= 0.95)", robot_goal,
              human_goal)};
}

// ---- 4 ---------------------------------------------------------------------

std::pair<bool, std::string> population_ordering() {
  const auto start = Clock::now();
  const auto model = shared_autonomy_population_model();
  PopulationConfig cfg;
  cfg.conditions = {kConditionNoAdaptation, kConditionMutual, kConditionRobotOnly};
  cfg.episodes = 1000;
  cfg.seed = 77;
  cfg.jobs = threads();
  cfg.keep_traces = false;
  const auto r = run_population(model, Belief::uniform(model->types.size()), cfg);
  const Estimate& none = r[0].robot_reward;
  const Estimate& mutual = r[1].robot_reward;
  const Estimate& robot_only = r[2].robot_reward;
  const double elapsed = seconds_since(start);
  const bool order = none.mean >= mutual.mean && mutual.mean > robot_only.mean;
  const bool separated = mutual.mean - 3.0 * mutual.stderr_ > robot_only.mean + 3.0 * robot_only.stderr_;
  return {order && separated && elapsed <= 300.0,
          fmt("no-adaptation %.3f +/- %.3f >= mutual %.3f +/- %.3f > robot-only %.3f +/- %.3f (3 stderr separated: %s), "
              "%.1f s (limit 300 s)",
              none.mean, none.stderr_, mutual.mean, mutual.stderr_, robot_only.mean, robot_only.stderr_,
              separated ? "yes" : "no", elapsed)};
}

// ---- 5 ---------------------------------------------------------------------

std::pair<bool, std::string> teaching() {
  HumanModelConfig h;
  h.kind = HumanModelKind::kBestResponse;
  h.eps_learn = 0.9;
  auto model = std::make_shared<const GameModel>(build_env("table-clearing", json::object(), 2, h));
  const Belief b0({1.0, 0.0});
  const auto r = teaching_action_check(model, model->initial_state, b0, 2);
  ActionIndex brute_best = 0;
  double best = -1e300;
  for (ActionIndex a = 0; a < model->robot_action_count(); ++a) {
    const double q = brute_force_q(*model, model->initial_state, b0, 2, a);
    if (q > best + 1e-12) {
      best = q;
      brute_best = a;
    }
  }
  const auto name = [&](ActionIndex a) { return a >= 0 ? model->robot_actions[static_cast<std::size_t>(a)] : "-"; };
  return {r.optimal_action != r.myopic_action && r.optimal_action == brute_best,
          fmt("optimal '%s' (value %.4f), myopic '%s' (value %.4f), brute force '%s'", name(r.optimal_action).c_str(),
              r.optimal_value, name(r.myopic_action).c_str(), r.myopic_value, name(brute_best).c_str())};
}

// ---- 6 ---------------------------------------------------------------------

std::pair<bool, std::string> cross_training() {
  int identified = 0, monotone = 0;
  for (int s = 0; s < 20; ++s) {
    CrossTrainConfig c;
    c.true_preference = s % 3;
    const auto r = cross_train("assembly", json::object(), 12, c, 1000 + static_cast<std::uint64_t>(s));
    if (r.preference == c.true_preference) ++identified;
    bool ok = true;
    for (std::size_t i = 1; i < r.rounds.size(); ++i)
      ok = ok && r.rounds[i].team_value >= r.rounds[i - 1].team_value - 1e-12;
    if (ok) ++monotone;
  }
  return {identified == 20 && monotone == 20,
          fmt("preference identified in %d/20 runs, team value non-decreasing in %d/20", identified, monotone)};
}

// ---- 7 ---------------------------------------------------------------------

std::pair<bool, std::string> type_discovery() {
  const fs::path out = fs::current_path() / "acceptance-cluster";
  json doc = {{"env", "assembly"}, {"horizon", 12}, {"seed", 5},
              {"cluster", {{"k", 3}, {"per_type", 20}, {"held_out", 200}}}};
  const auto config = parse_config(doc);
  CommandOptions options;
  options.out = out;
  const auto r = run_command("cluster", config, options);
  const double accuracy = r["accuracy"].get<double>();
  const double online = r["online_rate"].get<double>();
  const std::size_t demos = r["demonstrations"].get<std::size_t>();
  return {demos == 60 && accuracy >= 0.9 && online >= 0.9,
          fmt("%zu demonstrations, assignment accuracy %.3f (need >= 0.9), online identification %.3f over 200 "
              "held-out episodes (need >= 0.9)",
              demos, accuracy, online)};
}

// ---- 8 ---------------------------------------------------------------------

std::pair<bool, std::string> human_models() {
  const auto mc = probes::run_likelihood_probes();
  const auto mem = probes::run_memory_invariance();
  return {mc.probes == 20 && mc.max_error <= 0.01 && mem.max_distribution_diff == 0.0 && mem.sample_mismatches == 0,
          fmt("%zu tuples x 1e5 samples, max |freq - analytic| = %.4f (tol 0.01); %zu memory pairs, max diff %.3g, "
              "%zu sample mismatches",
              mc.probes, mc.max_error, mem.pairs, mem.max_distribution_diff, mem.sample_mismatches)};
}

// ---- 9 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& root, const fs::path& stdout_file) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  files["<stdout>"] = slurp(stdout_file);
  return files;
}

std::pair<bool, std::string> determinism() {
  const fs::path work = fs::current_path() / "acceptance-cli";
  fs::remove_all(work);
  fs::create_directories(work);
  std::ofstream(work / "sa.json") << R"({"env":"shared-autonomy","horizon":8,"seed":3,
    "simulate":{"episodes":5},"population":{"episodes":40}})";
  std::ofstream(work / "as.json") << R"({"env":"assembly","horizon":12,"seed":9,
    "crosstrain":{"rounds":3},"cluster":{"held_out":50}})";
  const std::string cli = COADAPT_CLI_PATH;
  const fs::path policy = work / "policy" / "policy.json";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"solve", "solve --config " + (work / "sa.json").string()},
      {"tree", "tree --policy " + policy.string() + " --depth 4"},
      {"simulate", "simulate --config " + (work / "sa.json").string() + " --jobs 4"},
      {"population", "population --config " + (work / "sa.json").string() + " --jobs 4"},
      {"crosstrain", "crosstrain --config " + (work / "as.json").string()},
      {"cluster", "cluster --config " + (work / "as.json").string()},
  };
  // tree needs a policy to read; write it outside the compared directories.
  if (std::system((cli + " solve --config " + (work / "sa.json").string() + " --out " + (work / "policy").string() +
                   " > /dev/null")
                      .c_str()) != 0)
    return {false, "could not write the policy for tree"};

  std::vector<std::string> differing, failed;
  for (const auto& [name, args] : commands) {
    const fs::path out = work / name;
    const fs::path log = work / (name + ".stdout");
    std::map<std::string, std::string> runs[2];
    for (int i = 0; i < 2; ++i) {
      fs::remove_all(out);
      const int status = std::system((cli + " " + args + " --out " + out.string() + " > " + log.string()).c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        failed.push_back(name);
        break;
      }
      runs[i] = snapshot(out, log);
    }
    if (runs[0].size() < 2 || runs[0] != runs[1]) differing.push_back(name);
  }
  std::string detail = fmt("%zu commands rerun with identical config and seed", commands.size());
  for (const auto& f : failed) detail += "; " + f + " failed";
  for (const auto& d : differing) detail += "; " + d + " differs";
  if (failed.empty() && differing.empty()) detail += ", all artifacts and summaries byte-identical";
  return {failed.empty() && differing.empty(), detail};
}

}  // namespace

int main() {
  criterion(1, solver_oracle);
  criterion(2, bayes_filter);
  criterion(3, goal_reproduction);
  criterion(4, population_ordering);
  criterion(5, teaching);
  criterion(6, cross_training);
  criterion(7, type_discovery);
  criterion(8, human_models);
  criterion(9, determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
