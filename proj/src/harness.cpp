#include "coadapt/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "coadapt/environments.hpp"
#include "coadapt/human_models.hpp"
#include "coadapt/rng.hpp"

namespace coadapt {

namespace {

// Separates the initial-type draw from the episode's own stream.
constexpr std::uint64_t kTypeStream = 0x7479706573ULL;

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string(), "out");
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string(), "out");
}

}  // namespace

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> threads;
  const unsigned n = std::min<std::size_t>(jobs, count);
  for (unsigned t = 0; t < n; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

EpisodeTrace run_episode(const GameModel& truth, const RobotPolicy& policy, TypeIndex y0, std::uint64_t seed,
                         const std::string& condition) {
  const GameModel& pm = policy.planning_model();
  Rng rng(seed);
  EpisodeTrace trace;
  trace.seed = seed;
  trace.condition = condition;
  StateIndex x = truth.initial_state;
  HumanContext human_ctx = truth.initial_context();
  HumanContext robot_ctx = pm.initial_context();
  Belief b = policy.initial_belief();
  TypeIndex y = y0;
  const int T = truth.horizon;
  for (int t = 0; t < T && !truth.terminal(x); ++t) {
    const ActionIndex aR = policy.act(x, robot_ctx, b, T - t);
    y = human::type_transition_step(y, aR, truth.types, rng);
    auto [aH, next_human_ctx] = human::sample_action(truth, x, human_ctx, aR, y, rng);
    TraceStep s;
    s.t = t;
    s.state = x;
    s.x = truth.states[static_cast<std::size_t>(x)];
    s.aR = aR;
    s.aH = aH;
    s.rR = truth.robot_reward(x, aR, aH, y);
    s.rH = truth.human_reward(x, aR, aH, y);
    s.y = y;
    b = belief_update(b, x, aR, aH, pm, robot_ctx, policy.update_options());
    s.belief.assign(b.probs().begin(), b.probs().end());
    robot_ctx = human::advance_context(pm, robot_ctx, x, aR, aH);
    human_ctx = std::move(next_human_ctx);
    x = truth.next(x, aR, aH);
    trace.steps.push_back(std::move(s));
  }
  trace.final_state = x;
  return trace;
}

EpisodeMetrics compute_metrics(const EpisodeTrace& trace, const GameModel& model) {
  EpisodeMetrics m;
  if (trace.steps.empty()) return m;
  StateIndex last = kNoAction;
  for (const auto& s : trace.steps) {
    const StateIndex x = s.state >= 0 ? s.state : find_state(model, s.x);
    if (x < 0) throw Error(ErrorCode::kInvalidParams, "trace state not in the model", "trace");
    ++m.steps;
    m.robot_reward += s.rR;
    m.human_reward += s.rH;
    if (model.disagree(x, s.aR, s.aH)) ++m.disagreements;
    last = model.next(x, s.aR, s.aH);
  }
  m.final_class = model.state_class[static_cast<std::size_t>(last)];
  return m;
}

Estimate estimate(const std::vector<double>& samples) {
  Estimate e;
  e.n = samples.size();
  if (samples.empty()) return e;
  double sum = 0.0;
  for (double v : samples) sum += v;
  e.mean = sum / static_cast<double>(e.n);
  if (e.n > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - e.mean) * (v - e.mean);
    e.stderr_ = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
  }
  return e;
}

TypeIndex draw_initial_type(std::uint64_t episode_seed, const Belief& mixture) {
  Rng type_rng(derive_seed(episode_seed, kTypeStream));
  return type_rng.categorical(mixture.probs());
}

Estimate evaluate_policy_pair(const GameModel& truth, const RobotPolicy& policy, const Belief& type_prior,
                              std::size_t episodes, std::uint64_t seed, unsigned jobs) {
  std::vector<double> returns(episodes, 0.0);
  parallel_for(episodes, jobs, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(seed, i);
    const TypeIndex y0 = draw_initial_type(s, type_prior);
    returns[i] = accumulate_reward(run_episode(truth, policy, y0, s), Agent::kRobot);
  });
  return estimate(returns);
}

std::vector<ConditionSummary> run_population(std::shared_ptr<const GameModel> truth, const Belief& prior,
                                             const PopulationConfig& config, const PlannerOptions& options) {
  std::vector<std::string> conditions = config.conditions.empty() ? condition_names() : config.conditions;
  for (const auto& c : conditions)
    if (std::find(condition_names().begin(), condition_names().end(), c) == condition_names().end())
      throw Error(ErrorCode::kBadCondition, "unknown condition '" + c + "'", "population.conditions");
  std::vector<double> mixture = config.mixture;
  if (mixture.empty()) mixture.assign(truth->types.size(), 1.0);
  if (mixture.size() != truth->types.size())
    throw Error(ErrorCode::kInvalidParams, "mixture size does not match the type space", "population.mixture");
  const Belief mix(mixture);
  if (config.episodes == 0)
    throw Error(ErrorCode::kInvalidParams, "episodes must be >= 1", "population.episodes");

  std::vector<TypeIndex> initial_types(config.episodes);
  for (std::size_t i = 0; i < config.episodes; ++i) {
    initial_types[i] = draw_initial_type(derive_seed(config.seed, i), mix);
  }

  std::vector<ConditionSummary> out;
  for (const auto& condition : conditions) {
    auto policy = make_condition_policy(condition, truth, prior, options);
    std::vector<EpisodeTrace> traces(config.episodes);
    parallel_for(config.episodes, config.jobs, [&](std::size_t i) {
      traces[i] = run_episode(*truth, *policy, initial_types[i], derive_seed(config.seed, i), condition);
    });
    ConditionSummary s;
    s.condition = condition;
    std::vector<double> rr, rh, steps, dis, robot_goal, human_goal;
    for (const auto& tr : traces) {
      const auto m = compute_metrics(tr, *truth);
      rr.push_back(m.robot_reward);
      rh.push_back(m.human_reward);
      steps.push_back(m.steps);
      dis.push_back(m.disagreements);
      robot_goal.push_back(m.final_class == "robot-goal" ? 1.0 : 0.0);
      human_goal.push_back(m.final_class == "human-goal" ? 1.0 : 0.0);
      ++s.final_classes[m.final_class.empty() ? "none" : m.final_class];
    }
    s.robot_reward = estimate(rr);
    s.human_reward = estimate(rh);
    s.steps = estimate(steps);
    s.disagreements = estimate(dis);
    s.robot_goal = estimate(robot_goal);
    s.human_goal = estimate(human_goal);
    s.initial_types = initial_types;
    if (config.keep_traces) s.traces = std::move(traces);
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::ordered_json population_summary_json(const std::vector<ConditionSummary>& result) {
  auto est = [](const Estimate& e) {
    nlohmann::ordered_json j;
    j["mean"] = e.mean;
    j["stderr"] = e.stderr_;
    return j;
  };
  nlohmann::ordered_json conditions = nlohmann::ordered_json::array();
  for (const auto& s : result) {
    nlohmann::ordered_json j;
    j["condition"] = s.condition;
    j["episodes"] = s.robot_reward.n;
    j["robot_reward"] = est(s.robot_reward);
    j["human_reward"] = est(s.human_reward);
    j["steps"] = est(s.steps);
    j["disagreements"] = est(s.disagreements);
    j["robot_goal_rate"] = est(s.robot_goal);
    j["human_goal_rate"] = est(s.human_goal);
    nlohmann::ordered_json classes;
    for (const auto& [k, v] : s.final_classes) classes[k] = v;
    j["final_classes"] = classes;
    conditions.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["conditions"] = std::move(conditions);
  return out;
}

std::string population_metrics_csv(const std::vector<ConditionSummary>& result) {
  std::string csv =
      "condition,episodes,robot_reward_mean,robot_reward_stderr,human_reward_mean,human_reward_stderr,"
      "steps_mean,steps_stderr,disagreements_mean,disagreements_stderr,robot_goal_rate,robot_goal_rate_stderr,"
      "human_goal_rate,human_goal_rate_stderr\n";
  for (const auto& s : result) {
    csv += s.condition + "," + std::to_string(s.robot_reward.n);
    for (const Estimate* e : {&s.robot_reward, &s.human_reward, &s.steps, &s.disagreements, &s.robot_goal,
                              &s.human_goal})
      csv += "," + format_number(e->mean) + "," + format_number(e->stderr_);
    csv += "\n";
  }
  return csv;
}

void write_population_outputs(const std::vector<ConditionSummary>& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message(), "out");
  write_file(dir / "metrics.csv", population_metrics_csv(result));
  write_file(dir / "summary.json", population_summary_json(result).dump(2) + "\n");
  for (const auto& s : result) {
    if (s.traces.empty()) continue;
    const auto tdir = dir / "traces" / s.condition;
    std::filesystem::create_directories(tdir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + tdir.string() + ": " + ec.message(), "out");
    for (std::size_t i = 0; i < s.traces.size(); ++i) {
      char name[48];
      std::snprintf(name, sizeof name, "episode-%05zu.jsonl", i);
      write_file(tdir / name, trace_to_jsonl(s.traces[i]));
    }
  }
}

}  // namespace coadapt
