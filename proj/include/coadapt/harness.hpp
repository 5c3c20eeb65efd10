#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "coadapt/planner.hpp"

namespace coadapt {

// One closed-loop episode. Per step: robot acts on (x, h, b, T - t); the type
// transitions on aR; the human samples aH; rewards are read from the true
// model; the robot's belief and context advance under its planning model.
// The logged belief is the posterior after observing aH.
EpisodeTrace run_episode(const GameModel& truth, const RobotPolicy& policy, TypeIndex y0, std::uint64_t seed,
                         const std::string& condition = {});

// Initial type of the episode whose derived seed is `episode_seed`. Shared by
// every condition so that they face the same users.
TypeIndex draw_initial_type(std::uint64_t episode_seed, const Belief& mixture);

struct EpisodeMetrics {
  int steps = 0;
  double robot_reward = 0.0;
  double human_reward = 0.0;
  int disagreements = 0;
  std::string final_class;
};

// Traces read back from JSONL carry no state index; states are recovered
// from the logged components.
EpisodeMetrics compute_metrics(const EpisodeTrace& trace, const GameModel& model);

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

Estimate estimate(const std::vector<double>& samples);

// Monte-Carlo estimate of the expected total robot reward with the initial
// type drawn from `type_prior`. Bit-identical for equal seeds.
Estimate evaluate_policy_pair(const GameModel& truth, const RobotPolicy& policy, const Belief& type_prior,
                              std::size_t episodes, std::uint64_t seed, unsigned jobs = 1);

struct PopulationConfig {
  std::vector<std::string> conditions;  // empty: all three
  std::vector<double> mixture;          // over the true model's types; empty: uniform
  std::size_t episodes = 1000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool keep_traces = true;
};

struct ConditionSummary {
  std::string condition;
  Estimate robot_reward;
  Estimate human_reward;
  Estimate steps;
  Estimate disagreements;
  Estimate robot_goal;  // fraction of episodes ending in the "robot-goal" class
  Estimate human_goal;
  std::map<std::string, std::size_t> final_classes;
  std::vector<EpisodeTrace> traces;
  std::vector<TypeIndex> initial_types;
};

std::vector<ConditionSummary> run_population(std::shared_ptr<const GameModel> truth, const Belief& prior,
                                             const PopulationConfig& config, const PlannerOptions& options = {});

nlohmann::ordered_json population_summary_json(const std::vector<ConditionSummary>& result);
std::string population_metrics_csv(const std::vector<ConditionSummary>& result);

// Writes metrics.csv, summary.json and traces/<condition>/episode-NNNNN.jsonl.
void write_population_outputs(const std::vector<ConditionSummary>& result, const std::filesystem::path& dir);

// Runs `count` jobs indexed 0..count-1 on up to `jobs` threads.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body);

}  // namespace coadapt
