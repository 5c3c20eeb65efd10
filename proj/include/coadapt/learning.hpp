#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "coadapt/planner.hpp"

namespace coadapt {

struct Demonstration {
  int id = 0;
  std::string phase = "forward";  // forward | rotation
  std::vector<TraceStep> steps;   // belief left empty
};

// JSONL, one step per line: the trace step schema without the belief, plus
// "demo" and "phase".
std::string demos_to_jsonl(const std::vector<Demonstration>& demos);
std::vector<Demonstration> demos_from_jsonl(const std::string& text, const GameModel& model);

// Add-one smoothed frequency table over legal human actions, [state][aH].
// Counts are pooled over states in the same human view class.
// States never visited fall back to uniform over legal actions.
class FrequencyEstimator {
 public:
  explicit FrequencyEstimator(const GameModel& model);
  void observe(StateIndex x, ActionIndex aH);
  std::vector<double> table() const;
  std::size_t visits(StateIndex x) const;

 private:
  const GameModel* model_;
  std::vector<double> counts_;
};

// Log-likelihood of the observed human actions under each preference's
// policy in `model`, mixed with uniform over legal actions by `noise`.
std::vector<double> preference_log_likelihood(const GameModel& model, const std::vector<Demonstration>& demos,
                                              double noise);

struct CrossTrainConfig {
  int rounds = 5;
  int true_preference = 0;
  double human_noise = 0.1;  // simulated human
  double fit_noise = 0.1;    // noise model assumed when fitting R^H
};

struct CrossTrainRound {
  int round = 0;
  int preference = 0;
  std::vector<double> log_likelihood;
  double team_value = 0.0;  // exact expected team reward of the new robot policy
};

struct CrossTrainResult {
  std::vector<double> policy_estimate;  // [state][aH]
  int preference = 0;
  std::vector<CrossTrainRound> rounds;
  std::vector<Demonstration> demos;
};

// Forward phase: the robot plays its current policy in the normal roles and
// the human's actions update pi^H. Rotation phase: roles swap and the human
// demonstrates the robot's role; R^H is the maximum-likelihood preference.
// The robot then re-solves with the new estimates. Throws
// kRoleSwapUnsupported for environments without role swapping.
CrossTrainResult cross_train(const std::string& env, const nlohmann::json& params, int horizon,
                             const CrossTrainConfig& config, std::uint64_t seed);

nlohmann::ordered_json cross_train_json(const CrossTrainResult& result);

// Human action histograms per human view class, concatenated and
// L2-normalized.
std::vector<double> demo_features(const GameModel& model, const Demonstration& demo);

struct ClusterResult {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
};

// k-means with k-means++ seeding, best of `restarts` by inertia. Throws
// kTooFewDemos when fewer points than clusters are given.
ClusterResult cluster_types(const std::vector<std::vector<double>>& features, int k, std::uint64_t seed,
                            int restarts = 20);

struct TypeModel {
  int id = 0;
  std::vector<double> policy;  // [state][aH]
  int reward_param = 0;
  std::vector<double> log_likelihood;
  std::vector<int> members;
};

struct TypeModelSet {
  std::string env;
  std::vector<TypeModel> types;
  std::vector<int> assignment;
};

// Throws kEmptyCluster if a cluster has no demonstrations.
TypeModelSet fit_type_models(const GameModel& model, const std::vector<Demonstration>& demos,
                             const std::vector<int>& assignment, int k, double fit_noise = 0.1);

nlohmann::ordered_json type_models_to_json(const TypeModelSet& set);
TypeModelSet type_models_from_json(const nlohmann::json& j, const GameModel& model);

// Copy of `base` whose type space is the fitted types (fixed policies).
GameModel model_with_types(const GameModel& base, const TypeModelSet& set);

// Assembly robot that fastens (or, with swapped roles, places) the
// lowest-index item it can; ignores the belief.
std::shared_ptr<RobotPolicy> scripted_assembly_robot(std::shared_ptr<const GameModel> model);

// Demonstrations of the model's fixed types against the scripted robot.
// `labels` receives the planted type of each demonstration.
std::vector<Demonstration> generate_demonstrations(std::shared_ptr<const GameModel> model, int per_type,
                                                   std::uint64_t seed, std::vector<int>* labels = nullptr);

// Fraction of points whose cluster maps to their planted label under the
// best one-to-one relabeling.
double cluster_accuracy(const std::vector<int>& assignment, const std::vector<int>& labels, int k);

struct OnlineInferenceReport {
  std::size_t episodes = 0;
  std::size_t identified = 0;  // posterior on the matching type >= threshold within max_steps
  double rate() const { return episodes ? static_cast<double>(identified) / static_cast<double>(episodes) : 0.0; }
};

// Held-out users drawn from `truth`'s types play the scripted robot while the
// robot filters over `fitted`'s types. `type_map[y]` is the fitted type that
// should be identified for true type y.
OnlineInferenceReport online_type_inference(std::shared_ptr<const GameModel> truth,
                                            std::shared_ptr<const GameModel> fitted,
                                            const std::vector<int>& type_map, std::size_t episodes,
                                            std::uint64_t seed, double threshold = 0.9, int max_steps = 10);

}  // namespace coadapt
