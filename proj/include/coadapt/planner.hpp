#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "coadapt/game.hpp"

namespace coadapt {

struct PlannerOptions {
  std::size_t belief_cap = 1'000'000;  // memo entries before kBeliefExplosion
  BeliefUpdateOptions update;
};

// Robot policy over (x, human context, belief, steps-to-go). Implementations
// must be deterministic and safe to call from several threads.
class RobotPolicy {
 public:
  virtual ~RobotPolicy() = default;
  virtual ActionIndex act(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const = 0;
  // Model whose type space the policy's belief lives in.
  virtual const GameModel& planning_model() const = 0;
  virtual const Belief& initial_belief() const = 0;
  virtual BeliefUpdateOptions update_options() const { return {}; }
  virtual std::string provenance() const = 0;
};

// Finite-horizon backward induction over the reachable (x, h, b) set:
//   V(x,h,b,0) = 0,  V = max_aR sum_aH sum_y w(y) [r(x,aR,aH,y)] + P(aH) V(x',h',b',t-1)
// with w(y) = Pr(aH | x,h,aR,y) * sum_y0 P(y|y0,aR) b(y0). Memoized on the
// belief quantized to 1e-9. Ties go to the lowest robot action index.
class BeliefSpaceSolver {
 public:
  explicit BeliefSpaceSolver(std::shared_ptr<const GameModel> model, PlannerOptions options = {});

  double value(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const;
  ActionIndex action(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const;
  std::vector<double> q_values(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const;
  std::size_t memo_size() const;

  const GameModel& model() const { return *model_; }
  std::shared_ptr<const GameModel> model_ptr() const { return model_; }
  const PlannerOptions& options() const { return options_; }

  // Pins the action at a node without solving it; used when loading a
  // serialized policy. The stored value is NaN.
  void pin(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go, ActionIndex aR);

 private:
  struct Entry {
    double value;
    ActionIndex action;
  };
  struct KeyHash {
    std::size_t operator()(const std::vector<std::int64_t>& k) const noexcept;
  };

  std::vector<std::int64_t> key(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const;
  Entry solve(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const;
  double q_value(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go, ActionIndex aR) const;

  std::shared_ptr<const GameModel> model_;
  PlannerOptions options_;
  mutable std::recursive_mutex mutex_;
  mutable std::unordered_map<std::vector<std::int64_t>, Entry, KeyHash> memo_;
};

class ExactPolicy : public RobotPolicy {
 public:
  ExactPolicy(std::shared_ptr<BeliefSpaceSolver> solver, Belief b0, std::string provenance);

  ActionIndex act(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const override;
  const GameModel& planning_model() const override { return solver_->model(); }
  const Belief& initial_belief() const override { return b0_; }
  BeliefUpdateOptions update_options() const override { return solver_->options().update; }
  std::string provenance() const override { return provenance_; }
  BeliefSpaceSolver& solver() const { return *solver_; }

 private:
  std::shared_ptr<BeliefSpaceSolver> solver_;
  Belief b0_;
  std::string provenance_;
};

// Acts from a table over (x, steps-to-go); ignores the human entirely.
class OpenLoopPolicy : public RobotPolicy {
 public:
  OpenLoopPolicy(std::shared_ptr<const GameModel> model, std::vector<ActionIndex> table, std::string provenance);

  ActionIndex act(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const override;
  const GameModel& planning_model() const override { return *model_; }
  const Belief& initial_belief() const override { return b0_; }
  BeliefUpdateOptions update_options() const override {
    return {ZeroLikelihoodPolicy::kSmooth, 1e-6};
  }
  std::string provenance() const override { return provenance_; }

 private:
  std::shared_ptr<const GameModel> model_;
  std::vector<ActionIndex> table_;  // [steps_to_go][x]
  Belief b0_;
  std::string provenance_;
};

struct Solution {
  std::shared_ptr<ExactPolicy> policy;
  double value = 0.0;
};

// Throws kBeliefExplosion when the memo exceeds options.belief_cap.
Solution solve_exact(std::shared_ptr<const GameModel> model, StateIndex x0, const Belief& b0,
                     PlannerOptions options = {}, std::string provenance = "exact-dp");

// Exhaustive expectimax over robot strategy trees and human action sequences,
// carrying unnormalized joint type weights. No memoization. Throws kTooLarge
// once more than `node_budget` nodes have been expanded.
double brute_force_value(const GameModel& model, StateIndex x0, const Belief& b0, int steps,
                         std::uint64_t node_budget = 20'000'000);
// Same, with the first robot action fixed.
double brute_force_q(const GameModel& model, StateIndex x0, const Belief& b0, int steps, ActionIndex first,
                     std::uint64_t node_budget = 20'000'000);

// Maximizes the prior-averaged robot reward assuming the human complies with
// whatever the robot wants. Ignores belief and observed human actions.
std::shared_ptr<OpenLoopPolicy> baseline_no_adaptation(std::shared_ptr<const GameModel> model, const Belief& prior);

// Planning model for the robot-adaptation-only condition: R^R is replaced by
// the inferred human reward, the human is modeled as non-adaptive and the
// disagreement cost is dropped.
GameModel assistant_model(const GameModel& truth);
Solution baseline_robot_adaptation_only(std::shared_ptr<const GameModel> truth, PlannerOptions options = {});

inline constexpr const char* kConditionNoAdaptation = "no-adaptation";
inline constexpr const char* kConditionRobotOnly = "robot-adaptation-only";
inline constexpr const char* kConditionMutual = "mutual-adaptation";
const std::vector<std::string>& condition_names();

// Builds the policy for one of the three conditions. Throws kBadCondition.
std::shared_ptr<RobotPolicy> make_condition_policy(const std::string& condition,
                                                   std::shared_ptr<const GameModel> truth, const Belief& prior,
                                                   PlannerOptions options = {});

struct TeachingReport {
  bool teaching = false;  // optimal first action differs from the myopic one and is strictly better
  ActionIndex myopic_action = kNoAction;
  ActionIndex optimal_action = kNoAction;
  double myopic_immediate = 0.0;  // one-step value of the myopic action
  double myopic_value = 0.0;      // full-horizon value when opening with the myopic action
  double optimal_value = 0.0;
  std::vector<double> q_values;   // full-horizon value of every first action
};

TeachingReport teaching_action_check(std::shared_ptr<const GameModel> model, StateIndex x0, const Belief& b0,
                                     int steps, PlannerOptions options = {});

// Exact expected total robot reward of `policy` against the model's own human
// when the initial type is drawn from `type_prior`. Enumerates every branch.
double evaluate_policy_exact(const GameModel& truth, const RobotPolicy& policy, StateIndex x0,
                             const Belief& type_prior, int steps);

}  // namespace coadapt
