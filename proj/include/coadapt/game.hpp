#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "coadapt/error.hpp"

namespace coadapt {

using StateIndex = std::int32_t;
using ActionIndex = std::int32_t;
using TypeIndex = std::int32_t;

inline constexpr ActionIndex kNoAction = -1;
inline constexpr TypeIndex kUnknownType = -1;

enum class Agent { kRobot, kHuman };

struct HumanType {
  TypeIndex id = 0;
  double adaptability = 0.0;  // alpha in [0, 1]
  int reward_param = 0;
  std::string label;
};

// Finite latent type space Y together with the kernel P(y' | y, aR).
class TypeSpace {
 public:
  TypeSpace() = default;
  // Static types: identity kernel.
  TypeSpace(std::vector<HumanType> types, int robot_action_count);
  // `kernel` is dense, indexed [aR][from][to].
  TypeSpace(std::vector<HumanType> types, int robot_action_count, std::vector<double> kernel);

  std::size_t size() const { return types_.size(); }
  const HumanType& operator[](TypeIndex y) const { return types_.at(static_cast<std::size_t>(y)); }
  std::span<const HumanType> types() const { return types_; }
  int robot_action_count() const { return robot_actions_; }

  double transition(TypeIndex from, ActionIndex aR, TypeIndex to) const;
  std::span<const double> row(TypeIndex from, ActionIndex aR) const;
  bool is_static() const;

 private:
  std::vector<HumanType> types_;
  int robot_actions_ = 0;
  std::vector<double> kernel_;
};

struct HistoryEntry {
  StateIndex x = 0;
  ActionIndex aR = kNoAction;
  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

// Chronological (x, aR) log. Capacity 0 keeps everything (h_t); capacity k
// keeps only the most recent k entries (h_k).
class History {
 public:
  explicit History(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(HistoryEntry entry);
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<HistoryEntry>& entries() const { return entries_; }
  // Copy holding only the most recent `k` entries, with capacity k.
  History truncated(std::size_t k) const;

  friend bool operator==(const History& a, const History& b) { return a.entries_ == b.entries_; }

 private:
  std::size_t capacity_;
  std::deque<HistoryEntry> entries_;
};

class Belief {
 public:
  Belief() = default;
  // Normalizes; throws kInvalidParams on negative entries or a zero sum.
  explicit Belief(std::vector<double> probs);

  static Belief uniform(std::size_t n);
  static Belief point_mass(std::size_t n, TypeIndex y);

  std::span<const double> probs() const { return probs_; }
  double operator[](TypeIndex y) const { return probs_.at(static_cast<std::size_t>(y)); }
  std::size_t size() const { return probs_.size(); }
  // Entries >= 0 and the sum within `tol` of 1.
  bool valid(double tol = 1e-9) const;

 private:
  std::vector<double> probs_;
};

// A joint plan the human may follow: the human action it prescribes at each
// state and, per state, the bitmask of robot actions consistent with it.
struct ModalPlan {
  int id = 0;
  std::string label;
  std::vector<ActionIndex> human_action;
  std::vector<std::uint64_t> robot_signature;

  bool consistent(StateIndex x, ActionIndex aR) const {
    return (robot_signature.at(static_cast<std::size_t>(x)) >> aR) & 1ULL;
  }
};

struct FixedPolicyDecl {
  std::string name;
  int reward_param = 0;
  std::vector<double> table;  // [state][human action]
};

enum class HumanModelKind { kFixed, kBam, kBestResponse };

const char* to_string(HumanModelKind kind);

// What an environment exposes to the human-model layer.
struct EnvironmentCatalog {
  std::vector<ModalPlan> plans;
  int initial_plan = 0;
  std::vector<FixedPolicyDecl> fixed_policies;
  std::vector<std::string> reward_params;
  int default_reward_param = 0;
  std::vector<ActionIndex> informative_robot_actions;
  int robot_aligned_param = -1;
  std::size_t reachable_state_count = 0;  // analytic value, checked by BFS in tests
  std::vector<std::vector<int>> preference_orders;  // assembly step orders
  HumanModelKind default_human_model = HumanModelKind::kFixed;
  bool swapped_roles = false;
  // Per state, the class of states the human cannot tell apart. Learned human
  // policies pool counts within a class. Empty: every state is its own class.
  std::vector<int> human_view;
};


struct HumanModelSpec {
  HumanModelKind kind = HumanModelKind::kFixed;
  std::size_t memory = 1;  // k for BAM
  double eps_plan = 0.01;
  double eps_learn = 0.0;
  std::vector<std::vector<double>> fixed_tables;  // per type, [state][human action]
};

// Observable human-side context carried by the robot: the plan the human was
// last seen following (BAM) and the bounded interaction history.
struct HumanContext {
  int plan = 0;
  History history{1};
  friend bool operator==(const HumanContext& a, const HumanContext& b) {
    return a.plan == b.plan && a.history == b.history;
  }
};

// The finite two-player game. Built by the environments module, immutable
// afterwards. Reward and transition tables are dense over (s, aR, aH).
struct GameModel {
  std::string env_name;
  std::vector<std::string> component_names;
  std::vector<std::vector<int>> states;
  StateIndex initial_state = 0;
  std::vector<std::string> robot_actions;
  std::vector<std::string> human_actions;
  int horizon = 1;

  std::vector<StateIndex> next_state;       // [s][aR][aH]
  std::vector<std::uint8_t> terminal_flags;  // [s]
  std::vector<double> robot_reward_table;    // [s][aR][aH]
  std::vector<std::vector<double>> human_reward_tables;  // [param][s][aR][aH]
  std::vector<std::uint8_t> disagree_flags;  // [s][aR][aH]
  std::vector<std::uint8_t> human_legal_flags;  // [s][aH]
  std::vector<std::string> state_class;      // per state, "" when unclassified
  // Weight of the disagreement predicate in the planning objective. Not part
  // of the reported robot reward.
  double disagreement_cost = 0.0;
  // R^R == R^H(y): the robot is rewarded with the acting type's human reward.
  bool leader_assistant = false;

  EnvironmentCatalog catalog;
  TypeSpace types;
  HumanModelSpec human;

  int state_count() const { return static_cast<int>(states.size()); }
  int robot_action_count() const { return static_cast<int>(robot_actions.size()); }
  int human_action_count() const { return static_cast<int>(human_actions.size()); }
  std::size_t cell(StateIndex s, ActionIndex aR, ActionIndex aH) const {
    return (static_cast<std::size_t>(s) * robot_actions.size() + static_cast<std::size_t>(aR)) *
               human_actions.size() +
           static_cast<std::size_t>(aH);
  }

  StateIndex next(StateIndex s, ActionIndex aR, ActionIndex aH) const { return next_state[cell(s, aR, aH)]; }
  bool terminal(StateIndex s) const { return terminal_flags[static_cast<std::size_t>(s)] != 0; }
  bool disagree(StateIndex s, ActionIndex aR, ActionIndex aH) const { return disagree_flags[cell(s, aR, aH)] != 0; }
  bool human_legal(StateIndex s, ActionIndex aH) const {
    return human_legal_flags[static_cast<std::size_t>(s) * human_actions.size() + static_cast<std::size_t>(aH)] != 0;
  }

  double robot_reward(StateIndex s, ActionIndex aR, ActionIndex aH, TypeIndex y) const;
  double human_reward(StateIndex s, ActionIndex aR, ActionIndex aH, TypeIndex y) const;
  double human_reward_for_param(StateIndex s, ActionIndex aR, ActionIndex aH, int param) const {
    return human_reward_tables.at(static_cast<std::size_t>(param))[cell(s, aR, aH)];
  }
  // Per-step planning objective: robot reward minus the disagreement cost.
  double planning_reward(StateIndex s, ActionIndex aR, ActionIndex aH, TypeIndex y) const {
    return robot_reward(s, aR, aH, y) - (disagree(s, aR, aH) ? disagreement_cost : 0.0);
  }

  HumanContext initial_context() const;
  int human_view(StateIndex s) const {
    return catalog.human_view.empty() ? s : catalog.human_view[static_cast<std::size_t>(s)];
  }
  int human_view_count() const;
  // Checks table sizes, transition closure, horizon >= 1, kernel rows.
  void validate() const;
};

struct StepResult {
  StateIndex next = 0;
  double robot_reward = 0.0;
  std::vector<double> human_reward_by_type;
};

// Terminal states absorb with zero reward.
StepResult step(const GameModel& model, StateIndex x, ActionIndex aR, ActionIndex aH);

enum class ZeroLikelihoodPolicy { kRaise, kSmooth };

// kSmooth floors every type's likelihood at smoothing_floor, not only when all
// of them vanish.
struct BeliefUpdateOptions {
  ZeroLikelihoodPolicy on_zero = ZeroLikelihoodPolicy::kRaise;
  double smoothing_floor = 1e-6;
};

// Sum_{y0} P(y | y0, aR) b(y0).
std::vector<double> predict_types(const Belief& b, ActionIndex aR, const TypeSpace& types);

// Unnormalized posterior weights  Pr(aH | x, h, aR, y) * predicted(y).
std::vector<double> posterior_weights(const Belief& b, StateIndex x, ActionIndex aR, ActionIndex aH,
                                      const GameModel& model, const HumanContext& h,
                                      const BeliefUpdateOptions& options = {});

// Bayes filter over the latent type. Throws kZeroLikelihood when the
// observation is impossible under every type (unless smoothing is on).
Belief belief_update(const Belief& b, StateIndex x, ActionIndex aR, ActionIndex aH, const GameModel& model,
                     const HumanContext& h, const BeliefUpdateOptions& options = {});

struct TraceStep {
  int t = 0;
  StateIndex state = 0;
  std::vector<int> x;
  ActionIndex aR = kNoAction;
  ActionIndex aH = kNoAction;
  std::vector<double> belief;
  double rR = 0.0;
  double rH = 0.0;
  TypeIndex y = kUnknownType;
};

struct EpisodeTrace {
  std::vector<TraceStep> steps;
  std::uint64_t seed = 0;
  std::string condition;
  StateIndex final_state = 0;
};

double accumulate_reward(const EpisodeTrace& trace, Agent agent);

// One JSON object per step, keys in the fixed order t, x, aR, aH, belief, rR, rH, y.
std::string trace_step_json(const TraceStep& step);
std::string trace_to_jsonl(const EpisodeTrace& trace);
EpisodeTrace trace_from_jsonl(const std::string& text);

}  // namespace coadapt
