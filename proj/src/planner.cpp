#include "coadapt/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coadapt/environments.hpp"
#include "coadapt/human_models.hpp"

namespace coadapt {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kBeliefQuantum = 1e-9;

bool improves(double candidate, double best) {
  return candidate > best + kTieTolerance * std::max(1.0, std::abs(best));
}

}  // namespace

// ---- BeliefSpaceSolver -----------------------------------------------------

std::size_t BeliefSpaceSolver::KeyHash::operator()(const std::vector<std::int64_t>& k) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t v : k) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

BeliefSpaceSolver::BeliefSpaceSolver(std::shared_ptr<const GameModel> model, PlannerOptions options)
    : model_(std::move(model)), options_(options) {}

std::vector<std::int64_t> BeliefSpaceSolver::key(StateIndex x, const HumanContext& h, const Belief& b,
                                                 int steps_to_go) const {
  std::vector<std::int64_t> k;
  k.reserve(4 + 2 * h.history.size() + b.size());
  k.push_back(x);
  k.push_back(steps_to_go);
  // Only BAM likelihoods read the context; other models share entries.
  if (model_->human.kind == HumanModelKind::kBam) {
    k.push_back(h.plan);
    const auto recent = h.history.truncated(model_->human.memory);
    k.push_back(static_cast<std::int64_t>(recent.size()));
    for (const auto& e : recent.entries()) {
      k.push_back(e.x);
      k.push_back(e.aR);
    }
  }
  for (double p : b.probs()) k.push_back(std::llround(p / kBeliefQuantum));
  return k;
}

double BeliefSpaceSolver::q_value(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go,
                                  ActionIndex aR) const {
  const GameModel& m = *model_;
  const auto predicted = predict_types(b, aR, m.types);
  const std::size_t nY = m.types.size();
  std::vector<std::vector<double>> likelihood(nY);
  for (std::size_t y = 0; y < nY; ++y)
    if (predicted[y] > 0.0) likelihood[y] = human::action_distribution(m, x, h, aR, static_cast<TypeIndex>(y));

  double q = 0.0;
  for (ActionIndex aH = 0; aH < m.human_action_count(); ++aH) {
    double mass = 0.0;
    double immediate = 0.0;
    for (std::size_t y = 0; y < nY; ++y) {
      if (predicted[y] <= 0.0) continue;
      const double w = predicted[y] * likelihood[y][static_cast<std::size_t>(aH)];
      if (w <= 0.0) continue;
      mass += w;
      immediate += w * m.planning_reward(x, aR, aH, static_cast<TypeIndex>(y));
    }
    if (mass <= 0.0) continue;
    q += immediate;
    if (steps_to_go > 1) {
      const StateIndex next = m.next(x, aR, aH);
      if (!m.terminal(next)) {
        const Belief child = belief_update(b, x, aR, aH, m, h, options_.update);
        const HumanContext child_ctx = human::advance_context(m, h, x, aR, aH);
        q += mass * solve(next, child_ctx, child, steps_to_go - 1).value;
      }
    }
  }
  return q;
}

BeliefSpaceSolver::Entry BeliefSpaceSolver::solve(StateIndex x, const HumanContext& h, const Belief& b,
                                                  int steps_to_go) const {
  if (steps_to_go <= 0 || model_->terminal(x)) return {0.0, 0};
  auto k = key(x, h, b, steps_to_go);
  if (auto it = memo_.find(k); it != memo_.end()) return it->second;

  Entry best{0.0, kNoAction};
  for (ActionIndex aR = 0; aR < model_->robot_action_count(); ++aR) {
    const double q = q_value(x, h, b, steps_to_go, aR);
    if (best.action == kNoAction || improves(q, best.value)) best = {q, aR};
  }
  memo_.emplace(std::move(k), best);
  if (memo_.size() > options_.belief_cap)
    throw Error(ErrorCode::kBeliefExplosion,
                "reachable belief set exceeds the cap (" + std::to_string(memo_.size()) + " > " +
                    std::to_string(options_.belief_cap) + ")",
                "planner.belief_cap");
  return best;
}

double BeliefSpaceSolver::value(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const {
  std::lock_guard lock(mutex_);
  return solve(x, h, b, steps_to_go).value;
}

ActionIndex BeliefSpaceSolver::action(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const {
  std::lock_guard lock(mutex_);
  return solve(x, h, b, steps_to_go).action;
}

std::vector<double> BeliefSpaceSolver::q_values(StateIndex x, const HumanContext& h, const Belief& b,
                                                int steps_to_go) const {
  std::lock_guard lock(mutex_);
  std::vector<double> out(static_cast<std::size_t>(model_->robot_action_count()), 0.0);
  if (steps_to_go <= 0 || model_->terminal(x)) return out;
  for (ActionIndex aR = 0; aR < model_->robot_action_count(); ++aR)
    out[static_cast<std::size_t>(aR)] = q_value(x, h, b, steps_to_go, aR);
  return out;
}

std::size_t BeliefSpaceSolver::memo_size() const {
  std::lock_guard lock(mutex_);
  return memo_.size();
}

void BeliefSpaceSolver::pin(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go, ActionIndex aR) {
  std::lock_guard lock(mutex_);
  memo_[key(x, h, b, steps_to_go)] = {std::numeric_limits<double>::quiet_NaN(), aR};
}

// ---- Policies --------------------------------------------------------------

ExactPolicy::ExactPolicy(std::shared_ptr<BeliefSpaceSolver> solver, Belief b0, std::string provenance)
    : solver_(std::move(solver)), b0_(std::move(b0)), provenance_(std::move(provenance)) {}

ActionIndex ExactPolicy::act(StateIndex x, const HumanContext& h, const Belief& b, int steps_to_go) const {
  if (steps_to_go <= 0 || solver_->model().terminal(x)) return 0;
  return solver_->action(x, h, b, steps_to_go);
}

OpenLoopPolicy::OpenLoopPolicy(std::shared_ptr<const GameModel> model, std::vector<ActionIndex> table,
                               std::string provenance)
    : model_(std::move(model)),
      table_(std::move(table)),
      b0_(Belief::uniform(model_->types.size())),
      provenance_(std::move(provenance)) {}

ActionIndex OpenLoopPolicy::act(StateIndex x, const HumanContext&, const Belief&, int steps_to_go) const {
  if (steps_to_go <= 0) return 0;
  const int tau = std::min(steps_to_go, model_->horizon);
  return table_.at(static_cast<std::size_t>(tau) * model_->states.size() + static_cast<std::size_t>(x));
}

Solution solve_exact(std::shared_ptr<const GameModel> model, StateIndex x0, const Belief& b0, PlannerOptions options,
                     std::string provenance) {
  if (b0.size() != model->types.size())
    throw Error(ErrorCode::kInvalidParams, "prior size does not match the type space", "planner.prior");
  auto solver = std::make_shared<BeliefSpaceSolver>(model, options);
  Solution out;
  out.value = solver->value(x0, model->initial_context(), b0, model->horizon);
  out.policy = std::make_shared<ExactPolicy>(std::move(solver), b0, std::move(provenance));
  return out;
}

// ---- Brute-force oracle ----------------------------------------------------

namespace {

class BruteForce {
 public:
  BruteForce(const GameModel& model, std::uint64_t budget) : m_(model), budget_(budget) {}

  // Weighted value: weights are unnormalized joint masses over the type.
  double node(StateIndex x, const HumanContext& h, const std::vector<double>& w, int steps) {
    if (steps <= 0 || m_.terminal(x)) return 0.0;
    double best = 0.0;
    bool first = true;
    for (ActionIndex aR = 0; aR < m_.robot_action_count(); ++aR) {
      const double q = branch(x, h, w, steps, aR);
      if (first || q > best) best = q;
      first = false;
    }
    return best;
  }

  double branch(StateIndex x, const HumanContext& h, const std::vector<double>& w, int steps, ActionIndex aR) {
    if (++expanded_ > budget_)
      throw Error(ErrorCode::kTooLarge, "brute-force enumeration exceeded its node budget", "node_budget");
    const std::size_t nY = m_.types.size();
    std::vector<double> predicted(nY, 0.0);
    for (std::size_t y0 = 0; y0 < nY; ++y0)
      for (std::size_t y = 0; y < nY; ++y)
        predicted[y] += m_.types.transition(static_cast<TypeIndex>(y0), aR, static_cast<TypeIndex>(y)) * w[y0];
    double total = 0.0;
    for (ActionIndex aH = 0; aH < m_.human_action_count(); ++aH) {
      std::vector<double> joint(nY, 0.0);
      bool any = false;
      for (std::size_t y = 0; y < nY; ++y) {
        if (predicted[y] == 0.0) continue;
        joint[y] = predicted[y] * human::action_likelihood(m_, x, h, aR, aH, static_cast<TypeIndex>(y));
        if (joint[y] > 0.0) any = true;
      }
      if (!any) continue;
      for (std::size_t y = 0; y < nY; ++y)
        if (joint[y] > 0.0) total += joint[y] * m_.planning_reward(x, aR, aH, static_cast<TypeIndex>(y));
      total += node(m_.next(x, aR, aH), human::advance_context(m_, h, x, aR, aH), joint, steps - 1);
    }
    return total;
  }

 private:
  const GameModel& m_;
  std::uint64_t budget_;
  std::uint64_t expanded_ = 0;
};

}  // namespace

double brute_force_value(const GameModel& model, StateIndex x0, const Belief& b0, int steps,
                         std::uint64_t node_budget) {
  BruteForce bf(model, node_budget);
  std::vector<double> w(b0.probs().begin(), b0.probs().end());
  return bf.node(x0, model.initial_context(), w, steps);
}

double brute_force_q(const GameModel& model, StateIndex x0, const Belief& b0, int steps, ActionIndex first,
                     std::uint64_t node_budget) {
  if (steps <= 0 || model.terminal(x0)) return 0.0;
  BruteForce bf(model, node_budget);
  std::vector<double> w(b0.probs().begin(), b0.probs().end());
  return bf.branch(x0, model.initial_context(), w, steps, first);
}

// ---- Baselines -------------------------------------------------------------

std::shared_ptr<OpenLoopPolicy> baseline_no_adaptation(std::shared_ptr<const GameModel> model, const Belief& prior) {
  const GameModel& m = *model;
  const std::size_t S = m.states.size();
  const int T = m.horizon;
  std::vector<double> value(S, 0.0);
  std::vector<ActionIndex> table((static_cast<std::size_t>(T) + 1) * S, 0);
  for (int tau = 1; tau <= T; ++tau) {
    std::vector<double> next_value(S, 0.0);
    for (StateIndex x = 0; x < m.state_count(); ++x) {
      if (m.terminal(x)) continue;
      double best = 0.0;
      ActionIndex best_a = kNoAction;
      for (ActionIndex aR = 0; aR < m.robot_action_count(); ++aR) {
        double q = -std::numeric_limits<double>::infinity();
        for (ActionIndex aH = 0; aH < m.human_action_count(); ++aH) {
          if (!m.human_legal(x, aH)) continue;
          double r = 0.0;
          for (std::size_t y = 0; y < m.types.size(); ++y)
            r += prior[static_cast<TypeIndex>(y)] * m.robot_reward(x, aR, aH, static_cast<TypeIndex>(y));
          q = std::max(q, r + value[static_cast<std::size_t>(m.next(x, aR, aH))]);
        }
        if (best_a == kNoAction || improves(q, best)) {
          best = q;
          best_a = aR;
        }
      }
      next_value[static_cast<std::size_t>(x)] = best;
      table[static_cast<std::size_t>(tau) * S + static_cast<std::size_t>(x)] = best_a;
    }
    value = std::move(next_value);
  }
  return std::make_shared<OpenLoopPolicy>(std::move(model), std::move(table), kConditionNoAdaptation);
}

GameModel assistant_model(const GameModel& truth) {
  GameModel m = truth;
  m.leader_assistant = true;
  m.disagreement_cost = 0.0;
  HumanModelConfig cfg;
  cfg.k = truth.human.memory;
  cfg.eps_plan = truth.human.eps_plan;
  std::vector<std::string> deterministic;
  const std::size_t nH = truth.human_actions.size();
  for (const auto& decl : truth.catalog.fixed_policies) {
    bool point_masses = true;
    for (std::size_t i = 0; i < decl.table.size() && point_masses; ++i)
      point_masses = decl.table[i] == 0.0 || decl.table[i] == 1.0;
    if (point_masses && decl.table.size() == truth.states.size() * nH) deterministic.push_back(decl.name);
  }
  if (!deterministic.empty()) {
    cfg.kind = HumanModelKind::kFixed;
    cfg.fixed_types = deterministic;
  } else if (!truth.catalog.fixed_policies.empty()) {
    cfg.kind = HumanModelKind::kFixed;
  } else {
    // No declared preference policies: keep the human model but freeze types.
    cfg.kind = truth.human.kind;
    cfg.eps_learn = 0.0;
    cfg.alpha_grid = {0.0};
  }
  attach_human_model(m, cfg);
  return m;
}

Solution baseline_robot_adaptation_only(std::shared_ptr<const GameModel> truth, PlannerOptions options) {
  auto derived = std::make_shared<const GameModel>(assistant_model(*truth));
  options.update.on_zero = ZeroLikelihoodPolicy::kSmooth;
  const Belief b0 = Belief::uniform(derived->types.size());
  return solve_exact(derived, derived->initial_state, b0, options, kConditionRobotOnly);
}

const std::vector<std::string>& condition_names() {
  static const std::vector<std::string> names{kConditionNoAdaptation, kConditionRobotOnly, kConditionMutual};
  return names;
}

std::shared_ptr<RobotPolicy> make_condition_policy(const std::string& condition,
                                                   std::shared_ptr<const GameModel> truth, const Belief& prior,
                                                   PlannerOptions options) {
  if (condition == kConditionNoAdaptation) return baseline_no_adaptation(std::move(truth), prior);
  if (condition == kConditionRobotOnly) return baseline_robot_adaptation_only(std::move(truth), options).policy;
  if (condition == kConditionMutual) {
    const StateIndex x0 = truth->initial_state;
    return solve_exact(std::move(truth), x0, prior, options, kConditionMutual).policy;
  }
  throw Error(ErrorCode::kBadCondition, "unknown condition '" + condition + "'", "condition");
}

// ---- Teaching --------------------------------------------------------------

TeachingReport teaching_action_check(std::shared_ptr<const GameModel> model, StateIndex x0, const Belief& b0,
                                     int steps, PlannerOptions options) {
  TeachingReport r;
  BeliefSpaceSolver full(model, options);
  BeliefSpaceSolver myopic(model, options);
  const HumanContext h0 = model->initial_context();
  r.q_values = full.q_values(x0, h0, b0, steps);
  r.optimal_action = full.action(x0, h0, b0, steps);
  r.optimal_value = full.value(x0, h0, b0, steps);
  r.myopic_action = myopic.action(x0, h0, b0, 1);
  r.myopic_immediate = myopic.value(x0, h0, b0, 1);
  if (r.myopic_action >= 0 && static_cast<std::size_t>(r.myopic_action) < r.q_values.size())
    r.myopic_value = r.q_values[static_cast<std::size_t>(r.myopic_action)];
  // A different first action that only ties on value is not teaching.
  r.teaching = steps > 1 && r.optimal_action != r.myopic_action && r.optimal_value > r.myopic_value + 1e-12;
  return r;
}

// ---- Exact policy evaluation -----------------------------------------------

namespace {

struct Evaluator {
  const GameModel& truth;
  const RobotPolicy& policy;

  double run(StateIndex x, const HumanContext& human_ctx, const HumanContext& robot_ctx, const Belief& b,
             TypeIndex y, int steps) const {
    if (steps <= 0 || truth.terminal(x)) return 0.0;
    const GameModel& pm = policy.planning_model();
    const ActionIndex aR = policy.act(x, robot_ctx, b, steps);
    double total = 0.0;
    auto row = truth.types.row(y, aR);
    for (std::size_t y2 = 0; y2 < row.size(); ++y2) {
      if (row[y2] <= 0.0) continue;
      const auto dist = human::action_distribution(truth, x, human_ctx, aR, static_cast<TypeIndex>(y2));
      for (ActionIndex aH = 0; aH < truth.human_action_count(); ++aH) {
        const double p = row[y2] * dist[static_cast<std::size_t>(aH)];
        if (p <= 0.0) continue;
        const double r = truth.robot_reward(x, aR, aH, static_cast<TypeIndex>(y2));
        const Belief b2 = belief_update(b, x, aR, aH, pm, robot_ctx, policy.update_options());
        total += p * (r + run(truth.next(x, aR, aH), human::advance_context(truth, human_ctx, x, aR, aH),
                              human::advance_context(pm, robot_ctx, x, aR, aH), b2, static_cast<TypeIndex>(y2),
                              steps - 1));
      }
    }
    return total;
  }
};

}  // namespace

double evaluate_policy_exact(const GameModel& truth, const RobotPolicy& policy, StateIndex x0,
                             const Belief& type_prior, int steps) {
  Evaluator ev{truth, policy};
  double total = 0.0;
  for (std::size_t y = 0; y < type_prior.size(); ++y) {
    if (type_prior.probs()[y] <= 0.0) continue;
    total += type_prior.probs()[y] * ev.run(x0, truth.initial_context(), policy.planning_model().initial_context(),
                                            policy.initial_belief(), static_cast<TypeIndex>(y), steps);
  }
  return total;
}

}  // namespace coadapt
