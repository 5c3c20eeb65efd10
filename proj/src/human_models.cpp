#include "coadapt/human_models.hpp"

#include <algorithm>
#include <cmath>

namespace coadapt::human {

namespace {

constexpr double kTieTolerance = 1e-12;

const ModalPlan& plan_at(const GameModel& model, int plan) {
  return model.catalog.plans.at(static_cast<std::size_t>(plan));
}

// Plan the human would follow after seeing (x, aR): current plan and the
// robot's modal plan under the updated bounded history.
struct SwitchCandidates {
  int current;
  int modal;
};

SwitchCandidates bam_candidates(const GameModel& model, const HumanContext& h, StateIndex x, ActionIndex aR) {
  History recent = h.history.truncated(model.human.memory);
  recent.push({x, aR});
  auto posterior = bam_infer_plan(recent, model.catalog.plans, model.human.eps_plan);
  return {h.plan, bam_modal_plan(posterior, h.plan)};
}

}  // namespace

std::vector<double> fixed_policy(const GameModel& model, StateIndex x, TypeIndex y) {
  const auto& table = model.human.fixed_tables.at(static_cast<std::size_t>(y));
  const std::size_t nH = model.human_actions.size();
  auto begin = table.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(x) * nH);
  return std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(nH));
}

std::vector<double> bam_infer_plan(const History& recent, std::span<const ModalPlan> plans, double eps_plan) {
  if (recent.empty()) throw Error(ErrorCode::kEmptyHistory, "plan inference needs a non-empty history", "history");
  std::vector<double> post(plans.size(), 1.0);
  for (std::size_t p = 0; p < plans.size(); ++p)
    for (const auto& e : recent.entries())
      if (!plans[p].consistent(e.x, e.aR)) post[p] *= eps_plan;
  double total = 0.0;
  for (double v : post) total += v;
  for (double& v : post) v /= total;
  return post;
}

int bam_modal_plan(std::span<const double> posterior, int current_plan) {
  const double best = *std::max_element(posterior.begin(), posterior.end());
  const double tol = kTieTolerance * std::max(1.0, best);
  if (current_plan >= 0 && static_cast<std::size_t>(current_plan) < posterior.size() &&
      posterior[static_cast<std::size_t>(current_plan)] >= best - tol)
    return current_plan;
  for (std::size_t p = 0; p < posterior.size(); ++p)
    if (posterior[p] >= best - tol) return static_cast<int>(p);
  return current_plan;
}

std::pair<ActionIndex, BamState> bam_step(const BamState& state, const GameModel& model, StateIndex x,
                                          ActionIndex observed_aR, double alpha, Rng& rng) {
  BamState out = state;
  out.history.push({x, observed_aR});
  auto posterior = bam_infer_plan(out.history, model.catalog.plans, model.human.eps_plan);
  const int modal = bam_modal_plan(posterior, out.plan);
  if (modal != out.plan && rng.bernoulli(alpha)) out.plan = modal;
  return {plan_at(model, out.plan).human_action.at(static_cast<std::size_t>(x)), out};
}

ActionIndex best_response(const GameModel& model, StateIndex x, ActionIndex aR, int reward_param) {
  ActionIndex best = kNoAction;
  double best_value = 0.0;
  for (ActionIndex aH = 0; aH < model.human_action_count(); ++aH) {
    if (!model.human_legal(x, aH)) continue;
    const double v = model.human_reward_for_param(x, aR, aH, reward_param);
    if (best == kNoAction || v > best_value + kTieTolerance * std::max(1.0, std::abs(best_value))) {
      best = aH;
      best_value = v;
    }
  }
  return best == kNoAction ? 0 : best;
}

TypeIndex type_transition_step(TypeIndex y, ActionIndex aR, const TypeSpace& types, Rng& rng) {
  auto row = types.row(y, aR);
  // Identity rows consume no randomness.
  if (row[static_cast<std::size_t>(y)] == 1.0) return y;
  return static_cast<TypeIndex>(rng.categorical(row));
}

std::vector<double> action_distribution(const GameModel& model, StateIndex x, const HumanContext& h,
                                        ActionIndex aR, TypeIndex y) {
  std::vector<double> dist(model.human_actions.size(), 0.0);
  switch (model.human.kind) {
    case HumanModelKind::kFixed:
      return fixed_policy(model, x, y);
    case HumanModelKind::kBestResponse:
      dist[static_cast<std::size_t>(best_response(model, x, aR, model.types[y].reward_param))] = 1.0;
      return dist;
    case HumanModelKind::kBam: {
      const auto c = bam_candidates(model, h, x, aR);
      const auto stay = plan_at(model, c.current).human_action.at(static_cast<std::size_t>(x));
      if (c.modal == c.current) {
        dist[static_cast<std::size_t>(stay)] = 1.0;
        return dist;
      }
      const double alpha = model.types[y].adaptability;
      const auto go = plan_at(model, c.modal).human_action.at(static_cast<std::size_t>(x));
      dist[static_cast<std::size_t>(go)] += alpha;
      dist[static_cast<std::size_t>(stay)] += 1.0 - alpha;
      return dist;
    }
  }
  return dist;
}

double action_likelihood(const GameModel& model, StateIndex x, const HumanContext& h, ActionIndex aR,
                         ActionIndex aH, TypeIndex y) {
  if (aH < 0 || aH >= model.human_action_count()) return 0.0;
  return action_distribution(model, x, h, aR, y)[static_cast<std::size_t>(aH)];
}

std::pair<ActionIndex, HumanContext> sample_action(const GameModel& model, StateIndex x, const HumanContext& h,
                                                   ActionIndex aR, TypeIndex y, Rng& rng) {
  switch (model.human.kind) {
    case HumanModelKind::kFixed: {
      auto dist = fixed_policy(model, x, y);
      const ActionIndex aH = rng.categorical(dist);
      return {aH, advance_context(model, h, x, aR, aH)};
    }
    case HumanModelKind::kBestResponse: {
      const ActionIndex aH = best_response(model, x, aR, model.types[y].reward_param);
      return {aH, advance_context(model, h, x, aR, aH)};
    }
    case HumanModelKind::kBam: {
      BamState state{h.plan, h.history.truncated(model.human.memory)};
      auto [aH, next] = bam_step(state, model, x, aR, model.types[y].adaptability, rng);
      return {aH, HumanContext{next.plan, std::move(next.history)}};
    }
  }
  return {0, h};
}

HumanContext advance_context(const GameModel& model, const HumanContext& h, StateIndex x, ActionIndex aR,
                             ActionIndex aH) {
  HumanContext out;
  out.history = h.history.truncated(model.human.memory == 0 ? 1 : model.human.memory);
  out.history.push({x, aR});
  out.plan = h.plan;
  if (model.human.kind != HumanModelKind::kBam) return out;
  const auto& plans = model.catalog.plans;
  const auto xs = static_cast<std::size_t>(x);
  if (plan_at(model, h.plan).human_action.at(xs) == aH) return out;
  for (const auto& p : plans) {
    if (p.human_action.at(xs) == aH) {
      out.plan = p.id;
      return out;
    }
  }
  return out;
}

}  // namespace coadapt::human
