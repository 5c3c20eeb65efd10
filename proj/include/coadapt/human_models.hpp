#pragma once

#include <span>
#include <utility>
#include <vector>

#include "coadapt/game.hpp"
#include "coadapt/rng.hpp"

namespace coadapt::human {

// Distribution over human actions of a declared fixed-type policy pi^H(x; y).
std::vector<double> fixed_policy(const GameModel& model, StateIndex x, TypeIndex y);

// Posterior over plans given a bounded history: uniform prior times, per
// entry, 1 if the robot action is consistent with the plan and eps_plan
// otherwise. Throws kEmptyHistory on an empty history. This likelihood form
// is a reconstruction, not a published one; swap it here if a better one exists.
std::vector<double> bam_infer_plan(const History& recent, std::span<const ModalPlan> plans, double eps_plan);

// Plan the robot appears to be executing. The current plan wins ties so that
// ambiguous robot actions never trigger a switch; otherwise lowest index.
int bam_modal_plan(std::span<const double> posterior, int current_plan);

struct BamState {
  int plan = 0;
  History history{1};
};

// One step of the bounded-memory human: record (x, aR), infer the robot's
// modal plan, switch to it with probability alpha when it differs from the
// current plan, then emit the current plan's action at x.
std::pair<ActionIndex, BamState> bam_step(const BamState& state, const GameModel& model, StateIndex x,
                                          ActionIndex observed_aR, double alpha, Rng& rng);

// argmax over legal human actions of R^H(x, aR, . ; reward_param); ties go to
// the lowest action index.
ActionIndex best_response(const GameModel& model, StateIndex x, ActionIndex aR, int reward_param);

TypeIndex type_transition_step(TypeIndex y, ActionIndex aR, const TypeSpace& types, Rng& rng);

// Pr(aH | x, h, aR, y) for every human action, with BAM switch randomness
// marginalized analytically.
std::vector<double> action_distribution(const GameModel& model, StateIndex x, const HumanContext& h,
                                        ActionIndex aR, TypeIndex y);

double action_likelihood(const GameModel& model, StateIndex x, const HumanContext& h, ActionIndex aR,
                         ActionIndex aH, TypeIndex y);

// Sample the human's response for a type that has already transitioned.
// Returns the action and the human's own context after acting.
std::pair<ActionIndex, HumanContext> sample_action(const GameModel& model, StateIndex x, const HumanContext& h,
                                                   ActionIndex aR, TypeIndex y, Rng& rng);

// Context update as seen by the robot after observing aH: history gains
// (x, aR); the plan becomes the one the observed action reveals.
HumanContext advance_context(const GameModel& model, const HumanContext& h, StateIndex x, ActionIndex aR,
                             ActionIndex aH);

}  // namespace coadapt::human
