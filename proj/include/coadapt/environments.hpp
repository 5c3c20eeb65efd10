#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coadapt/game.hpp"

namespace coadapt {

struct HumanModelConfig {
  std::optional<HumanModelKind> kind;  // unset: the environment's default model
  std::size_t k = 1;
  std::vector<double> alpha_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  double eps_learn = 0.0;
  double eps_plan = 0.01;
  std::vector<std::string> fixed_types;  // empty: every declared fixed policy
};

// Environments:
//
//   table-carrying   x = (orientation, step). Orientation moves +/-1 only when
//                    both agents pick the same rotation; goals at +/-goal_offset.
//                    Reachable states from (0, 0):
//                      sum_{s=0..T} min(2s+1, 2g-1) + 2 * max(0, T-g+1)
//   shared-autonomy  x = (cell) on a 1 x width grid; only the robot's executed
//                    motion moves the arm. Reachable states: goal_right-goal_left+1.
//   table-clearing   x = bitmask of removed objects. Reachable states: 2^objects.
//   assembly         x = per-item status (0 unplaced, 1 placed, 2 fastened).
//                    Reachable states: 3^items.
//
// Unknown parameter keys are rejected with kInvalidParams naming the key.
GameModel build_env(const std::string& name, const nlohmann::json& params, int horizon,
                    const HumanModelConfig& human = {});

std::vector<std::string> environment_names();

// Attach (or replace) the human model and type space on an existing model.
void attach_human_model(GameModel& model, const HumanModelConfig& human);

StateIndex find_state(const GameModel& model, const std::vector<int>& components);

// Assembly helpers shared with the cross-training code.
namespace assembly {
int next_item(const GameModel& model, StateIndex s, int preference);
}

}  // namespace coadapt
