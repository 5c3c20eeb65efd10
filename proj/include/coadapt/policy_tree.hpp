#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "coadapt/planner.hpp"

namespace coadapt {

struct PolicyTreeNode {
  StateIndex x = 0;
  HumanContext context;
  Belief belief;
  ActionIndex action = kNoAction;  // kNoAction at leaves past the horizon or at terminal states
  int depth = 0;
  int steps_to_go = 0;
  ActionIndex observed = kNoAction;  // human action on the edge into this node
  std::vector<PolicyTreeNode> children;  // ascending by `observed`
};

// Unrolls `policy` from (x0, b0) over observed human actions. Children exist
// exactly for the human actions with nonzero likelihood under some type; each
// child belief is belief_update of its parent along that action.
PolicyTreeNode extract_policy_tree(const RobotPolicy& policy, StateIndex x0, const Belief& b0, int depth);

std::size_t count_nodes(const PolicyTreeNode& root);

// Graphviz export. Node label: robot action and belief (4 decimals). Fill is
// white for a belief whose mean adaptability is at or above the uniform
// belief's, darker as mass moves toward low adaptability. Edges carry the
// observed human action, red on disagreement and green otherwise.
std::string policy_tree_dot(const PolicyTreeNode& root, const GameModel& model);

nlohmann::ordered_json policy_tree_to_json(const PolicyTreeNode& root, const GameModel& model);

// Re-walks a serialized tree from (x0, b0), replaying beliefs, and pins every
// stored action into `solver`. Throws kConfig if the tree does not match the
// model.
void pin_policy_tree(BeliefSpaceSolver& solver, const nlohmann::json& tree, StateIndex x0, const Belief& b0,
                     const BeliefUpdateOptions& update);

}  // namespace coadapt
