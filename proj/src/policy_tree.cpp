#include "coadapt/policy_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "coadapt/human_models.hpp"

namespace coadapt {

namespace {

PolicyTreeNode expand(const RobotPolicy& policy, StateIndex x, const HumanContext& h, const Belief& b, int depth,
                      int max_depth, int steps_to_go, ActionIndex observed) {
  const GameModel& m = policy.planning_model();
  PolicyTreeNode node;
  node.x = x;
  node.context = h;
  node.belief = b;
  node.depth = depth;
  node.steps_to_go = steps_to_go;
  node.observed = observed;
  if (steps_to_go <= 0 || m.terminal(x)) return node;
  node.action = policy.act(x, h, b, steps_to_go);
  if (depth >= max_depth) return node;

  const auto predicted = predict_types(b, node.action, m.types);
  for (ActionIndex aH = 0; aH < m.human_action_count(); ++aH) {
    bool possible = false;
    for (std::size_t y = 0; y < predicted.size() && !possible; ++y)
      possible = predicted[y] > 0.0 &&
                 human::action_likelihood(m, x, h, node.action, aH, static_cast<TypeIndex>(y)) > 0.0;
    if (!possible) continue;
    const Belief child = belief_update(b, x, node.action, aH, m, h, policy.update_options());
    node.children.push_back(expand(policy, m.next(x, node.action, aH),
                                   human::advance_context(m, h, x, node.action, aH), child, depth + 1, max_depth,
                                   steps_to_go - 1, aH));
  }
  return node;
}

std::string format_belief(const Belief& b) {
  std::string out = "[";
  char buf[32];
  for (std::size_t i = 0; i < b.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.4f", b.probs()[i]);
    if (i) out += ", ";
    out += buf;
  }
  return out + "]";
}

double mean_adaptability(const GameModel& m, const Belief& b) {
  double mean = 0.0;
  for (std::size_t y = 0; y < b.size(); ++y) mean += b.probs()[y] * m.types[static_cast<TypeIndex>(y)].adaptability;
  return mean;
}

std::string fill_color(const GameModel& m, const Belief& b) {
  const double reference = mean_adaptability(m, Belief::uniform(b.size()));
  double shade = 1.0;
  if (reference > 0.0) shade = std::clamp(mean_adaptability(m, b) / reference, 0.0, 1.0);
  // Keep the darkest fill readable under black text.
  const int level = static_cast<int>(std::lround(64.0 + 191.0 * shade));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", level, level, level);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

void emit(std::ostringstream& os, const PolicyTreeNode& node, const GameModel& m, int& next_id, int id) {
  const std::string action =
      node.action == kNoAction ? "-" : m.robot_actions.at(static_cast<std::size_t>(node.action));
  os << "  n" << id << " [label=\"" << escape(action) << "\\n" << format_belief(node.belief) << "\", fillcolor=\""
     << fill_color(m, node.belief) << "\"];\n";
  for (const auto& child : node.children) {
    const int cid = ++next_id;
    emit(os, child, m, next_id, cid);
    const bool disagree = m.disagree(node.x, node.action, child.observed);
    os << "  n" << id << " -> n" << cid << " [label=\""
       << escape(m.human_actions.at(static_cast<std::size_t>(child.observed))) << "\", color=\""
       << (disagree ? "red" : "green") << "\"];\n";
  }
}

}  // namespace

PolicyTreeNode extract_policy_tree(const RobotPolicy& policy, StateIndex x0, const Belief& b0, int depth) {
  const GameModel& m = policy.planning_model();
  if (depth < 0 || depth > m.horizon)
    throw Error(ErrorCode::kInvalidParams, "tree depth must lie in [0, horizon]", "depth");
  return expand(policy, x0, m.initial_context(), b0, 0, depth, m.horizon, kNoAction);
}

std::size_t count_nodes(const PolicyTreeNode& root) {
  std::size_t n = 1;
  for (const auto& c : root.children) n += count_nodes(c);
  return n;
}

std::string policy_tree_dot(const PolicyTreeNode& root, const GameModel& model) {
  std::ostringstream os;
  os << "digraph policy {\n";
  os << "  node [shape=circle, style=filled, fontname=\"Helvetica\"];\n";
  os << "  edge [fontname=\"Helvetica\"];\n";
  int next_id = 0;
  emit(os, root, model, next_id, 0);
  os << "}\n";
  return os.str();
}

nlohmann::ordered_json policy_tree_to_json(const PolicyTreeNode& root, const GameModel& model) {
  nlohmann::ordered_json j;
  j["x"] = model.states.at(static_cast<std::size_t>(root.x));
  j["tau"] = root.steps_to_go;
  j["belief"] = std::vector<double>(root.belief.probs().begin(), root.belief.probs().end());
  j["aR"] = root.action;
  auto children = nlohmann::ordered_json::array();
  for (const auto& c : root.children) {
    nlohmann::ordered_json e;
    e["aH"] = c.observed;
    e["node"] = policy_tree_to_json(c, model);
    children.push_back(std::move(e));
  }
  j["children"] = std::move(children);
  return j;
}

namespace {

void pin_node(BeliefSpaceSolver& solver, const nlohmann::json& node, StateIndex x, const HumanContext& h,
              const Belief& b, int steps_to_go, const BeliefUpdateOptions& update) {
  const GameModel& m = solver.model();
  try {
    if (node.at("x").get<std::vector<int>>() != m.states.at(static_cast<std::size_t>(x)))
      throw Error(ErrorCode::kConfig, "policy tree does not match the model's dynamics", "policy");
    const ActionIndex aR = node.at("aR").get<ActionIndex>();
    if (aR == kNoAction) return;
    if (aR < 0 || aR >= m.robot_action_count())
      throw Error(ErrorCode::kConfig, "policy tree action out of range", "policy");
    solver.pin(x, h, b, steps_to_go, aR);
    for (const auto& e : node.at("children")) {
      const ActionIndex aH = e.at("aH").get<ActionIndex>();
      if (aH < 0 || aH >= m.human_action_count())
        throw Error(ErrorCode::kConfig, "policy tree human action out of range", "policy");
      const Belief child = belief_update(b, x, aR, aH, m, h, update);
      pin_node(solver, e.at("node"), m.next(x, aR, aH), human::advance_context(m, h, x, aR, aH), child,
               steps_to_go - 1, update);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed policy tree: ") + e.what(), "policy");
  }
}

}  // namespace

void pin_policy_tree(BeliefSpaceSolver& solver, const nlohmann::json& tree, StateIndex x0, const Belief& b0,
                     const BeliefUpdateOptions& update) {
  const GameModel& m = solver.model();
  pin_node(solver, tree, x0, m.initial_context(), b0, m.horizon, update);
}

}  // namespace coadapt
