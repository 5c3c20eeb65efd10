#include <doctest.h>

#include <regex>

#include <json.hpp>

#include "coadapt/environments.hpp"
#include "coadapt/human_models.hpp"
#include "coadapt/policy_tree.hpp"
#include "oracles.hpp"
#include "probes.hpp"

using namespace coadapt;
using nlohmann::json;

namespace {

struct Fixture {
  std::shared_ptr<const GameModel> model =
      std::make_shared<const GameModel>(build_env("shared-autonomy", json::object(), 5, probes::bam({0.0, 0.5, 1.0})));
  Belief b0{std::vector<double>{0.2, 0.3, 0.5}};
  Solution sol = solve_exact(model, model->initial_state, b0);
};

// Walks the tree and checks every child against an independent posterior.
void check_children(const GameModel& m, const PolicyTreeNode& node, const std::vector<double>& b0,
                    std::vector<oracle::Observation> path) {
  for (const auto& child : node.children) {
    auto p = path;
    p.push_back({node.x, node.context, node.action, child.observed});
    const auto expected = oracle::joint_posterior(m, b0, p);
    for (std::size_t i = 0; i < expected.size(); ++i)
      CHECK(std::abs(child.belief.probs()[i] - expected[i]) <= 1e-9);
    CHECK(child.x == m.next(node.x, node.action, child.observed));
    CHECK(child.depth == node.depth + 1);
    CHECK(child.steps_to_go == node.steps_to_go - 1);
    check_children(m, child, b0, p);
  }
}

}  // namespace

TEST_CASE("depth zero is a single node") {
  Fixture f;
  const auto tree = extract_policy_tree(*f.sol.policy, f.model->initial_state, f.b0, 0);
  CHECK(count_nodes(tree) == 1);
  CHECK(tree.children.empty());
  CHECK(tree.action == f.sol.policy->act(f.model->initial_state, f.model->initial_context(), f.b0, 5));
}

TEST_CASE("children carry Bayes-updated beliefs for every possible observation") {
  Fixture f;
  const auto tree = extract_policy_tree(*f.sol.policy, f.model->initial_state, f.b0, 5);
  CHECK(count_nodes(tree) > 1);
  check_children(*f.model, tree, {0.2, 0.3, 0.5}, {});

  // Children are exactly the observations with nonzero likelihood, ascending.
  for (std::size_t i = 1; i < tree.children.size(); ++i)
    CHECK(tree.children[i - 1].observed < tree.children[i].observed);
  for (ActionIndex aH = 0; aH < f.model->human_action_count(); ++aH) {
    double mass = 0.0;
    for (TypeIndex y = 0; y < 3; ++y)
      mass += f.b0[y] * oracle::likelihood(*f.model, tree.x, tree.context, tree.action, aH, y);
    const bool present = std::any_of(tree.children.begin(), tree.children.end(),
                                     [&](const PolicyTreeNode& c) { return c.observed == aH; });
    CHECK(present == (mass > 0.0));
  }
}

TEST_CASE("depth outside [0, horizon] is rejected") {
  Fixture f;
  CHECK_THROWS_AS(extract_policy_tree(*f.sol.policy, f.model->initial_state, f.b0, 6), Error);
  CHECK_THROWS_AS(extract_policy_tree(*f.sol.policy, f.model->initial_state, f.b0, -1), Error);
}

TEST_CASE("graphviz export") {
  Fixture f;
  const auto tree = extract_policy_tree(*f.sol.policy, f.model->initial_state, f.b0, 2);
  const std::string dot = policy_tree_dot(tree, *f.model);
  CHECK(dot.rfind("digraph policy {\n", 0) == 0);
  CHECK(dot.substr(dot.size() - 2) == "}\n");

  const std::regex node_re(R"re(n\d+ \[label="(left|straight|right|-)\\n\[\d\.\d{4}(, \d\.\d{4})*\]", fillcolor="#[0-9a-f]{6}"\];)re");
  const std::regex edge_re(R"re(n\d+ -> n\d+ \[label="(left|straight|right)", color="(red|green)"\];)re");
  std::size_t nodes = 0, edges = 0;
  std::istringstream in(dot);
  for (std::string line; std::getline(in, line);) {
    if (std::regex_search(line, node_re)) ++nodes;
    if (std::regex_search(line, edge_re)) ++edges;
  }
  CHECK(nodes == count_nodes(tree));
  CHECK(edges == count_nodes(tree) - 1);
  // Root belief printed to four decimals.
  CHECK(dot.find("[0.2000, 0.3000, 0.5000]") != std::string::npos);
}

TEST_CASE("fill darkens as mass moves to low adaptability") {
  Fixture f;
  auto fill_of = [&](std::vector<double> b) {
    PolicyTreeNode n;
    n.x = f.model->initial_state;
    n.belief = Belief(std::move(b));
    n.action = 1;
    const std::string dot = policy_tree_dot(n, *f.model);
    const auto at = dot.find("fillcolor=\"#");
    return std::stoi(dot.substr(at + 12, 2), nullptr, 16);
  };
  CHECK(fill_of({1.0 / 3, 1.0 / 3, 1.0 / 3}) == 255);
  CHECK(fill_of({0.0, 0.0, 1.0}) == 255);
  CHECK(fill_of({0.6, 0.2, 0.2}) < 255);
  CHECK(fill_of({1.0, 0.0, 0.0}) < fill_of({0.6, 0.2, 0.2}));
}

TEST_CASE("serialized trees pin back into a fresh solver") {
  Fixture f;
  const auto tree = extract_policy_tree(*f.sol.policy, f.model->initial_state, f.b0, 5);
  const json stored = json::parse(policy_tree_to_json(tree, *f.model).dump());

  auto solver = std::make_shared<BeliefSpaceSolver>(f.model);
  pin_policy_tree(*solver, stored, f.model->initial_state, f.b0, {});
  ExactPolicy replay(solver, f.b0, "replay");
  const auto again = extract_policy_tree(replay, f.model->initial_state, f.b0, 5);
  CHECK(json::parse(policy_tree_to_json(again, *f.model).dump()) == stored);

  json broken = stored;
  broken["x"] = {0};
  BeliefSpaceSolver other(f.model);
  CHECK_THROWS_AS(pin_policy_tree(other, broken, f.model->initial_state, f.b0, {}), Error);
}
