#include "coadapt/app.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "coadapt/environments.hpp"
#include "coadapt/harness.hpp"
#include "coadapt/learning.hpp"
#include "coadapt/policy_tree.hpp"
#include "coadapt/rng.hpp"

namespace coadapt {

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + path.parent_path().string() + ": " + ec.message(), "out");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string(), "out");
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string(), "out");
}

std::string read_text_file(const std::filesystem::path& path, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open " + path.string(), field);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kPolicyFormat = "coadapt-policy";
constexpr int kPolicyVersion = 1;

// Planning model, prior and update rule of an exact condition policy.
struct ExactSetup {
  std::shared_ptr<const GameModel> model;
  Belief b0;
  PlannerOptions options;
};

ExactSetup exact_setup(const std::string& condition, std::shared_ptr<const GameModel> truth, const Belief& prior,
                       PlannerOptions options) {
  if (condition == kConditionRobotOnly) {
    auto derived = std::make_shared<const GameModel>(assistant_model(*truth));
    options.update.on_zero = ZeroLikelihoodPolicy::kSmooth;
    Belief b0 = Belief::uniform(derived->types.size());
    return {std::move(derived), std::move(b0), options};
  }
  return {std::move(truth), prior, options};
}

void check_condition(const std::string& condition, const std::string& field) {
  const auto& names = condition_names();
  if (std::find(names.begin(), names.end(), condition) == names.end())
    throw Error(ErrorCode::kBadCondition, field + ": unknown condition '" + condition + "'", field);
}

int stored_tree_depth(const RobotPolicy& policy) {
  const GameModel& m = policy.planning_model();
  int depth = 0;
  for (int d = 1; d <= m.horizon; ++d) {
    const auto tree = extract_policy_tree(policy, m.initial_state, policy.initial_belief(), d);
    if (count_nodes(tree) > kMaxStoredTreeNodes) break;
    depth = d;
  }
  return depth;
}

ojson estimate_json(const Estimate& e) {
  ojson j;
  j["mean"] = e.mean;
  j["stderr"] = e.stderr_;
  j["n"] = e.n;
  return j;
}

std::string episode_file(std::size_t i) {
  char name[48];
  std::snprintf(name, sizeof name, "episode-%05zu.jsonl", i);
  return name;
}

ojson cmd_solve(const AppConfig& config, const CommandOptions& options) {
  PolicyBundle bundle = solve_policy(config, config.condition);
  const ojson doc = policy_to_json(bundle);
  const auto path = options.out / "policy.json";
  write_text_file(path, doc.dump(2) + "\n");
  ojson j;
  j["command"] = "solve";
  j["condition"] = bundle.condition;
  j["value"] = bundle.value;
  j["expected_robot_reward"] = bundle.expected_robot_reward;
  const GameModel& pm = bundle.policy->planning_model();
  j["first_action"] = pm.robot_actions.at(static_cast<std::size_t>(
      bundle.policy->act(pm.initial_state, pm.initial_context(), bundle.policy->initial_belief(), pm.horizon)));
  j["tree_depth"] = bundle.stored_depth;
  j["policy"] = path.string();
  return j;
}

ojson cmd_tree(const CommandOptions& options) {
  if (options.policy_path.empty()) throw Error(ErrorCode::kConfig, "tree needs --policy", "policy");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(options.policy_path, "policy"));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfig, options.policy_path + ": malformed JSON (" + e.what() + ")", "policy");
  }
  PolicyBundle bundle = policy_from_json(doc);
  const GameModel& pm = bundle.policy->planning_model();
  const int depth = options.depth < 0 ? bundle.stored_depth : options.depth;
  if (depth > pm.horizon)
    throw Error(ErrorCode::kConfig, "depth " + std::to_string(depth) + " exceeds the horizon", "depth");
  const auto tree = extract_policy_tree(*bundle.policy, pm.initial_state, bundle.policy->initial_belief(), depth);
  const auto path = options.out / "tree.dot";
  write_text_file(path, policy_tree_dot(tree, pm));
  ojson j;
  j["command"] = "tree";
  j["condition"] = bundle.condition;
  j["depth"] = depth;
  j["nodes"] = count_nodes(tree);
  j["dot"] = path.string();
  return j;
}

ojson cmd_simulate(const AppConfig& config, const CommandOptions& options) {
  auto truth = std::make_shared<const GameModel>(build_model(config));
  const Belief prior = prior_for(config, *truth);
  const std::string& condition = config.simulate.condition;
  check_condition(condition, "simulate.condition");
  if (config.simulate.type && (*config.simulate.type < 0 || static_cast<std::size_t>(*config.simulate.type) >=
                                                                   truth->types.size()))
    throw Error(ErrorCode::kConfig, "simulate.type: out of range", "simulate.type");
  std::vector<double> mixture = config.population.mixture;
  if (mixture.empty()) mixture.assign(truth->types.size(), 1.0);
  if (mixture.size() != truth->types.size())
    throw Error(ErrorCode::kConfig, "population.mixture: size does not match the type space", "population.mixture");
  const Belief mix(mixture);

  auto policy = make_condition_policy(condition, truth, prior, config.planner);
  const std::size_t n = config.simulate.episodes;
  std::vector<EpisodeTrace> traces(n);
  std::vector<TypeIndex> types(n);
  parallel_for(n, options.jobs, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(config.seed, i);
    types[i] = config.simulate.type ? *config.simulate.type : draw_initial_type(s, mix);
    traces[i] = run_episode(*truth, *policy, types[i], s, condition);
  });

  ojson episodes = ojson::array();
  std::vector<double> rr, rh;
  for (std::size_t i = 0; i < n; ++i) {
    const auto path = options.out / "traces" / episode_file(i);
    write_text_file(path, trace_to_jsonl(traces[i]));
    const auto m = compute_metrics(traces[i], *truth);
    rr.push_back(m.robot_reward);
    rh.push_back(m.human_reward);
    ojson e;
    e["episode"] = i;
    e["seed"] = traces[i].seed;
    e["type"] = truth->types[types[i]].label;
    e["steps"] = m.steps;
    e["robot_reward"] = m.robot_reward;
    e["human_reward"] = m.human_reward;
    e["disagreements"] = m.disagreements;
    e["final_class"] = m.final_class;
    e["trace"] = path.string();
    episodes.push_back(std::move(e));
  }
  ojson j;
  j["command"] = "simulate";
  j["condition"] = condition;
  j["robot_reward"] = estimate_json(estimate(rr));
  j["human_reward"] = estimate_json(estimate(rh));
  j["episodes"] = std::move(episodes);
  write_text_file(options.out / "simulate.json", j.dump(2) + "\n");
  return j;
}

ojson cmd_population(const AppConfig& config, const CommandOptions& options) {
  auto truth = std::make_shared<const GameModel>(build_model(config));
  const Belief prior = prior_for(config, *truth);
  PopulationConfig pc = config.population;
  pc.seed = config.seed;
  pc.jobs = options.jobs;
  const auto result = run_population(truth, prior, pc, config.planner);
  const auto dir = options.out / ("run-" + config_hash(config.document));
  write_population_outputs(result, dir);
  write_text_file(dir / "config.json", config.document.dump(2) + "\n");
  ojson j;
  j["command"] = "population";
  j["run_dir"] = dir.string();
  j["conditions"] = population_summary_json(result)["conditions"];
  return j;
}

ojson cmd_crosstrain(const AppConfig& config, const CommandOptions& options) {
  const auto result = cross_train(config.env, config.params, config.horizon, config.crosstrain, config.seed);
  ojson summary = cross_train_json(result);
  write_text_file(options.out / "crosstrain.json", summary.dump(2) + "\n");
  write_text_file(options.out / "demos.jsonl", demos_to_jsonl(result.demos));
  ojson j;
  j["command"] = "crosstrain";
  j["true_preference"] = config.crosstrain.true_preference;
  j["preference"] = result.preference;
  j["identified"] = result.preference == config.crosstrain.true_preference;
  ojson values = ojson::array();
  for (const auto& r : result.rounds) values.push_back(r.team_value);
  j["team_value"] = std::move(values);
  j["rounds"] = summary["rounds"];
  j["artifacts"] = {(options.out / "crosstrain.json").string(), (options.out / "demos.jsonl").string()};
  return j;
}

ojson cmd_cluster(const AppConfig& config, const CommandOptions& options) {
  const ClusterConfig& cc = config.cluster;
  HumanModelConfig human = config.human;
  human.kind = HumanModelKind::kFixed;
  nlohmann::json params = config.params;
  const bool planted = cc.demos.empty();
  if (planted && config.env == "assembly" && !params.contains("human_noise")) params["human_noise"] = kPlantedDemoNoise;
  auto truth = std::make_shared<const GameModel>(build_env(config.env, params, config.horizon, human));

  std::vector<Demonstration> demos;
  std::vector<int> labels;
  if (planted) {
    if (truth->types.size() != static_cast<std::size_t>(cc.k))
      throw Error(ErrorCode::kConfig,
                  "cluster.k: planted demonstrations need k equal to the number of fixed types (" +
                      std::to_string(truth->types.size()) + ")",
                  "cluster.k");
    demos = generate_demonstrations(truth, cc.per_type, derive_seed(config.seed, 0), &labels);
    write_text_file(options.out / "demos.jsonl", demos_to_jsonl(demos));
  } else {
    demos = demos_from_jsonl(read_text_file(cc.demos, "cluster.demos"), *truth);
  }
  std::vector<std::vector<double>> features;
  features.reserve(demos.size());
  for (const auto& d : demos) features.push_back(demo_features(*truth, d));
  const auto clusters = cluster_types(features, cc.k, derive_seed(config.seed, 1), cc.restarts);
  const auto set = fit_type_models(*truth, demos, clusters.assignment, cc.k, cc.fit_noise);
  write_text_file(options.out / "types.json", type_models_to_json(set).dump(2) + "\n");

  ojson j;
  j["command"] = "cluster";
  j["k"] = cc.k;
  j["demonstrations"] = demos.size();
  j["inertia"] = clusters.inertia;
  ojson types = ojson::array();
  for (const auto& t : set.types) {
    ojson e;
    e["id"] = t.id;
    e["reward_param"] = t.reward_param;
    e["members"] = t.members.size();
    types.push_back(std::move(e));
  }
  j["types"] = std::move(types);
  if (planted) {
    j["accuracy"] = cluster_accuracy(clusters.assignment, labels, cc.k);
    auto fitted = std::make_shared<const GameModel>(model_with_types(*truth, set));
    std::vector<int> type_map(truth->types.size(), 0);
    for (std::size_t y = 0; y < truth->types.size(); ++y)
      for (std::size_t c = 0; c < set.types.size(); ++c)
        if (set.types[c].reward_param == truth->types[static_cast<TypeIndex>(y)].reward_param) {
          type_map[y] = static_cast<int>(c);
          break;
        }
    if (cc.held_out > 0) {
      const auto report = online_type_inference(truth, fitted, type_map, cc.held_out, derive_seed(config.seed, 2));
      j["online_episodes"] = report.episodes;
      j["online_identified"] = report.identified;
      j["online_rate"] = report.rate();
    }
  }
  j["artifacts"] = ojson::array();
  if (planted) j["artifacts"].push_back((options.out / "demos.jsonl").string());
  j["artifacts"].push_back((options.out / "types.json").string());
  return j;
}

}  // namespace

PolicyBundle solve_policy(const AppConfig& config, const std::string& condition) {
  check_condition(condition, "planner.condition");
  PolicyBundle b;
  b.config = config;
  b.condition = condition;
  b.truth = std::make_shared<const GameModel>(build_model(config));
  b.prior = prior_for(config, *b.truth);
  if (condition == kConditionNoAdaptation) {
    b.policy = baseline_no_adaptation(b.truth, b.prior);
  } else {
    auto setup = exact_setup(condition, b.truth, b.prior, config.planner);
    auto sol = solve_exact(setup.model, setup.model->initial_state, setup.b0, setup.options, condition);
    b.policy = sol.policy;
    b.value = sol.value;
  }
  b.expected_robot_reward =
      evaluate_policy_exact(*b.truth, *b.policy, b.truth->initial_state, b.prior, b.truth->horizon);
  if (condition == kConditionNoAdaptation) b.value = b.expected_robot_reward;
  b.stored_depth = stored_tree_depth(*b.policy);
  return b;
}

nlohmann::ordered_json policy_to_json(PolicyBundle& bundle) {
  const RobotPolicy& p = *bundle.policy;
  const GameModel& pm = p.planning_model();
  ojson j;
  j["format"] = kPolicyFormat;
  j["version"] = kPolicyVersion;
  j["condition"] = bundle.condition;
  j["provenance"] = p.provenance();
  j["value"] = bundle.value;
  j["expected_robot_reward"] = bundle.expected_robot_reward;
  j["config"] = bundle.config.document;
  j["initial_belief"] = std::vector<double>(p.initial_belief().probs().begin(), p.initial_belief().probs().end());
  j["tree_depth"] = bundle.stored_depth;
  j["tree"] = policy_tree_to_json(extract_policy_tree(p, pm.initial_state, p.initial_belief(), bundle.stored_depth), pm);
  return j;
}

PolicyBundle policy_from_json(const nlohmann::json& document) {
  PolicyBundle b;
  try {
    if (!document.is_object() || document.value("format", "") != kPolicyFormat ||
        document.value("version", 0) != kPolicyVersion)
      throw Error(ErrorCode::kConfig, "not a version 1 policy document", "policy");
    b.config = parse_config(document.at("config"));
    b.condition = document.at("condition").get<std::string>();
    check_condition(b.condition, "condition");
    b.value = document.at("value").get<double>();
    b.expected_robot_reward = document.at("expected_robot_reward").get<double>();
    b.stored_depth = document.at("tree_depth").get<int>();
    b.truth = std::make_shared<const GameModel>(build_model(b.config));
    b.prior = prior_for(b.config, *b.truth);
    if (b.condition == kConditionNoAdaptation) {
      b.policy = baseline_no_adaptation(b.truth, b.prior);
    } else {
      auto setup = exact_setup(b.condition, b.truth, b.prior, b.config.planner);
      auto solver = std::make_shared<BeliefSpaceSolver>(setup.model, setup.options);
      pin_policy_tree(*solver, document.at("tree"), setup.model->initial_state, setup.b0, setup.options.update);
      b.policy = std::make_shared<ExactPolicy>(std::move(solver), setup.b0, document.at("provenance").get<std::string>());
    }
    // The stored tree must be what this policy produces.
    const GameModel& pm = b.policy->planning_model();
    const auto replay = policy_tree_to_json(
        extract_policy_tree(*b.policy, pm.initial_state, b.policy->initial_belief(), b.stored_depth), pm);
    if (nlohmann::json::parse(replay.dump()) != document.at("tree"))
      throw Error(ErrorCode::kConfig, "stored policy tree does not match its configuration", "policy");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed policy document: ") + e.what(), "policy");
  }
  return b;
}

nlohmann::ordered_json run_command(const std::string& command, const AppConfig& config,
                                   const CommandOptions& options) {
  if (command == "solve") return cmd_solve(config, options);
  if (command == "tree") return cmd_tree(options);
  if (command == "simulate") return cmd_simulate(config, options);
  if (command == "population") return cmd_population(config, options);
  if (command == "crosstrain") return cmd_crosstrain(config, options);
  if (command == "cluster") return cmd_cluster(config, options);
  throw Error(ErrorCode::kConfig, "unknown command '" + command + "'", "command");
}

}  // namespace coadapt
