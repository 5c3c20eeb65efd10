#include "coadapt/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "coadapt/environments.hpp"
#include "coadapt/harness.hpp"
#include "coadapt/rng.hpp"

namespace coadapt {

namespace {

StateIndex step_state(const GameModel& model, const TraceStep& s) {
  const StateIndex x = s.state >= 0 ? s.state : find_state(model, s.x);
  if (x < 0) throw Error(ErrorCode::kInvalidParams, "demonstration state not in the model", "demos");
  return x;
}

Demonstration demo_from_trace(const EpisodeTrace& trace, int id, const std::string& phase) {
  Demonstration d;
  d.id = id;
  d.phase = phase;
  d.steps = trace.steps;
  for (auto& s : d.steps) s.belief.clear();
  return d;
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// Places the first unplaced item in `order`; used by the robot in the
// swapped-role phase.
class OrderedPlacer : public RobotPolicy {
 public:
  OrderedPlacer(std::shared_ptr<const GameModel> model, std::vector<int> order)
      : model_(std::move(model)), order_(std::move(order)), b0_(Belief::uniform(model_->types.size())) {}

  ActionIndex act(StateIndex x, const HumanContext&, const Belief&, int) const override {
    const auto& st = model_->states[static_cast<std::size_t>(x)];
    for (int item : order_)
      if (st[static_cast<std::size_t>(item)] == 0) return item + 1;
    return 0;
  }
  const GameModel& planning_model() const override { return *model_; }
  const Belief& initial_belief() const override { return b0_; }
  BeliefUpdateOptions update_options() const override { return {ZeroLikelihoodPolicy::kSmooth, 1e-6}; }
  std::string provenance() const override { return "ordered-placer"; }

 private:
  std::shared_ptr<const GameModel> model_;
  std::vector<int> order_;
  Belief b0_;
};

class ScriptedAssemblyRobot : public RobotPolicy {
 public:
  explicit ScriptedAssemblyRobot(std::shared_ptr<const GameModel> model)
      : model_(std::move(model)), b0_(Belief::uniform(model_->types.size())) {}

  ActionIndex act(StateIndex x, const HumanContext&, const Belief&, int) const override {
    const auto& st = model_->states[static_cast<std::size_t>(x)];
    const int want = model_->catalog.swapped_roles ? 0 : 1;
    for (std::size_t i = 0; i < st.size(); ++i)
      if (st[i] == want) return static_cast<ActionIndex>(i) + 1;
    return 0;
  }
  const GameModel& planning_model() const override { return *model_; }
  const Belief& initial_belief() const override { return b0_; }
  BeliefUpdateOptions update_options() const override { return {ZeroLikelihoodPolicy::kSmooth, 1e-6}; }
  std::string provenance() const override { return "scripted-assembly"; }

 private:
  std::shared_ptr<const GameModel> model_;
  Belief b0_;
};

// Copy of `base` with a single fixed human type.
GameModel single_type_model(const GameModel& base, const std::vector<double>& table, int reward_param) {
  GameModel m = base;
  m.types = TypeSpace({HumanType{0, 0.0, reward_param, base.catalog.reward_params.at(static_cast<std::size_t>(
                                                            reward_param))}},
                      base.robot_action_count());
  m.human = HumanModelSpec{};
  m.human.kind = HumanModelKind::kFixed;
  m.human.memory = base.human.memory;
  m.human.fixed_tables = {table};
  m.validate();
  return m;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

}  // namespace

// ---- Demonstrations --------------------------------------------------------

std::string demos_to_jsonl(const std::vector<Demonstration>& demos) {
  std::string out;
  for (const auto& d : demos) {
    for (const auto& s : d.steps) {
      nlohmann::ordered_json j;
      j["t"] = s.t;
      j["x"] = s.x;
      j["aR"] = s.aR;
      j["aH"] = s.aH;
      j["rR"] = s.rR;
      j["rH"] = s.rH;
      j["y"] = s.y;
      j["demo"] = d.id;
      j["phase"] = d.phase;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<Demonstration> demos_from_jsonl(const std::string& text, const GameModel& model) {
  std::vector<Demonstration> demos;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceStep s;
      s.t = j.at("t").get<int>();
      s.x = j.at("x").get<std::vector<int>>();
      s.aR = j.at("aR").get<int>();
      s.aH = j.at("aH").get<int>();
      s.rR = j.at("rR").get<double>();
      s.rH = j.at("rH").get<double>();
      s.y = j.at("y").get<int>();
      s.state = find_state(model, s.x);
      if (s.state < 0 || s.aR < 0 || s.aR >= model.robot_action_count() || s.aH < 0 ||
          s.aH >= model.human_action_count() || !model.human_legal(s.state, s.aH))
        throw Error(ErrorCode::kConfig, "demonstration line " + std::to_string(line_no) + " is not legal in the model",
                    "demos");
      const int id = j.at("demo").get<int>();
      const std::string phase = j.at("phase").get<std::string>();
      if (demos.empty() || demos.back().id != id) demos.push_back({id, phase, {}});
      demos.back().steps.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfig, "malformed demonstration line " + std::to_string(line_no) + ": " + e.what(),
                  "demos");
    }
  }
  return demos;
}

FrequencyEstimator::FrequencyEstimator(const GameModel& model)
    : model_(&model),
      counts_(static_cast<std::size_t>(model.human_view_count()) * model.human_actions.size(), 0.0) {}

void FrequencyEstimator::observe(StateIndex x, ActionIndex aH) {
  counts_.at(static_cast<std::size_t>(model_->human_view(x)) * model_->human_actions.size() +
             static_cast<std::size_t>(aH)) += 1.0;
}

std::size_t FrequencyEstimator::visits(StateIndex x) const {
  const std::size_t nH = model_->human_actions.size();
  const std::size_t base = static_cast<std::size_t>(model_->human_view(x)) * nH;
  double n = 0.0;
  for (std::size_t a = 0; a < nH; ++a) n += counts_[base + a];
  return static_cast<std::size_t>(n);
}

std::vector<double> FrequencyEstimator::table() const {
  const std::size_t nH = model_->human_actions.size();
  std::vector<double> t(model_->states.size() * nH, 0.0);
  for (StateIndex x = 0; x < model_->state_count(); ++x) {
    const std::size_t row = static_cast<std::size_t>(x) * nH;
    const std::size_t base = static_cast<std::size_t>(model_->human_view(x)) * nH;
    double total = 0.0;
    for (std::size_t a = 0; a < nH; ++a)
      if (model_->human_legal(x, static_cast<ActionIndex>(a))) total += counts_[base + a] + 1.0;
    for (std::size_t a = 0; a < nH; ++a)
      if (model_->human_legal(x, static_cast<ActionIndex>(a))) t[row + a] = (counts_[base + a] + 1.0) / total;
  }
  return t;
}

std::vector<double> preference_log_likelihood(const GameModel& model, const std::vector<Demonstration>& demos,
                                              double noise) {
  const auto& family = model.catalog.fixed_policies;
  if (model.catalog.preference_orders.empty() || family.empty())
    throw Error(ErrorCode::kInvalidParams, model.env_name + " declares no preference family", "env");
  const std::size_t nH = model.human_actions.size();
  const auto uniform = FrequencyEstimator(model).table();
  std::vector<double> ll(model.catalog.preference_orders.size(), 0.0);
  for (const auto& decl : family) {
    double sum = 0.0;
    for (const auto& d : demos)
      for (const auto& s : d.steps) {
        const StateIndex x = step_state(model, s);
        const std::size_t k = static_cast<std::size_t>(x) * nH + static_cast<std::size_t>(s.aH);
        sum += std::log((1.0 - noise) * decl.table[k] + noise * uniform[k]);
      }
    ll.at(static_cast<std::size_t>(decl.reward_param)) = sum;
  }
  return ll;
}

// ---- Cross-training --------------------------------------------------------

CrossTrainResult cross_train(const std::string& env, const nlohmann::json& params, int horizon,
                             const CrossTrainConfig& config, std::uint64_t seed) {
  if (env != "assembly")
    throw Error(ErrorCode::kRoleSwapUnsupported, env + " does not support role swapping", "env");
  if (config.rounds < 1) throw Error(ErrorCode::kInvalidParams, "rounds must be >= 1", "crosstrain.rounds");
  if (!(config.fit_noise > 0.0 && config.fit_noise <= 1.0))
    throw Error(ErrorCode::kInvalidParams, "fit_noise must lie in (0, 1]", "crosstrain.fit_noise");

  auto variant = [&](const char* roles, double noise) {
    nlohmann::json p = params.is_object() ? params : nlohmann::json::object();
    p["roles"] = roles;
    p["human_noise"] = noise;
    HumanModelConfig hm;
    hm.kind = HumanModelKind::kFixed;
    return std::make_shared<const GameModel>(build_env(env, p, horizon, hm));
  };
  const auto truth = variant("normal", config.human_noise);
  const auto truth_swapped = variant("swapped", config.human_noise);
  const auto family_swapped = variant("swapped", 0.0);
  const int n_pref = static_cast<int>(truth->catalog.preference_orders.size());
  if (config.true_preference < 0 || config.true_preference >= n_pref)
    throw Error(ErrorCode::kInvalidParams, "true_preference out of range", "crosstrain.true_preference");

  CrossTrainResult result;
  FrequencyEstimator freq(*truth);
  std::vector<Demonstration> rotation_demos;
  int preference = 0;
  PlannerOptions options;
  options.update.on_zero = ZeroLikelihoodPolicy::kSmooth;

  auto plan = [&]() {
    auto m = std::make_shared<const GameModel>(single_type_model(*truth, freq.table(), preference));
    return solve_exact(m, m->initial_state, Belief::uniform(1), options, "cross-trained").policy;
  };
  auto policy = plan();
  const Belief planted = Belief::point_mass(truth->types.size(), config.true_preference);
  int demo_id = 0;
  for (int round = 1; round <= config.rounds; ++round) {
    const auto forward = run_episode(*truth, *policy, config.true_preference,
                                     derive_seed(seed, 2 * static_cast<std::uint64_t>(round)), "forward");
    for (const auto& s : forward.steps) freq.observe(s.state, s.aH);
    result.demos.push_back(demo_from_trace(forward, demo_id++, "forward"));

    OrderedPlacer placer(truth_swapped, truth->catalog.preference_orders[static_cast<std::size_t>(preference)]);
    const auto rotation = run_episode(*truth_swapped, placer, config.true_preference,
                                      derive_seed(seed, 2 * static_cast<std::uint64_t>(round) + 1), "rotation");
    rotation_demos.push_back(demo_from_trace(rotation, demo_id++, "rotation"));
    result.demos.push_back(rotation_demos.back());

    CrossTrainRound r;
    r.round = round;
    r.log_likelihood = preference_log_likelihood(*family_swapped, rotation_demos, config.fit_noise);
    preference = argmax_lowest(r.log_likelihood);
    r.preference = preference;
    policy = plan();
    r.team_value = evaluate_policy_exact(*truth, *policy, truth->initial_state, planted, truth->horizon);
    result.rounds.push_back(std::move(r));
  }
  result.preference = preference;
  result.policy_estimate = freq.table();
  return result;
}

nlohmann::ordered_json cross_train_json(const CrossTrainResult& result) {
  nlohmann::ordered_json j;
  j["preference"] = result.preference;
  auto rounds = nlohmann::ordered_json::array();
  for (const auto& r : result.rounds) {
    nlohmann::ordered_json e;
    e["round"] = r.round;
    e["preference"] = r.preference;
    e["log_likelihood"] = r.log_likelihood;
    e["team_value"] = r.team_value;
    rounds.push_back(std::move(e));
  }
  j["rounds"] = std::move(rounds);
  j["policy_estimate"] = result.policy_estimate;
  return j;
}

// ---- Clustering ------------------------------------------------------------

std::vector<double> demo_features(const GameModel& model, const Demonstration& demo) {
  const std::size_t nH = model.human_actions.size();
  const auto classes = static_cast<std::size_t>(model.human_view_count());
  std::vector<double> f(classes * nH, 0.0);
  std::vector<double> visits(classes, 0.0);
  for (const auto& s : demo.steps) {
    const auto v = static_cast<std::size_t>(model.human_view(step_state(model, s)));
    f[v * nH + static_cast<std::size_t>(s.aH)] += 1.0;
    visits[v] += 1.0;
  }
  for (std::size_t v = 0; v < classes; ++v)
    if (visits[v] > 0.0)
      for (std::size_t a = 0; a < nH; ++a) f[v * nH + a] /= visits[v];
  double norm = 0.0;
  for (double x : f) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& x : f) x /= norm;
  return f;
}

ClusterResult cluster_types(const std::vector<std::vector<double>>& features, int k, std::uint64_t seed,
                            int restarts) {
  const std::size_t n = features.size();
  if (k < 1 || n < static_cast<std::size_t>(k))
    throw Error(ErrorCode::kTooFewDemos,
                "need at least " + std::to_string(k) + " demonstrations, got " + std::to_string(n), "cluster.k");
  if (restarts < 1) throw Error(ErrorCode::kInvalidParams, "restarts must be >= 1", "cluster.restarts");
  const std::size_t dim = features.front().size();
  for (const auto& f : features)
    if (f.size() != dim) throw Error(ErrorCode::kInvalidParams, "feature vectors differ in length", "demos");
  const auto K = static_cast<std::size_t>(k);

  ClusterResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::vector<std::vector<double>> centroids;
    centroids.push_back(features[rng.below(n)]);
    std::vector<double> d2(n);
    while (centroids.size() < K) {
      for (std::size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : centroids) m = std::min(m, squared_distance(features[i], c));
        d2[i] = m;
      }
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      // All points coincide with a centroid: any further pick is a duplicate.
      const std::size_t pick = total > 0.0 ? static_cast<std::size_t>(rng.categorical(d2)) : rng.below(n);
      centroids.push_back(features[pick]);
    }

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        int arg = 0;
        double m = squared_distance(features[i], centroids[0]);
        for (std::size_t c = 1; c < K; ++c) {
          const double d = squared_distance(features[i], centroids[c]);
          if (d < m) {
            m = d;
            arg = static_cast<int>(c);
          }
        }
        if (assign[i] != arg) changed = true;
        assign[i] = arg;
      }
      if (!changed) break;
      std::vector<std::vector<double>> sums(K, std::vector<double>(dim, 0.0));
      std::vector<std::size_t> sizes(K, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(assign[i]);
        ++sizes[c];
        for (std::size_t d = 0; d < dim; ++d) sums[c][d] += features[i][d];
      }
      for (std::size_t c = 0; c < K; ++c) {
        if (sizes[c] == 0) {
          // Re-seed an empty cluster at the point farthest from its centroid.
          std::size_t far = 0;
          double far_d = -1.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double d = squared_distance(features[i], centroids[static_cast<std::size_t>(assign[i])]);
            if (d > far_d) {
              far_d = d;
              far = i;
            }
          }
          centroids[c] = features[far];
          continue;
        }
        for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
      }
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += squared_distance(features[i], centroids[static_cast<std::size_t>(assign[i])]);
    if (inertia < best.inertia - 1e-12) {
      best.inertia = inertia;
      best.assignment = assign;
      best.centroids = centroids;
    }
  }

  // Canonical labels: clusters numbered by first appearance.
  std::vector<int> relabel(K, -1);
  int next = 0;
  for (int& a : best.assignment) {
    auto& l = relabel[static_cast<std::size_t>(a)];
    if (l < 0) l = next++;
    a = l;
  }
  std::vector<std::vector<double>> ordered(K);
  for (std::size_t c = 0; c < K; ++c) {
    if (relabel[c] < 0) relabel[c] = next++;
    ordered[static_cast<std::size_t>(relabel[c])] = best.centroids[c];
  }
  best.centroids = std::move(ordered);
  return best;
}

TypeModelSet fit_type_models(const GameModel& model, const std::vector<Demonstration>& demos,
                             const std::vector<int>& assignment, int k, double fit_noise) {
  if (assignment.size() != demos.size())
    throw Error(ErrorCode::kInvalidParams, "assignment size does not match the demonstrations", "assignment");
  TypeModelSet set;
  set.env = model.env_name;
  set.assignment = assignment;
  for (int c = 0; c < k; ++c) {
    TypeModel t;
    t.id = c;
    FrequencyEstimator freq(model);
    std::vector<Demonstration> members;
    for (std::size_t i = 0; i < demos.size(); ++i) {
      if (assignment[i] != c) continue;
      t.members.push_back(static_cast<int>(i));
      members.push_back(demos[i]);
      for (const auto& s : demos[i].steps) freq.observe(step_state(model, s), s.aH);
    }
    if (members.empty())
      throw Error(ErrorCode::kEmptyCluster, "cluster " + std::to_string(c) + " has no demonstrations", "assignment");
    t.policy = freq.table();
    if (!model.catalog.preference_orders.empty()) {
      t.log_likelihood = preference_log_likelihood(model, members, fit_noise);
      t.reward_param = argmax_lowest(t.log_likelihood);
    } else {
      t.reward_param = model.catalog.default_reward_param;
    }
    set.types.push_back(std::move(t));
  }
  return set;
}

nlohmann::ordered_json type_models_to_json(const TypeModelSet& set) {
  nlohmann::ordered_json j;
  j["format"] = "coadapt-types";
  j["version"] = 1;
  j["env"] = set.env;
  auto types = nlohmann::ordered_json::array();
  for (const auto& t : set.types) {
    nlohmann::ordered_json e;
    e["id"] = t.id;
    e["reward_param"] = t.reward_param;
    e["log_likelihood"] = t.log_likelihood;
    e["members"] = t.members;
    e["policy"] = t.policy;
    types.push_back(std::move(e));
  }
  j["types"] = std::move(types);
  j["assignment"] = set.assignment;
  return j;
}

TypeModelSet type_models_from_json(const nlohmann::json& j, const GameModel& model) {
  try {
    if (j.at("format").get<std::string>() != "coadapt-types" || j.at("version").get<int>() != 1)
      throw Error(ErrorCode::kConfig, "not a version 1 type model document", "types");
    TypeModelSet set;
    set.env = j.at("env").get<std::string>();
    if (set.env != model.env_name) throw Error(ErrorCode::kConfig, "type models are for " + set.env, "types");
    set.assignment = j.at("assignment").get<std::vector<int>>();
    for (const auto& e : j.at("types")) {
      TypeModel t;
      t.id = e.at("id").get<int>();
      t.reward_param = e.at("reward_param").get<int>();
      t.log_likelihood = e.at("log_likelihood").get<std::vector<double>>();
      t.members = e.at("members").get<std::vector<int>>();
      t.policy = e.at("policy").get<std::vector<double>>();
      if (t.policy.size() != model.states.size() * model.human_actions.size())
        throw Error(ErrorCode::kConfig, "type policy table has the wrong size", "types");
      set.types.push_back(std::move(t));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed type models: ") + e.what(), "types");
  }
}

GameModel model_with_types(const GameModel& base, const TypeModelSet& set) {
  GameModel m = base;
  std::vector<HumanType> types;
  m.human = HumanModelSpec{};
  m.human.kind = HumanModelKind::kFixed;
  m.human.memory = base.human.memory;
  for (const auto& t : set.types) {
    types.push_back({static_cast<TypeIndex>(types.size()), 0.0, t.reward_param, "cluster-" + std::to_string(t.id)});
    m.human.fixed_tables.push_back(t.policy);
  }
  m.types = TypeSpace(std::move(types), base.robot_action_count());
  m.validate();
  return m;
}

std::shared_ptr<RobotPolicy> scripted_assembly_robot(std::shared_ptr<const GameModel> model) {
  if (model->env_name != "assembly")
    throw Error(ErrorCode::kInvalidParams, "the scripted robot needs the assembly environment", "env");
  return std::make_shared<ScriptedAssemblyRobot>(std::move(model));
}

std::vector<Demonstration> generate_demonstrations(std::shared_ptr<const GameModel> model, int per_type,
                                                   std::uint64_t seed, std::vector<int>* labels) {
  auto robot = scripted_assembly_robot(model);
  std::vector<Demonstration> demos;
  if (labels) labels->clear();
  const std::size_t nY = model->types.size();
  // Interleave types so a prefix of the list is still balanced.
  for (int i = 0; i < per_type; ++i) {
    for (std::size_t y = 0; y < nY; ++y) {
      const auto id = static_cast<int>(demos.size());
      const auto trace = run_episode(*model, *robot, static_cast<TypeIndex>(y),
                                     derive_seed(seed, static_cast<std::uint64_t>(id)), "forward");
      demos.push_back(demo_from_trace(trace, id, "forward"));
      if (labels) labels->push_back(static_cast<int>(y));
    }
  }
  return demos;
}

double cluster_accuracy(const std::vector<int>& assignment, const std::vector<int>& labels, int k) {
  if (assignment.size() != labels.size() || assignment.empty()) return 0.0;
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] >= 0 && labels[i] < k && perm[static_cast<std::size_t>(labels[i])] == assignment[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

OnlineInferenceReport online_type_inference(std::shared_ptr<const GameModel> truth,
                                            std::shared_ptr<const GameModel> fitted,
                                            const std::vector<int>& type_map, std::size_t episodes,
                                            std::uint64_t seed, double threshold, int max_steps) {
  if (type_map.size() != truth->types.size())
    throw Error(ErrorCode::kInvalidParams, "type map does not cover the true types", "type_map");
  auto robot = scripted_assembly_robot(fitted);
  OnlineInferenceReport report;
  report.episodes = episodes;
  for (std::size_t i = 0; i < episodes; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    Rng type_rng(splitmix64(s));
    const auto y = static_cast<TypeIndex>(type_rng.below(truth->types.size()));
    const auto trace = run_episode(*truth, *robot, y, s, "held-out");
    const auto target = static_cast<std::size_t>(type_map[static_cast<std::size_t>(y)]);
    for (const auto& step : trace.steps) {
      if (step.t >= max_steps) break;
      if (step.belief.at(target) >= threshold) {
        ++report.identified;
        break;
      }
    }
  }
  return report;
}

}  // namespace coadapt
