#include "coadapt/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "coadapt/human_models.hpp"

namespace coadapt {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kUnknownEnvironment: return "UnknownEnvironment";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kZeroLikelihood: return "ZeroLikelihood";
    case ErrorCode::kBeliefExplosion: return "BeliefExplosion";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kEmptyHistory: return "EmptyHistory";
    case ErrorCode::kTooFewDemos: return "TooFewDemos";
    case ErrorCode::kEmptyCluster: return "EmptyCluster";
    case ErrorCode::kRoleSwapUnsupported: return "RoleSwapUnsupported";
    case ErrorCode::kBadCondition: return "BadCondition";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

const char* to_string(HumanModelKind kind) {
  switch (kind) {
    case HumanModelKind::kFixed: return "fixed";
    case HumanModelKind::kBam: return "bam";
    case HumanModelKind::kBestResponse: return "best-response";
  }
  return "unknown";
}

// ---- TypeSpace -------------------------------------------------------------

TypeSpace::TypeSpace(std::vector<HumanType> types, int robot_action_count)
    : types_(std::move(types)), robot_actions_(robot_action_count) {
  const std::size_t n = types_.size();
  kernel_.assign(static_cast<std::size_t>(robot_actions_) * n * n, 0.0);
  for (int a = 0; a < robot_actions_; ++a)
    for (std::size_t y = 0; y < n; ++y) kernel_[(static_cast<std::size_t>(a) * n + y) * n + y] = 1.0;
}

TypeSpace::TypeSpace(std::vector<HumanType> types, int robot_action_count, std::vector<double> kernel)
    : types_(std::move(types)), robot_actions_(robot_action_count), kernel_(std::move(kernel)) {
  const std::size_t n = types_.size();
  if (kernel_.size() != static_cast<std::size_t>(robot_actions_) * n * n)
    throw Error(ErrorCode::kInvalidParams, "type kernel has wrong size", "kernel");
  for (int a = 0; a < robot_actions_; ++a) {
    for (std::size_t y = 0; y < n; ++y) {
      auto r = row(static_cast<TypeIndex>(y), a);
      double sum = 0.0;
      for (double p : r) {
        if (p < 0.0) throw Error(ErrorCode::kInvalidParams, "negative type transition probability", "kernel");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw Error(ErrorCode::kInvalidParams, "type transition row does not sum to 1", "kernel");
    }
  }
}

double TypeSpace::transition(TypeIndex from, ActionIndex aR, TypeIndex to) const {
  const std::size_t n = types_.size();
  return kernel_[(static_cast<std::size_t>(aR) * n + static_cast<std::size_t>(from)) * n +
                 static_cast<std::size_t>(to)];
}

std::span<const double> TypeSpace::row(TypeIndex from, ActionIndex aR) const {
  const std::size_t n = types_.size();
  return std::span<const double>(kernel_).subspan((static_cast<std::size_t>(aR) * n + static_cast<std::size_t>(from)) * n, n);
}

bool TypeSpace::is_static() const {
  const std::size_t n = types_.size();
  for (int a = 0; a < robot_actions_; ++a)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t z = 0; z < n; ++z)
        if (kernel_[(static_cast<std::size_t>(a) * n + y) * n + z] != (y == z ? 1.0 : 0.0)) return false;
  return true;
}

// ---- History / Belief ------------------------------------------------------

void History::push(HistoryEntry entry) {
  entries_.push_back(entry);
  if (capacity_ > 0)
    while (entries_.size() > capacity_) entries_.pop_front();
}

History History::truncated(std::size_t k) const {
  History out(k);
  for (const auto& e : entries_) out.push(e);
  return out;
}

Belief::Belief(std::vector<double> probs) : probs_(std::move(probs)) {
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::kInvalidParams, "belief entries must be finite and >= 0", "belief");
    sum += p;
  }
  if (!(sum > 0.0)) throw Error(ErrorCode::kInvalidParams, "belief has zero mass", "belief");
  for (double& p : probs_) p /= sum;
}

Belief Belief::uniform(std::size_t n) { return Belief(std::vector<double>(n, 1.0)); }

Belief Belief::point_mass(std::size_t n, TypeIndex y) {
  std::vector<double> p(n, 0.0);
  p.at(static_cast<std::size_t>(y)) = 1.0;
  return Belief(std::move(p));
}

bool Belief::valid(double tol) const {
  double sum = 0.0;
  for (double p : probs_) {
    if (p < 0.0) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

// ---- GameModel -------------------------------------------------------------

double GameModel::robot_reward(StateIndex s, ActionIndex aR, ActionIndex aH, TypeIndex y) const {
  if (leader_assistant) return human_reward(s, aR, aH, y);
  return robot_reward_table[cell(s, aR, aH)];
}

double GameModel::human_reward(StateIndex s, ActionIndex aR, ActionIndex aH, TypeIndex y) const {
  const int param = types.size() == 0 ? catalog.default_reward_param : types[y].reward_param;
  return human_reward_for_param(s, aR, aH, param);
}

HumanContext GameModel::initial_context() const {
  HumanContext ctx;
  ctx.plan = catalog.initial_plan;
  ctx.history = History(human.memory == 0 ? 1 : human.memory);
  return ctx;
}

int GameModel::human_view_count() const {
  if (catalog.human_view.empty()) return state_count();
  return *std::max_element(catalog.human_view.begin(), catalog.human_view.end()) + 1;
}

void GameModel::validate() const {
  const std::size_t S = states.size();
  const std::size_t cells = S * robot_actions.size() * human_actions.size();
  auto fail = [](const std::string& msg, const std::string& field) {
    throw Error(ErrorCode::kInvalidParams, msg, field);
  };
  if (S == 0 || robot_actions.empty() || human_actions.empty()) fail("empty state or action set", "states");
  if (horizon < 1) fail("horizon must be >= 1", "horizon");
  if (initial_state < 0 || static_cast<std::size_t>(initial_state) >= S) fail("initial state out of range", "start");
  if (next_state.size() != cells || robot_reward_table.size() != cells || disagree_flags.size() != cells)
    fail("transition/reward tables have wrong size", "tables");
  if (terminal_flags.size() != S || state_class.size() != S) fail("per-state tables have wrong size", "tables");
  if (human_legal_flags.size() != S * human_actions.size()) fail("legality table has wrong size", "tables");
  if (!catalog.human_view.empty() && catalog.human_view.size() != S) fail("human view table has wrong size", "tables");
  for (StateIndex n : next_state)
    if (n < 0 || static_cast<std::size_t>(n) >= S) fail("transition leaves the state set", "transition");
  for (const auto& t : human_reward_tables)
    if (t.size() != cells) fail("human reward table has wrong size", "tables");
  for (double r : robot_reward_table)
    if (!std::isfinite(r)) fail("non-finite robot reward", "rewards");
  if (types.size() == 0) fail("empty type space", "types");
  for (const auto& ty : types.types()) {
    if (ty.adaptability < 0.0 || ty.adaptability > 1.0) fail("adaptability outside [0,1]", "alpha_grid");
    if (ty.reward_param < 0 || static_cast<std::size_t>(ty.reward_param) >= human_reward_tables.size())
      fail("type reward_param out of range", "reward_param");
  }
  if (types.robot_action_count() != robot_action_count()) fail("type kernel action count mismatch", "kernel");
  if (human.kind == HumanModelKind::kFixed) {
    if (human.fixed_tables.size() != types.size()) fail("fixed policy count does not match types", "fixed_types");
    for (const auto& table : human.fixed_tables) {
      if (table.size() != S * human_actions.size()) fail("fixed policy table has wrong size", "fixed_types");
      for (std::size_t s = 0; s < S; ++s) {
        double sum = 0.0;
        for (std::size_t a = 0; a < human_actions.size(); ++a) sum += table[s * human_actions.size() + a];
        if (std::abs(sum - 1.0) > 1e-9) fail("fixed policy row does not sum to 1", "fixed_types");
      }
    }
  }
  if (human.kind == HumanModelKind::kBam) {
    if (catalog.plans.size() < 2) fail("BAM needs at least two plans", "human_model.model");
    if (human.memory == 0) fail("BAM memory k must be positive", "human_model.k");
    // The plan followed must be recoverable from the observed action.
    for (std::size_t s = 0; s < S; ++s) {
      if (terminal_flags[s]) continue;
      for (std::size_t i = 0; i < catalog.plans.size(); ++i)
        for (std::size_t j = i + 1; j < catalog.plans.size(); ++j)
          if (catalog.plans[i].human_action[s] == catalog.plans[j].human_action[s])
            fail("plans prescribe the same human action at a non-terminal state", "plans");
    }
  }
}

StepResult step(const GameModel& model, StateIndex x, ActionIndex aR, ActionIndex aH) {
  StepResult out;
  out.human_reward_by_type.assign(model.types.size(), 0.0);
  if (model.terminal(x)) {
    out.next = x;
    return out;
  }
  out.next = model.next(x, aR, aH);
  if (!model.leader_assistant) out.robot_reward = model.robot_reward_table[model.cell(x, aR, aH)];
  for (std::size_t y = 0; y < model.types.size(); ++y)
    out.human_reward_by_type[y] = model.human_reward(x, aR, aH, static_cast<TypeIndex>(y));
  if (model.leader_assistant)
    out.robot_reward = model.human_reward_for_param(x, aR, aH, model.catalog.default_reward_param);
  return out;
}

// ---- Belief filter ---------------------------------------------------------

std::vector<double> predict_types(const Belief& b, ActionIndex aR, const TypeSpace& types) {
  const std::size_t n = types.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t y0 = 0; y0 < n; ++y0) {
    if (b.probs()[y0] == 0.0) continue;
    auto r = types.row(static_cast<TypeIndex>(y0), aR);
    for (std::size_t y = 0; y < n; ++y) out[y] += r[y] * b.probs()[y0];
  }
  return out;
}

std::vector<double> posterior_weights(const Belief& b, StateIndex x, ActionIndex aR, ActionIndex aH,
                                      const GameModel& model, const HumanContext& h,
                                      const BeliefUpdateOptions& options) {
  std::vector<double> w = predict_types(b, aR, model.types);
  for (std::size_t y = 0; y < w.size(); ++y) {
    double like = human::action_likelihood(model, x, h, aR, aH, static_cast<TypeIndex>(y));
    if (options.on_zero == ZeroLikelihoodPolicy::kSmooth) like = std::max(like, options.smoothing_floor);
    w[y] *= like;
  }
  return w;
}

Belief belief_update(const Belief& b, StateIndex x, ActionIndex aR, ActionIndex aH, const GameModel& model,
                     const HumanContext& h, const BeliefUpdateOptions& options) {
  if (b.size() != model.types.size())
    throw Error(ErrorCode::kInvalidParams, "belief size does not match the type space", "belief");
  std::vector<double> w = posterior_weights(b, x, aR, aH, model, h, options);
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) {
    std::ostringstream msg;
    msg << "human action " << aH << " has zero likelihood under every type at state " << x << " after robot action "
        << aR;
    throw Error(ErrorCode::kZeroLikelihood, msg.str());
  }
  return Belief(std::move(w));
}

// ---- Traces ----------------------------------------------------------------

double accumulate_reward(const EpisodeTrace& trace, Agent agent) {
  double sum = 0.0;
  for (const auto& s : trace.steps) sum += agent == Agent::kRobot ? s.rR : s.rH;
  return sum;
}

std::string trace_step_json(const TraceStep& step) {
  nlohmann::ordered_json j;
  j["t"] = step.t;
  j["x"] = step.x;
  j["aR"] = step.aR;
  j["aH"] = step.aH;
  j["belief"] = step.belief;
  j["rR"] = step.rR;
  j["rH"] = step.rH;
  j["y"] = step.y;
  return j.dump();
}

std::string trace_to_jsonl(const EpisodeTrace& trace) {
  std::string out;
  for (const auto& s : trace.steps) {
    out += trace_step_json(s);
    out += '\n';
  }
  return out;
}

EpisodeTrace trace_from_jsonl(const std::string& text) {
  EpisodeTrace trace;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      TraceStep s;
      s.t = j.at("t").get<int>();
      s.x = j.at("x").get<std::vector<int>>();
      s.aR = j.at("aR").get<int>();
      s.aH = j.at("aH").get<int>();
      s.belief = j.at("belief").get<std::vector<double>>();
      s.rR = j.at("rR").get<double>();
      s.rH = j.at("rH").get<double>();
      s.y = j.at("y").get<int>();
      s.state = -1;
      trace.steps.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfig, std::string("malformed trace line: ") + e.what(), "trace");
    }
  }
  return trace;
}

}  // namespace coadapt
