#include "coadapt/environments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace coadapt {

namespace {

using nlohmann::json;

// Reads environment params, rejecting keys that no reader asked about.
class ParamReader {
 public:
  ParamReader(const json& params, std::string prefix) : params_(params), prefix_(std::move(prefix)) {
    if (!params_.is_null() && !params_.is_object())
      throw Error(ErrorCode::kInvalidParams, "params must be a JSON object", prefix_);
  }

  int integer(const std::string& key, int fallback, int lo, int hi) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = params_.at(key);
    if (!v.is_number_integer()) fail(key, "must be an integer");
    const int out = v.get<int>();
    if (out < lo || out > hi) fail(key, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return out;
  }

  double number(const std::string& key, double fallback, double lo, double hi) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = params_.at(key);
    if (!v.is_number()) fail(key, "must be a number");
    const double out = v.get<double>();
    if (!(out >= lo && out <= hi)) fail(key, "out of range");
    return out;
  }

  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = params_.at(key);
    if (!v.is_string()) fail(key, "must be a string");
    auto out = v.get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), out) == allowed.end()) fail(key, "unsupported value '" + out + "'");
    return out;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback, std::size_t size) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = params_.at(key);
    if (!v.is_array() || v.size() != size) fail(key, "must be an array of " + std::to_string(size) + " numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "must contain numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> fallback, int lo, int hi) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = params_.at(key);
    if (!v.is_array()) fail(key, "must be an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<int>() < lo || e.get<int>() > hi) fail(key, "entries out of range");
      out.push_back(e.get<int>());
    }
    return out;
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &params_.at(key) : nullptr;
  }

  void finish() const {
    if (!params_.is_object()) return;
    for (const auto& [key, value] : params_.items())
      if (!seen_.count(key)) fail(key, "unknown parameter");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorCode::kInvalidParams, prefix_ + "." + key + ": " + what, prefix_ + "." + key);
  }

 private:
  bool has(const std::string& key) const { return params_.is_object() && params_.contains(key); }

  const json& params_;
  std::string prefix_;
  std::set<std::string> seen_;
};

// Allocates the dense tables of a model once sizes are known.
void allocate(GameModel& m, std::size_t reward_params) {
  const std::size_t S = m.states.size();
  const std::size_t cells = S * m.robot_actions.size() * m.human_actions.size();
  m.next_state.assign(cells, 0);
  m.terminal_flags.assign(S, 0);
  m.robot_reward_table.assign(cells, 0.0);
  m.human_reward_tables.assign(reward_params, std::vector<double>(cells, 0.0));
  m.disagree_flags.assign(cells, 0);
  m.human_legal_flags.assign(S * m.human_actions.size(), 1);
  m.state_class.assign(S, "");
}

// Terminal rows absorb with zero reward.
void seal_terminals(GameModel& m) {
  for (StateIndex s = 0; s < m.state_count(); ++s) {
    if (!m.terminal(s)) continue;
    for (ActionIndex aR = 0; aR < m.robot_action_count(); ++aR) {
      for (ActionIndex aH = 0; aH < m.human_action_count(); ++aH) {
        const auto c = m.cell(s, aR, aH);
        m.next_state[c] = s;
        m.robot_reward_table[c] = 0.0;
        for (auto& t : m.human_reward_tables) t[c] = 0.0;
        m.disagree_flags[c] = 0;
      }
    }
  }
}

std::vector<double> point_mass_table(const GameModel& m, ActionIndex aH) {
  std::vector<double> t(m.states.size() * m.human_actions.size(), 0.0);
  for (std::size_t s = 0; s < m.states.size(); ++s) t[s * m.human_actions.size() + static_cast<std::size_t>(aH)] = 1.0;
  return t;
}

std::vector<double> uniform_legal_table(const GameModel& m) {
  const std::size_t nH = m.human_actions.size();
  std::vector<double> t(m.states.size() * nH, 0.0);
  for (StateIndex s = 0; s < m.state_count(); ++s) {
    int legal = 0;
    for (ActionIndex a = 0; a < m.human_action_count(); ++a) legal += m.human_legal(s, a) ? 1 : 0;
    for (ActionIndex a = 0; a < m.human_action_count(); ++a)
      if (m.human_legal(s, a)) t[static_cast<std::size_t>(s) * nH + static_cast<std::size_t>(a)] = 1.0 / legal;
  }
  return t;
}

ModalPlan constant_plan(const GameModel& m, int id, std::string label, ActionIndex human_action,
                        std::uint64_t signature) {
  ModalPlan p;
  p.id = id;
  p.label = std::move(label);
  p.human_action.assign(m.states.size(), human_action);
  p.robot_signature.assign(m.states.size(), signature);
  return p;
}

// ---- table-carrying --------------------------------------------------------

GameModel build_table_carrying(const json& params, int horizon) {
  ParamReader r(params, "params");
  const int n_rot = r.integer("n_rot", 8, 3, 360);
  const int g = r.integer("goal_offset", 2, 1, 180);
  const auto robot_dir = r.choice("robot_direction", "cw", {"cw", "ccw"});
  const double robot_goal_reward = r.number("robot_goal_reward", 10.0, -1e6, 1e6);
  const double human_goal_reward = r.number("human_goal_reward", 5.0, -1e6, 1e6);
  const double step_cost = r.number("step_cost", 1.0, -1e6, 1e6);
  const double disagreement_cost = r.number("disagreement_cost", 0.0, 0.0, 1e6);
  r.finish();
  if (2 * g + 1 > n_rot) r.fail("goal_offset", "needs n_rot >= 2 * goal_offset + 1");

  GameModel m;
  m.env_name = "table-carrying";
  m.horizon = horizon;
  m.component_names = {"orientation", "step"};
  for (int s = 0; s <= horizon; ++s)
    for (int o = 0; o < n_rot; ++o) m.states.push_back({o, s});
  auto index = [&](int o, int s) { return static_cast<StateIndex>(s * n_rot + o); };
  m.initial_state = index(0, 0);
  m.robot_actions = {"cw", "ccw", "hold"};
  m.human_actions = {"cw", "ccw", "hold"};
  enum { kCw = 0, kCcw = 1, kHold = 2 };
  allocate(m, 2);
  m.disagreement_cost = disagreement_cost;

  const int robot_rot = robot_dir == "cw" ? kCw : kCcw;
  const int human_rot = robot_rot == kCw ? kCcw : kCw;
  const int robot_goal = robot_rot == kCw ? g : n_rot - g;
  const int human_goal = robot_rot == kCw ? n_rot - g : g;

  for (int s = 0; s <= horizon; ++s) {
    for (int o = 0; o < n_rot; ++o) {
      const StateIndex x = index(o, s);
      const bool at_goal = o == robot_goal || o == human_goal;
      m.terminal_flags[static_cast<std::size_t>(x)] = (at_goal || s == horizon) ? 1 : 0;
      if (o == robot_goal) m.state_class[static_cast<std::size_t>(x)] = "robot-goal";
      if (o == human_goal) m.state_class[static_cast<std::size_t>(x)] = "human-goal";
      for (int aR = 0; aR < 3; ++aR) {
        for (int aH = 0; aH < 3; ++aH) {
          const auto c = m.cell(x, aR, aH);
          int o2 = o;
          if (aR == aH && aR != kHold) o2 = (o + (aR == kCw ? 1 : n_rot - 1)) % n_rot;
          const int s2 = std::min(s + 1, horizon);
          m.next_state[c] = index(o2, s2);
          m.disagree_flags[c] = aR != aH ? 1 : 0;
          const double robot_goal_hit = o2 == robot_goal ? 1.0 : 0.0;
          const double human_goal_hit = o2 == human_goal ? 1.0 : 0.0;
          m.robot_reward_table[c] = -step_cost + robot_goal_reward * robot_goal_hit + human_goal_reward * human_goal_hit;
          // param 0 prefers the human-goal rotation, param 1 the robot's.
          m.human_reward_tables[0][c] = -step_cost + robot_goal_reward * human_goal_hit + human_goal_reward * robot_goal_hit;
          m.human_reward_tables[1][c] = m.robot_reward_table[c];
        }
      }
    }
  }
  seal_terminals(m);

  auto& cat = m.catalog;
  cat.reward_params = {"prefers-human-goal", "prefers-robot-goal"};
  cat.default_reward_param = 0;
  cat.plans.push_back(constant_plan(m, 0, "human-goal", human_rot, 1ULL << human_rot));
  cat.plans.push_back(constant_plan(m, 1, "robot-goal", robot_rot, 1ULL << robot_rot));
  cat.initial_plan = 0;
  const int cw_param = robot_rot == kCw ? 1 : 0;
  cat.fixed_policies.push_back({"cw", cw_param, point_mass_table(m, kCw)});
  cat.fixed_policies.push_back({"ccw", 1 - cw_param, point_mass_table(m, kCcw)});
  cat.fixed_policies.push_back({"random", 0, uniform_legal_table(m)});
  cat.default_human_model = HumanModelKind::kBam;
  std::size_t count = 0;
  for (int s = 0; s <= horizon; ++s) count += static_cast<std::size_t>(std::min(2 * s + 1, 2 * g - 1));
  count += 2 * static_cast<std::size_t>(std::max(0, horizon - g + 1));
  cat.reachable_state_count = count;
  return m;
}

// ---- shared-autonomy -------------------------------------------------------

GameModel build_shared_autonomy(const json& params, int horizon) {
  ParamReader r(params, "params");
  const int width = r.integer("width", 9, 2, 4096);
  r.integer("rows", 1, 1, 1);
  const int goal_left = r.integer("goal_left", 0, 0, width - 1);
  const int goal_right = r.integer("goal_right", width - 1, 0, width - 1);
  const int start = r.integer("start", (goal_left + goal_right) / 2, 0, width - 1);
  const auto robot_goal_side = r.choice("robot_goal", "right", {"left", "right"});
  const double robot_goal_reward = r.number("robot_goal_reward", 10.0, -1e6, 1e6);
  const double human_goal_reward = r.number("human_goal_reward", 5.0, -1e6, 1e6);
  const double step_cost = r.number("step_cost", 1.0, -1e6, 1e6);
  const double disagreement_cost = r.number("disagreement_cost", 3.0, 0.0, 1e6);
  r.finish();
  if (goal_left >= goal_right) r.fail("goal_right", "must be greater than goal_left");
  if (start < goal_left || start > goal_right) r.fail("start", "must lie between the goals");

  GameModel m;
  m.env_name = "shared-autonomy";
  m.horizon = horizon;
  m.component_names = {"cell"};
  for (int c = 0; c < width; ++c) m.states.push_back({c});
  m.initial_state = start;
  m.robot_actions = {"left", "straight", "right"};
  m.human_actions = {"left", "straight", "right"};
  enum { kLeft = 0, kStraight = 1, kRight = 2 };
  allocate(m, 2);
  m.disagreement_cost = disagreement_cost;

  const bool robot_right = robot_goal_side == "right";
  const int robot_goal = robot_right ? goal_right : goal_left;
  const int human_goal = robot_right ? goal_left : goal_right;
  const int toward_robot = robot_right ? kRight : kLeft;
  const int toward_human = robot_right ? kLeft : kRight;

  for (int x = 0; x < width; ++x) {
    const bool is_goal = x == goal_left || x == goal_right;
    m.terminal_flags[static_cast<std::size_t>(x)] = is_goal ? 1 : 0;
    if (x == robot_goal) m.state_class[static_cast<std::size_t>(x)] = "robot-goal";
    if (x == human_goal) m.state_class[static_cast<std::size_t>(x)] = "human-goal";
    for (int aR = 0; aR < 3; ++aR) {
      const int x2 = std::clamp(x + (aR == kLeft ? -1 : aR == kRight ? 1 : 0), 0, width - 1);
      for (int aH = 0; aH < 3; ++aH) {
        const auto c = m.cell(x, aR, aH);
        m.next_state[c] = x2;
        m.disagree_flags[c] = ((aR == kLeft && aH == kRight) || (aR == kRight && aH == kLeft)) ? 1 : 0;
        const double robot_hit = x2 == robot_goal ? 1.0 : 0.0;
        const double human_hit = x2 == human_goal ? 1.0 : 0.0;
        m.robot_reward_table[c] = -step_cost + robot_goal_reward * robot_hit + human_goal_reward * human_hit;
        m.human_reward_tables[0][c] = -step_cost + robot_goal_reward * human_hit + human_goal_reward * robot_hit;
        m.human_reward_tables[1][c] = m.robot_reward_table[c];
      }
    }
  }
  seal_terminals(m);

  auto& cat = m.catalog;
  cat.reward_params = {"prefers-human-goal", "prefers-robot-goal"};
  cat.default_reward_param = 0;
  // Moving straight keeps the robot-goal plan open, so it reads as that plan.
  cat.plans.push_back(constant_plan(m, 0, "human-goal", toward_human, 1ULL << toward_human));
  cat.plans.push_back(
      constant_plan(m, 1, "robot-goal", toward_robot, (1ULL << toward_robot) | (1ULL << kStraight)));
  cat.initial_plan = 0;
  const int left_param = robot_right ? 0 : 1;
  cat.fixed_policies.push_back({"left", left_param, point_mass_table(m, kLeft)});
  cat.fixed_policies.push_back({"right", 1 - left_param, point_mass_table(m, kRight)});
  cat.fixed_policies.push_back({"random", 0, uniform_legal_table(m)});
  cat.default_human_model = HumanModelKind::kBam;
  cat.reachable_state_count = static_cast<std::size_t>(goal_right - goal_left + 1);
  return m;
}

// ---- table-clearing --------------------------------------------------------

GameModel build_table_clearing(const json& params, int horizon) {
  ParamReader r(params, "params");
  const int n = r.integer("objects", 3, 1, 6);
  std::vector<double> robot_default(static_cast<std::size_t>(n), 1.0);
  std::vector<double> naive_default(static_cast<std::size_t>(n), 1.0);
  robot_default[0] = 5.0;
  naive_default[0] = -1.0;
  const auto robot_values = r.numbers("robot_values", robot_default, static_cast<std::size_t>(n));
  const auto naive_values = r.numbers("naive_values", naive_default, static_cast<std::size_t>(n));
  const auto unreachable = r.integers("robot_unreachable", {0}, 0, n - 1);
  const double fail_cost = r.number("failed_pick_cost", 0.5, 0.0, 1e6);
  const double disagreement_cost = r.number("disagreement_cost", 0.0, 0.0, 1e6);
  r.finish();

  GameModel m;
  m.env_name = "table-clearing";
  m.horizon = horizon;
  m.component_names = {"removed_mask"};
  const int S = 1 << n;
  for (int s = 0; s < S; ++s) m.states.push_back({s});
  m.initial_state = 0;
  m.robot_actions.push_back("wait");
  m.human_actions.push_back("wait");
  for (int i = 0; i < n; ++i) {
    m.robot_actions.push_back("pick-" + std::to_string(i));
    m.human_actions.push_back("pick-" + std::to_string(i));
  }
  allocate(m, 2);
  m.disagreement_cost = disagreement_cost;
  std::vector<bool> robot_can(static_cast<std::size_t>(n), true);
  for (int u : unreachable) robot_can[static_cast<std::size_t>(u)] = false;

  const int nA = n + 1;
  for (int s = 0; s < S; ++s) {
    m.terminal_flags[static_cast<std::size_t>(s)] = s == S - 1 ? 1 : 0;
    if (s == S - 1) m.state_class[static_cast<std::size_t>(s)] = "cleared";
    for (int aH = 1; aH < nA; ++aH)
      m.human_legal_flags[static_cast<std::size_t>(s * nA + aH)] = (s >> (aH - 1)) & 1 ? 0 : 1;
    for (int aR = 0; aR < nA; ++aR) {
      for (int aH = 0; aH < nA; ++aH) {
        const auto c = m.cell(s, aR, aH);
        const int ro = aR - 1;
        const int ho = aH - 1;
        int removed = 0;
        const bool joint = ro >= 0 && ro == ho;
        if (!joint) {
          if (ro >= 0 && robot_can[static_cast<std::size_t>(ro)] && !((s >> ro) & 1)) removed |= 1 << ro;
          if (ho >= 0 && !((s >> ho) & 1)) removed |= 1 << ho;
        }
        m.next_state[c] = s | removed;
        m.disagree_flags[c] = joint ? 1 : 0;
        double robot_gain = 0.0;
        double naive_gain = 0.0;
        for (int i = 0; i < n; ++i) {
          if (!((removed >> i) & 1)) continue;
          robot_gain += robot_values[static_cast<std::size_t>(i)];
          naive_gain += naive_values[static_cast<std::size_t>(i)];
        }
        const bool failed_attempt = ro >= 0 && !robot_can[static_cast<std::size_t>(ro)];
        m.robot_reward_table[c] = robot_gain - (failed_attempt ? fail_cost : 0.0);
        m.human_reward_tables[0][c] = naive_gain;
        m.human_reward_tables[1][c] = robot_gain;
      }
    }
  }
  seal_terminals(m);

  auto& cat = m.catalog;
  cat.reward_params = {"naive", "expert"};
  cat.default_reward_param = 0;
  cat.robot_aligned_param = 1;
  for (int u : unreachable) cat.informative_robot_actions.push_back(u + 1);
  cat.default_human_model = HumanModelKind::kBestResponse;
  cat.reachable_state_count = static_cast<std::size_t>(S);
  return m;
}

// ---- assembly --------------------------------------------------------------

GameModel build_assembly(const json& params, int horizon) {
  ParamReader r(params, "params");
  const int n = r.integer("items", 3, 1, 6);
  std::vector<std::vector<int>> prefs;
  if (const json* raw = r.raw("preferences")) {
    if (!raw->is_array() || raw->empty()) r.fail("preferences", "must be a non-empty array of item orders");
    for (const auto& order : *raw) {
      std::vector<int> o;
      if (!order.is_array()) r.fail("preferences", "each preference must be an array");
      for (const auto& v : order) {
        if (!v.is_number_integer()) r.fail("preferences", "orders must hold integers");
        o.push_back(v.get<int>());
      }
      auto sorted = o;
      std::sort(sorted.begin(), sorted.end());
      for (int i = 0; i < n; ++i)
        if (static_cast<int>(sorted.size()) != n || sorted[static_cast<std::size_t>(i)] != i)
          r.fail("preferences", "each order must be a permutation of the items");
      prefs.push_back(o);
    }
  } else {
    for (int shift = 0; shift < std::min(n, 3); ++shift) {
      std::vector<int> o;
      for (int i = 0; i < n; ++i) o.push_back((i + shift) % n);
      prefs.push_back(o);
    }
  }
  const int preference = r.integer("preference", 0, 0, static_cast<int>(prefs.size()) - 1);
  const auto roles = r.choice("roles", "normal", {"normal", "swapped"});
  const double noise = r.number("human_noise", 0.0, 0.0, 1.0);
  const double step_cost = r.number("step_cost", 0.1, -1e6, 1e6);
  r.finish();

  GameModel m;
  m.env_name = "assembly";
  m.horizon = horizon;
  for (int i = 0; i < n; ++i) m.component_names.push_back("item" + std::to_string(i));
  int S = 1;
  for (int i = 0; i < n; ++i) S *= 3;
  for (int s = 0; s < S; ++s) {
    std::vector<int> comp;
    int v = s;
    for (int i = 0; i < n; ++i) {
      comp.push_back(v % 3);
      v /= 3;
    }
    m.states.push_back(comp);
  }
  m.initial_state = 0;
  const bool swapped = roles == "swapped";
  const std::string place = "place-";
  const std::string fasten = "fasten-";
  m.robot_actions.push_back("wait");
  m.human_actions.push_back("wait");
  for (int i = 0; i < n; ++i) {
    m.robot_actions.push_back((swapped ? place : fasten) + std::to_string(i));
    m.human_actions.push_back((swapped ? fasten : place) + std::to_string(i));
  }
  allocate(m, prefs.size());
  m.leader_assistant = true;
  m.catalog.preference_orders = prefs;
  m.catalog.swapped_roles = swapped;

  std::vector<int> pow3(static_cast<std::size_t>(n) + 1, 1);
  for (int i = 1; i <= n; ++i) pow3[static_cast<std::size_t>(i)] = pow3[static_cast<std::size_t>(i) - 1] * 3;
  const int nA = n + 1;
  for (int s = 0; s < S; ++s) {
    const auto& st = m.states[static_cast<std::size_t>(s)];
    const bool done = std::all_of(st.begin(), st.end(), [](int v) { return v == 2; });
    m.terminal_flags[static_cast<std::size_t>(s)] = done ? 1 : 0;
    if (done) m.state_class[static_cast<std::size_t>(s)] = "complete";
    for (int aH = 1; aH < nA; ++aH) {
      const int need = swapped ? 1 : 0;
      m.human_legal_flags[static_cast<std::size_t>(s * nA + aH)] = st[static_cast<std::size_t>(aH - 1)] == need ? 1 : 0;
    }
    for (int aR = 0; aR < nA; ++aR) {
      for (int aH = 0; aH < nA; ++aH) {
        const auto c = m.cell(s, aR, aH);
        const int placer = (swapped ? aR : aH) - 1;
        const int fastener = (swapped ? aH : aR) - 1;
        int s2 = s;
        int fastened = -1;
        if (placer >= 0 && st[static_cast<std::size_t>(placer)] == 0) s2 += pow3[static_cast<std::size_t>(placer)];
        if (fastener >= 0 && st[static_cast<std::size_t>(fastener)] == 1) {
          s2 += pow3[static_cast<std::size_t>(fastener)];
          fastened = fastener;
        }
        m.next_state[c] = s2;
        for (std::size_t p = 0; p < prefs.size(); ++p) {
          int next = -1;
          for (int item : prefs[p])
            if (st[static_cast<std::size_t>(item)] != 2) {
              next = item;
              break;
            }
          double reward = -step_cost;
          if (fastened >= 0) reward += fastened == next ? 1.0 : -1.0;
          m.human_reward_tables[p][c] = reward;
        }
        m.robot_reward_table[c] = m.human_reward_tables[static_cast<std::size_t>(preference)][c];
      }
    }
  }
  seal_terminals(m);

  auto& cat = m.catalog;
  for (std::size_t p = 0; p < prefs.size(); ++p) {
    std::string label = "order";
    for (int i : prefs[p]) label += "-" + std::to_string(i);
    cat.reward_params.push_back(label);
  }
  cat.default_reward_param = preference;
  if (!swapped) {
    // The placer only sees which items are on the fixture.
    for (int s = 0; s < S; ++s) {
      int mask = 0;
      for (int i = 0; i < n; ++i)
        if (m.states[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] > 0) mask |= 1 << i;
      cat.human_view.push_back(mask);
    }
  }
  const auto uniform = uniform_legal_table(m);
  const std::size_t nH = m.human_actions.size();
  for (std::size_t p = 0; p < prefs.size(); ++p) {
    std::vector<double> table(m.states.size() * nH, 0.0);
    for (int s = 0; s < S; ++s) {
      const auto& st = m.states[static_cast<std::size_t>(s)];
      ActionIndex intended = 0;
      if (!swapped) {
        for (int item : prefs[p])
          if (st[static_cast<std::size_t>(item)] == 0) {
            intended = item + 1;
            break;
          }
      } else {
        for (int item : prefs[p])
          if (st[static_cast<std::size_t>(item)] != 2) {
            if (st[static_cast<std::size_t>(item)] == 1) intended = item + 1;
            break;
          }
      }
      for (std::size_t a = 0; a < nH; ++a) {
        const std::size_t k = static_cast<std::size_t>(s) * nH + a;
        table[k] = noise * uniform[k] + (1.0 - noise) * (static_cast<ActionIndex>(a) == intended ? 1.0 : 0.0);
      }
    }
    cat.fixed_policies.push_back({cat.reward_params[p], static_cast<int>(p), std::move(table)});
  }
  cat.default_human_model = HumanModelKind::kFixed;
  cat.reachable_state_count = static_cast<std::size_t>(S);
  return m;
}

}  // namespace

std::vector<std::string> environment_names() {
  return {"table-carrying", "shared-autonomy", "table-clearing", "assembly"};
}

void attach_human_model(GameModel& m, const HumanModelConfig& cfg) {
  const HumanModelKind kind = cfg.kind.value_or(m.catalog.default_human_model);
  const int nR = m.robot_action_count();
  m.human = HumanModelSpec{};
  m.human.kind = kind;
  m.human.memory = cfg.k;
  m.human.eps_plan = cfg.eps_plan;
  m.human.eps_learn = cfg.eps_learn;
  if (cfg.k == 0) throw Error(ErrorCode::kInvalidParams, "k must be positive", "human_model.k");
  if (!(cfg.eps_plan > 0.0 && cfg.eps_plan < 1.0))
    throw Error(ErrorCode::kInvalidParams, "eps_plan must lie in (0, 1)", "human_model.eps_plan");
  if (!(cfg.eps_learn >= 0.0 && cfg.eps_learn <= 1.0))
    throw Error(ErrorCode::kInvalidParams, "eps_learn must lie in [0, 1]", "human_model.eps_learn");

  std::vector<HumanType> types;
  switch (kind) {
    case HumanModelKind::kBam: {
      if (m.catalog.plans.size() < 2)
        throw Error(ErrorCode::kInvalidParams, m.env_name + " declares no plans for the bounded-memory model",
                    "human_model.model");
      if (cfg.alpha_grid.empty())
        throw Error(ErrorCode::kInvalidParams, "alpha_grid must not be empty", "human_model.alpha_grid");
      for (std::size_t i = 0; i < cfg.alpha_grid.size(); ++i) {
        const double a = cfg.alpha_grid[i];
        if (!(a >= 0.0 && a <= 1.0))
          throw Error(ErrorCode::kInvalidParams, "alpha values must lie in [0, 1]", "human_model.alpha_grid");
        char label[32];
        std::snprintf(label, sizeof label, "alpha=%g", a);
        types.push_back({static_cast<TypeIndex>(i), a, m.catalog.default_reward_param, label});
      }
      m.types = TypeSpace(std::move(types), nR);
      break;
    }
    case HumanModelKind::kBestResponse: {
      const std::size_t n = m.catalog.reward_params.size();
      for (std::size_t i = 0; i < n; ++i)
        types.push_back({static_cast<TypeIndex>(i), 0.0, static_cast<int>(i), m.catalog.reward_params[i]});
      std::vector<double> kernel(static_cast<std::size_t>(nR) * n * n, 0.0);
      const int aligned = m.catalog.robot_aligned_param;
      for (int a = 0; a < nR; ++a) {
        const bool informative = std::find(m.catalog.informative_robot_actions.begin(),
                                           m.catalog.informative_robot_actions.end(),
                                           a) != m.catalog.informative_robot_actions.end();
        for (std::size_t y = 0; y < n; ++y) {
          double* row = &kernel[(static_cast<std::size_t>(a) * n + y) * n];
          if (informative && aligned >= 0 && static_cast<int>(y) != aligned) {
            row[y] = 1.0 - cfg.eps_learn;
            row[static_cast<std::size_t>(aligned)] += cfg.eps_learn;
          } else {
            row[y] = 1.0;
          }
        }
      }
      m.types = TypeSpace(std::move(types), nR, std::move(kernel));
      break;
    }
    case HumanModelKind::kFixed: {
      const auto& decls = m.catalog.fixed_policies;
      if (decls.empty())
        throw Error(ErrorCode::kInvalidParams, m.env_name + " declares no fixed human policies", "human_model.model");
      std::vector<const FixedPolicyDecl*> chosen;
      if (cfg.fixed_types.empty()) {
        for (const auto& d : decls) chosen.push_back(&d);
      } else {
        for (const auto& name : cfg.fixed_types) {
          auto it = std::find_if(decls.begin(), decls.end(), [&](const auto& d) { return d.name == name; });
          if (it == decls.end())
            throw Error(ErrorCode::kInvalidParams, "unknown fixed type '" + name + "'", "human_model.fixed_types");
          chosen.push_back(&*it);
        }
      }
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        types.push_back({static_cast<TypeIndex>(i), 0.0, chosen[i]->reward_param, chosen[i]->name});
        m.human.fixed_tables.push_back(chosen[i]->table);
      }
      m.types = TypeSpace(std::move(types), nR);
      break;
    }
  }
  m.validate();
}

GameModel build_env(const std::string& name, const nlohmann::json& params, int horizon,
                    const HumanModelConfig& human) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidParams, "horizon must be >= 1", "horizon");
  if (horizon > 1000) throw Error(ErrorCode::kInvalidParams, "horizon too large", "horizon");
  GameModel m;
  if (name == "table-carrying") m = build_table_carrying(params, horizon);
  else if (name == "shared-autonomy") m = build_shared_autonomy(params, horizon);
  else if (name == "table-clearing") m = build_table_clearing(params, horizon);
  else if (name == "assembly") m = build_assembly(params, horizon);
  else throw Error(ErrorCode::kUnknownEnvironment, "unknown environment '" + name + "'", "env");
  attach_human_model(m, human);
  return m;
}

StateIndex find_state(const GameModel& model, const std::vector<int>& components) {
  for (StateIndex s = 0; s < model.state_count(); ++s)
    if (model.states[static_cast<std::size_t>(s)] == components) return s;
  return -1;
}

namespace assembly {

int next_item(const GameModel& model, StateIndex s, int preference) {
  const auto& st = model.states.at(static_cast<std::size_t>(s));
  for (int item : model.catalog.preference_orders.at(static_cast<std::size_t>(preference)))
    if (st[static_cast<std::size_t>(item)] != 2) return item;
  return -1;
}

}  // namespace assembly

}  // namespace coadapt
