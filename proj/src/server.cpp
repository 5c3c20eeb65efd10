#include "coadapt/server.hpp"

#include <cstdio>
#include <random>
#include <thread>

#include <httplib.h>

#include "coadapt/human_models.hpp"
#include "coadapt/planner.hpp"
#include "coadapt/rng.hpp"

namespace coadapt {

using ojson = nlohmann::ordered_json;

struct SessionStore::Cached {
  std::shared_ptr<const GameModel> truth;
  std::shared_ptr<RobotPolicy> policy;
  TypeIndex report_type = 0;  // type whose rewards are reported
};

struct SessionStore::Session {
  std::mutex mutex;
  std::string id;
  std::string condition;
  std::shared_ptr<const Cached> cached;
  StateIndex x = 0;
  HumanContext context;
  Belief belief;
  int t = 0;
  bool finished = false;
  std::vector<TraceStep> steps;
  Clock::time_point last_access;
};

namespace {

ojson step_json(const TraceStep& s) { return ojson::parse(trace_step_json(s)); }

BeliefUpdateOptions session_update(const RobotPolicy& policy) {
  BeliefUpdateOptions u = policy.update_options();
  u.on_zero = ZeroLikelihoodPolicy::kSmooth;
  return u;
}

}  // namespace

SessionStore::SessionStore(nlohmann::json base, std::chrono::seconds idle_timeout)
    : base_(std::move(base)), idle_timeout_(idle_timeout) {}

SessionStore::~SessionStore() = default;

SessionStore::Clock::time_point SessionStore::now() const { return clock_ ? clock_() : Clock::now(); }

void SessionStore::set_clock(std::function<Clock::time_point()> clock) {
  std::lock_guard lock(mutex_);
  clock_ = std::move(clock);
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t SessionStore::expire(Clock::time_point t) {
  std::lock_guard lock(mutex_);
  std::size_t dropped = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
    // A session with a request in flight is not idle.
    if (session_lock.owns_lock() && t - it->second->last_access > idle_timeout_) {
      session_lock.unlock();
      it = sessions_.erase(it);
      ++dropped;
    } else {
      ++it;
    }
  }
  return dropped;
}

std::shared_ptr<const SessionStore::Cached> SessionStore::policy_for(const nlohmann::json& config,
                                                                     const std::string& condition) {
  const std::string key = condition + "\n" + config.dump();
  std::lock_guard lock(cache_mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  AppConfig cfg;
  try {
    cfg = parse_config(config);
  } catch (const Error& e) {
    throw HttpError(400, e.what());
  }
  cfg.planner.update.on_zero = ZeroLikelihoodPolicy::kSmooth;
  auto cached = std::make_shared<Cached>();
  try {
    cached->truth = std::make_shared<const GameModel>(build_model(cfg));
    const Belief prior = prior_for(cfg, *cached->truth);
    cached->policy = make_condition_policy(condition, cached->truth, prior, cfg.planner);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBeliefExplosion || e.code() == ErrorCode::kTooLarge) throw HttpError(422, e.what());
    throw HttpError(400, e.what());
  }
  const int param = cached->truth->catalog.default_reward_param;
  for (std::size_t y = 0; y < cached->truth->types.size(); ++y)
    if (cached->truth->types[static_cast<TypeIndex>(y)].reward_param == param) {
      cached->report_type = static_cast<TypeIndex>(y);
      break;
    }
  cache_.emplace(key, cached);
  return cached;
}

std::shared_ptr<SessionStore::Session> SessionStore::find(const std::string& id) {
  expire(now());
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw HttpError(404, "unknown session '" + id + "'");
  return it->second;
}

namespace {

ojson render_state(const std::string& id, const std::string& condition, const GameModel& truth,
                   const RobotPolicy& policy, StateIndex x, const Belief& b, int t, bool finished,
                   const std::vector<TraceStep>& steps) {
  const GameModel& pm = policy.planning_model();
  ojson j;
  j["id"] = id;
  j["env"] = truth.env_name;
  j["condition"] = condition;
  j["status"] = finished ? "finished" : "active";
  j["t"] = t;
  j["horizon"] = truth.horizon;
  j["x"] = truth.states[static_cast<std::size_t>(x)];
  j["components"] = truth.component_names;
  j["belief"] = std::vector<double>(b.probs().begin(), b.probs().end());
  ojson types = ojson::array();
  for (const auto& ty : pm.types.types()) {
    ojson e;
    e["label"] = ty.label;
    e["alpha"] = ty.adaptability;
    types.push_back(std::move(e));
  }
  j["types"] = std::move(types);
  j["robot_actions"] = truth.robot_actions;
  j["human_actions"] = truth.human_actions;
  std::vector<int> legal;
  for (ActionIndex a = 0; a < truth.human_action_count(); ++a)
    if (truth.human_legal(x, a)) legal.push_back(a);
  j["legal_human_actions"] = legal;
  j["state_class"] = truth.state_class[static_cast<std::size_t>(x)];
  j["last_step"] = steps.empty() ? ojson(nullptr) : step_json(steps.back());
  return j;
}

}  // namespace

ojson SessionStore::create(const nlohmann::json& body) {
  expire(now());
  if (!body.is_object()) throw HttpError(400, "body must be a JSON object");
  for (const auto& [key, value] : body.items())
    if (key != "condition" && key != "config") throw HttpError(400, "unknown field '" + key + "'");
  if (!body.contains("condition") || !body["condition"].is_string())
    throw HttpError(400, "condition must be a string");
  const std::string condition = body["condition"].get<std::string>();
  const auto& names = condition_names();
  if (std::find(names.begin(), names.end(), condition) == names.end())
    throw HttpError(400, "unknown condition '" + condition + "'");
  const nlohmann::json config = body.contains("config") ? body["config"] : base_;
  if (config.is_null()) throw HttpError(400, "no config given and the server has no default");

  auto cached = policy_for(config, condition);
  auto s = std::make_shared<Session>();
  s->condition = condition;
  s->cached = cached;
  s->x = cached->truth->initial_state;
  s->context = cached->policy->planning_model().initial_context();
  s->belief = cached->policy->initial_belief();
  s->finished = cached->truth->terminal(s->x);
  {
    std::lock_guard lock(mutex_);
    static thread_local std::mt19937_64 entropy{std::random_device{}()};
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64(entropy() ^ ++counter_)));
    s->id = buf;
    s->last_access = now();
    sessions_.emplace(s->id, s);
  }
  ojson j;
  j["id"] = s->id;
  j["state"] = render_state(s->id, condition, *cached->truth, *cached->policy, s->x, s->belief, s->t, s->finished,
                            s->steps);
  return j;
}

ojson SessionStore::act(const std::string& id, const nlohmann::json& body) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->last_access = now();
  if (s->finished) throw HttpError(409, "session is finished");
  if (!body.is_object() || !body.contains("aH") || !body["aH"].is_number_integer())
    throw HttpError(400, "body must be {\"aH\": int}");
  const GameModel& truth = *s->cached->truth;
  const RobotPolicy& policy = *s->cached->policy;
  const GameModel& pm = policy.planning_model();
  const auto aH_raw = body["aH"].get<std::int64_t>();
  if (aH_raw < 0 || aH_raw >= truth.human_action_count())
    throw HttpError(400, "aH out of range");
  const auto aH = static_cast<ActionIndex>(aH_raw);
  if (!truth.human_legal(s->x, aH)) throw HttpError(400, "aH is not legal in the current state");

  const ActionIndex aR = policy.act(s->x, s->context, s->belief, truth.horizon - s->t);
  const TypeIndex y = s->cached->report_type;
  TraceStep step;
  step.t = s->t;
  step.state = s->x;
  step.x = truth.states[static_cast<std::size_t>(s->x)];
  step.aR = aR;
  step.aH = aH;
  step.rR = truth.robot_reward(s->x, aR, aH, y);
  step.rH = truth.human_reward(s->x, aR, aH, y);
  step.y = kUnknownType;
  s->belief = belief_update(s->belief, s->x, aR, aH, pm, s->context, session_update(policy));
  step.belief.assign(s->belief.probs().begin(), s->belief.probs().end());
  s->context = human::advance_context(pm, s->context, s->x, aR, aH);
  s->x = truth.next(s->x, aR, aH);
  ++s->t;
  s->finished = s->t >= truth.horizon || truth.terminal(s->x);
  s->steps.push_back(step);

  ojson j = step_json(step);
  j["status"] = s->finished ? "finished" : "active";
  j["state"] = render_state(s->id, s->condition, truth, policy, s->x, s->belief, s->t, s->finished, s->steps);
  return j;
}

ojson SessionStore::state(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->last_access = now();
  return render_state(s->id, s->condition, *s->cached->truth, *s->cached->policy, s->x, s->belief, s->t,
                      s->finished, s->steps);
}

ojson SessionStore::trace(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->last_access = now();
  ojson j;
  j["id"] = s->id;
  j["condition"] = s->condition;
  j["status"] = s->finished ? "finished" : "active";
  ojson steps = ojson::array();
  for (const auto& step : s->steps) steps.push_back(step_json(step));
  j["steps"] = std::move(steps);
  return j;
}

// ---- HTTP ------------------------------------------------------------------

struct SessionServer::Impl {
  httplib::Server http;
  std::thread thread;
};

namespace {

void send_json(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  ojson j;
  j["error"] = status;
  j["message"] = message;
  send_json(res, status, j);
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const HttpError& e) {
    send_error(res, e.status(), e.what());
  } catch (const Error& e) {
    send_error(res, 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error&) {
    throw HttpError(400, "malformed JSON body");
  }
}

}  // namespace

SessionServer::SessionServer(const ServerConfig& config, nlohmann::json base)
    : config_(config),
      store_(std::make_unique<SessionStore>(std::move(base), std::chrono::seconds(config.idle_timeout_s))),
      impl_(std::make_unique<Impl>()) {
  auto& http = impl_->http;
  http.set_default_headers({{"Access-Control-Allow-Origin", config_.cors_origin},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                            {"Access-Control-Allow-Headers", "Content-Type"}});
  http.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, store_->create(parse_body(req))); });
  });
  http.Post(R"(/sessions/([^/]+)/act)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, store_->act(req.matches[1], parse_body(req))); });
  });
  http.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, store_->state(req.matches[1])); });
  });
  http.Get(R"(/sessions/([^/]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, store_->trace(req.matches[1])); });
  });
}

SessionServer::~SessionServer() { stop(); }

int SessionServer::start() {
  auto& http = impl_->http;
  if (config_.port == 0) {
    port_ = http.bind_to_any_port(config_.host);
  } else {
    port_ = http.bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ < 0)
    throw Error(ErrorCode::kIo, "cannot bind " + config_.host + ":" + std::to_string(config_.port), "server.port");
  impl_->thread = std::thread([&http] { http.listen_after_bind(); });
  http.wait_until_ready();
  return port_;
}

void SessionServer::wait() {
  while (impl_->http.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void SessionServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace coadapt
