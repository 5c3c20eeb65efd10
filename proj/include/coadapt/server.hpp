#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "coadapt/config.hpp"

namespace coadapt {

// Failure with an HTTP status attached.
class HttpError : public std::runtime_error {
 public:
  HttpError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// In-memory interactive sessions. Each session is a turn-based episode: the
// client submits a human action, the robot picks its action for the same step
// from its policy, the world advances and the belief is updated with
// smoothing on. Rewards are reported for the environment's default human
// reward parameter; the true type is unknown, so "y" is always -1.
class SessionStore {
 public:
  using Clock = std::chrono::steady_clock;

  // `base` is used when a create request carries no config of its own.
  SessionStore(nlohmann::json base, std::chrono::seconds idle_timeout);
  ~SessionStore();

  // Body: {"condition": name, "config": {...}?}. Returns {"id", "state"}.
  nlohmann::ordered_json create(const nlohmann::json& body);
  // Body: {"aH": int}. Returns the trace step with "status" and "state".
  nlohmann::ordered_json act(const std::string& id, const nlohmann::json& body);
  nlohmann::ordered_json state(const std::string& id);
  nlohmann::ordered_json trace(const std::string& id);

  // Drops sessions idle for longer than the timeout. Called on every request.
  std::size_t expire(Clock::time_point now = Clock::now());
  std::size_t size() const;
  // Test hook: replaces the clock used for idle accounting.
  void set_clock(std::function<Clock::time_point()> clock);

 private:
  struct Session;
  struct Cached;
  std::shared_ptr<Session> find(const std::string& id);
  std::shared_ptr<const Cached> policy_for(const nlohmann::json& config, const std::string& condition);
  Clock::time_point now() const;

  nlohmann::json base_;
  std::chrono::seconds idle_timeout_;
  std::function<Clock::time_point()> clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex cache_mutex_;
  std::map<std::string, std::shared_ptr<const Cached>> cache_;
  std::uint64_t counter_ = 0;
};

// HTTP front end:
//   POST /sessions                 create
//   POST /sessions/{id}/act        {"aH": int}
//   GET  /sessions/{id}/state
//   GET  /sessions/{id}/trace
// Every response carries CORS headers for the configured origin.
class SessionServer {
 public:
  SessionServer(const ServerConfig& config, nlohmann::json base);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port. Throws kIo when binding fails.
  int start();
  // Blocks until stop() is called from elsewhere.
  void wait();
  void stop();
  int port() const { return port_; }
  SessionStore& store() { return *store_; }

 private:
  struct Impl;
  ServerConfig config_;
  std::unique_ptr<SessionStore> store_;
  std::unique_ptr<Impl> impl_;
  int port_ = -1;
};

}  // namespace coadapt
