#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coadapt/environments.hpp"
#include "coadapt/harness.hpp"
#include "coadapt/learning.hpp"
#include "coadapt/planner.hpp"

namespace coadapt {

struct SimulateConfig {
  std::string condition = kConditionMutual;
  std::size_t episodes = 1;
  std::optional<TypeIndex> type;  // unset: drawn from the population mixture
};

struct ClusterConfig {
  int k = 3;
  int per_type = 20;
  int restarts = 20;
  double fit_noise = 0.1;
  std::size_t held_out = 200;
  std::string demos;  // JSONL path; empty: generate planted demonstrations
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  int idle_timeout_s = 1800;
  std::string cors_origin = "*";
};

// Everything a command needs, parsed from one JSON document. Unknown keys at
// any level are rejected with kConfig naming the offending field.
struct AppConfig {
  nlohmann::json document;  // normalized input, used for hashing and embedding
  std::string env;
  nlohmann::json params = nlohmann::json::object();
  int horizon = 10;
  std::uint64_t seed = 0;
  HumanModelConfig human;
  std::optional<std::vector<double>> prior;  // unset: uniform
  PlannerOptions planner;
  std::string condition = kConditionMutual;
  SimulateConfig simulate;
  PopulationConfig population;
  CrossTrainConfig crosstrain;
  ClusterConfig cluster;
  ServerConfig server;
};

AppConfig parse_config(const nlohmann::json& document);
nlohmann::json load_json_file(const std::string& path);

// Applies "a.b.c=value". The value is parsed as JSON when possible and taken
// as a string otherwise.
void apply_override(nlohmann::json& document, const std::string& assignment);

GameModel build_model(const AppConfig& config);
Belief prior_for(const AppConfig& config, const GameModel& model);

// FNV-1a over the normalized document, hex encoded.
std::string config_hash(const nlohmann::json& document);

}  // namespace coadapt
