#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "coadapt/config.hpp"
#include "coadapt/planner.hpp"

namespace coadapt {

// A robot policy together with everything needed to rebuild it.
struct PolicyBundle {
  AppConfig config;
  std::shared_ptr<const GameModel> truth;
  Belief prior;
  std::string condition;
  std::shared_ptr<RobotPolicy> policy;
  double value = 0.0;  // planner objective at the root; exact expected reward for the open-loop baseline
  double expected_robot_reward = 0.0;  // under the true model with the initial type drawn from the prior
  int stored_depth = 0;                // depth of the serialized tree
};

PolicyBundle solve_policy(const AppConfig& config, const std::string& condition);

// {"format":"coadapt-policy","version":1,...}. The tree is stored to the full
// horizon unless that exceeds kMaxStoredTreeNodes, in which case it is cut at
// the deepest level that fits. Nodes below the stored tree are re-solved on
// demand after loading.
inline constexpr std::size_t kMaxStoredTreeNodes = 20000;
nlohmann::ordered_json policy_to_json(PolicyBundle& bundle);
PolicyBundle policy_from_json(const nlohmann::json& document);

struct CommandOptions {
  std::filesystem::path out = ".";
  unsigned jobs = 1;
  std::string policy_path;  // tree
  int depth = -1;           // tree; negative: the stored depth
};

inline constexpr const char* kCommands[] = {"solve", "simulate", "population", "crosstrain", "cluster", "tree"};

// Runs one command and returns its machine-readable summary. Artifacts go
// under options.out. Throws Error on failure.
nlohmann::ordered_json run_command(const std::string& command, const AppConfig& config,
                                   const CommandOptions& options);

// Planted noise of the simulated demonstrators used by the cluster command
// when params.human_noise is not given.
inline constexpr double kPlantedDemoNoise = 0.05;

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path, const std::string& field);

}  // namespace coadapt
