// coadapt command-line entry point. Links only the C API.
//
// Exit codes: 0 success, 1 runtime failure, 2 config or usage error,
// 3 belief explosion. stdout carries exactly one JSON document; logs go to
// stderr at the level named by COADAPT_LOG (error, warn, info, debug).

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coadapt.h"

namespace {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

Level log_level() {
  const char* env = std::getenv("COADAPT_LOG");
  if (!env) return Level::kWarn;
  const std::string v = env;
  if (v == "error") return Level::kError;
  if (v == "info") return Level::kInfo;
  if (v == "debug") return Level::kDebug;
  return Level::kWarn;
}

void log(Level level, const std::string& message) {
  static const Level threshold = log_level();
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= threshold) std::cerr << "coadapt [" << names[static_cast<int>(level)] << "] " << message << "\n";
}

int exit_code(coadapt_status status) {
  switch (status) {
    case COADAPT_OK: return 0;
    case COADAPT_ERR_CONFIG:
    case COADAPT_ERR_UNKNOWN_ENVIRONMENT:
    case COADAPT_ERR_INVALID_PARAMS:
    case COADAPT_ERR_BAD_CONDITION:
    case COADAPT_ERR_ROLE_SWAP_UNSUPPORTED:
    case COADAPT_ERR_INVALID_ARGUMENT:
      return 2;
    case COADAPT_ERR_BELIEF_EXPLOSION: return 3;
    default: return 1;
  }
}

int report_failure(coadapt_status status, const std::string& message) {
  log(Level::kError, message);
  nlohmann::ordered_json j;
  j["error"] = coadapt_status_name(status);
  j["message"] = message;
  std::cout << j.dump() << std::endl;
  return exit_code(status);
}

int usage_failure(const std::string& message) {
  log(Level::kError, message);
  nlohmann::ordered_json j;
  j["error"] = "UsageError";
  j["message"] = message;
  std::cout << j.dump() << std::endl;
  return 2;
}

std::atomic<bool> stop_requested{false};

extern "C" void on_signal(int) { stop_requested = true; }

struct Options {
  std::string config;
  std::string out = ".";
  std::string seed;
  std::vector<std::string> sets;
  unsigned jobs = 1;
  std::string policy;
  int depth = -1;
};

void add_common(CLI::App* sub, Options& o, bool config_flags) {
  if (config_flags) {
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--seed", o.seed, "Master seed (overrides the config)");
    sub->add_option("--set", o.sets, "Override a config field, key.path=value (repeatable)")->take_all();
  }
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planning and simulation for human-robot mutual adaptation"};
  app.require_subcommand(1);
  Options o;
  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"solve", "Solve the robot policy for planner.condition and write policy.json"},
      {"simulate", "Run closed-loop episodes and write their traces"},
      {"population", "Compare the three conditions over a population of users"},
      {"crosstrain", "Run the cross-training protocol"},
      {"cluster", "Cluster demonstrations into user types and fit their models"},
      {"tree", "Export a solved policy as a Graphviz tree"},
      {"serve", "Serve interactive sessions over HTTP"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, o, std::strcmp(c.name, "tree") != 0);
    if (std::strcmp(c.name, "tree") == 0) {
      sub->add_option("--policy", o.policy, "Policy file written by solve")->required();
      sub->add_option("--depth", o.depth, "Tree depth (default: the stored depth)")->check(CLI::NonNegativeNumber);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return usage_failure(e.what());
  }
  const std::string command = app.get_subcommands().front()->get_name();

  if (command == "tree") {
    char* out = nullptr;
    const coadapt_status st =
        coadapt_run_command("tree", nullptr, o.out.c_str(), o.jobs, o.policy.c_str(), o.depth, &out);
    if (st != COADAPT_OK) return report_failure(st, coadapt_last_error());
    std::cout << out << std::endl;
    coadapt_string_free(out);
    return 0;
  }

  std::vector<const char*> sets;
  for (const auto& s : o.sets) sets.push_back(s.c_str());
  coadapt_config* config = nullptr;
  coadapt_status st = coadapt_config_compose(o.config.empty() ? nullptr : o.config.c_str(), sets.data(),
                                             static_cast<int>(sets.size()), &config);
  if (st != COADAPT_OK) return report_failure(st, coadapt_last_error());
  if (!o.seed.empty()) {
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(o.seed, &used, 0);
      if (used != o.seed.size() || o.seed.front() == '-') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      coadapt_config_free(config);
      return usage_failure("--seed: not an unsigned 64-bit integer: " + o.seed);
    }
    st = coadapt_config_set_seed(config, seed);
    if (st != COADAPT_OK) {
      coadapt_config_free(config);
      return report_failure(st, coadapt_last_error());
    }
  }

  if (command == "serve") {
    coadapt_server* server = nullptr;
    st = coadapt_server_start(config, -1, &server);
    coadapt_config_free(config);
    if (st != COADAPT_OK) return report_failure(st, coadapt_last_error());
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    nlohmann::ordered_json j;
    j["command"] = "serve";
    j["port"] = coadapt_server_port(server);
    std::cout << j.dump() << std::endl;
    log(Level::kInfo, "listening on port " + std::to_string(coadapt_server_port(server)));
    while (!stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    coadapt_server_stop(server);
    log(Level::kInfo, "stopped");
    return 0;
  }

  log(Level::kInfo, "running " + command);
  const auto start = std::chrono::steady_clock::now();
  char* out = nullptr;
  st = coadapt_run_command(command.c_str(), config, o.out.c_str(), o.jobs, nullptr, -1, &out);
  coadapt_config_free(config);
  if (st != COADAPT_OK) return report_failure(st, coadapt_last_error());
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log(Level::kInfo, command + " finished in " + std::to_string(elapsed) + " s");
  std::cout << out << std::endl;
  coadapt_string_free(out);
  return 0;
}
