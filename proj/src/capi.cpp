#include "coadapt.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "coadapt/app.hpp"
#include "coadapt/config.hpp"
#include "coadapt/policy_tree.hpp"
#include "coadapt/server.hpp"

struct coadapt_config {
  nlohmann::json document;
  coadapt::AppConfig parsed;
};

struct coadapt_model {
  std::shared_ptr<const coadapt::GameModel> model;
};

struct coadapt_policy {
  coadapt::PolicyBundle bundle;
};

struct coadapt_server {
  std::unique_ptr<coadapt::SessionServer> server;
};

namespace {

thread_local std::string last_error;

coadapt_status status_of(coadapt::ErrorCode code) {
  using coadapt::ErrorCode;
  switch (code) {
    case ErrorCode::kConfig: return COADAPT_ERR_CONFIG;
    case ErrorCode::kUnknownEnvironment: return COADAPT_ERR_UNKNOWN_ENVIRONMENT;
    case ErrorCode::kInvalidParams: return COADAPT_ERR_INVALID_PARAMS;
    case ErrorCode::kZeroLikelihood: return COADAPT_ERR_ZERO_LIKELIHOOD;
    case ErrorCode::kBeliefExplosion: return COADAPT_ERR_BELIEF_EXPLOSION;
    case ErrorCode::kTooLarge: return COADAPT_ERR_TOO_LARGE;
    case ErrorCode::kEmptyHistory: return COADAPT_ERR_EMPTY_HISTORY;
    case ErrorCode::kTooFewDemos: return COADAPT_ERR_TOO_FEW_DEMOS;
    case ErrorCode::kEmptyCluster: return COADAPT_ERR_EMPTY_CLUSTER;
    case ErrorCode::kRoleSwapUnsupported: return COADAPT_ERR_ROLE_SWAP_UNSUPPORTED;
    case ErrorCode::kBadCondition: return COADAPT_ERR_BAD_CONDITION;
    case ErrorCode::kNotFound: return COADAPT_ERR_NOT_FOUND;
    case ErrorCode::kIo: return COADAPT_ERR_IO;
  }
  return COADAPT_ERR_INTERNAL;
}

coadapt_status fail(coadapt_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
coadapt_status guarded(F&& body) noexcept {
  try {
    body();
    return COADAPT_OK;
  } catch (const coadapt::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(COADAPT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(COADAPT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(COADAPT_ERR_INTERNAL, "unknown failure");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define COADAPT_REQUIRE(ptr)                                                      \
  do {                                                                            \
    if (!(ptr)) return fail(COADAPT_ERR_INVALID_ARGUMENT, #ptr " must not be null"); \
  } while (0)

}  // namespace

extern "C" {

const char* coadapt_version(void) { return "1.0.0"; }

const char* coadapt_last_error(void) { return last_error.c_str(); }

const char* coadapt_status_name(coadapt_status status) {
  switch (status) {
    case COADAPT_OK: return "OK";
    case COADAPT_ERR_CONFIG: return "ConfigError";
    case COADAPT_ERR_UNKNOWN_ENVIRONMENT: return "UnknownEnvironment";
    case COADAPT_ERR_INVALID_PARAMS: return "InvalidParams";
    case COADAPT_ERR_ZERO_LIKELIHOOD: return "ZeroLikelihood";
    case COADAPT_ERR_BELIEF_EXPLOSION: return "BeliefExplosion";
    case COADAPT_ERR_TOO_LARGE: return "TooLarge";
    case COADAPT_ERR_EMPTY_HISTORY: return "EmptyHistory";
    case COADAPT_ERR_TOO_FEW_DEMOS: return "TooFewDemos";
    case COADAPT_ERR_EMPTY_CLUSTER: return "EmptyCluster";
    case COADAPT_ERR_ROLE_SWAP_UNSUPPORTED: return "RoleSwapUnsupported";
    case COADAPT_ERR_BAD_CONDITION: return "BadCondition";
    case COADAPT_ERR_NOT_FOUND: return "NotFound";
    case COADAPT_ERR_IO: return "IoError";
    case COADAPT_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case COADAPT_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

void coadapt_string_free(char* s) { std::free(s); }

coadapt_status coadapt_config_parse(const char* json, coadapt_config** out) {
  COADAPT_REQUIRE(json);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      throw coadapt::Error(coadapt::ErrorCode::kConfig, std::string("malformed JSON: ") + e.what(), "config");
    }
    auto c = std::make_unique<coadapt_config>();
    c->parsed = coadapt::parse_config(doc);
    c->document = std::move(doc);
    *out = c.release();
  });
}

coadapt_status coadapt_config_load(const char* path, coadapt_config** out) {
  COADAPT_REQUIRE(path);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<coadapt_config>();
    c->document = coadapt::load_json_file(path);
    c->parsed = coadapt::parse_config(c->document);
    *out = c.release();
  });
}

coadapt_status coadapt_config_set(coadapt_config* config, const char* assignment) {
  COADAPT_REQUIRE(config);
  COADAPT_REQUIRE(assignment);
  return guarded([&] {
    nlohmann::json doc = config->document;
    coadapt::apply_override(doc, assignment);
    auto parsed = coadapt::parse_config(doc);
    config->document = std::move(doc);
    config->parsed = std::move(parsed);
  });
}

coadapt_status coadapt_config_compose(const char* path, const char* const* assignments, int count,
                                      coadapt_config** out) {
  COADAPT_REQUIRE(out);
  *out = nullptr;
  if (count > 0) COADAPT_REQUIRE(assignments);
  return guarded([&] {
    auto c = std::make_unique<coadapt_config>();
    c->document = path ? coadapt::load_json_file(path) : nlohmann::json::object();
    for (int i = 0; i < count; ++i) {
      if (!assignments[i])
        throw coadapt::Error(coadapt::ErrorCode::kConfig, "null override", "--set");
      coadapt::apply_override(c->document, assignments[i]);
    }
    c->parsed = coadapt::parse_config(c->document);
    *out = c.release();
  });
}

coadapt_status coadapt_config_set_seed(coadapt_config* config, uint64_t seed) {
  COADAPT_REQUIRE(config);
  return guarded([&] {
    nlohmann::json doc = config->document;
    doc["seed"] = seed;
    auto parsed = coadapt::parse_config(doc);
    config->document = std::move(doc);
    config->parsed = std::move(parsed);
  });
}

coadapt_status coadapt_config_to_json(const coadapt_config* config, char** out) {
  COADAPT_REQUIRE(config);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = copy_string(config->document.dump()); });
}

void coadapt_config_free(coadapt_config* config) { delete config; }

coadapt_status coadapt_model_build(const coadapt_config* config, coadapt_model** out) {
  COADAPT_REQUIRE(config);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<coadapt_model>();
    m->model = std::make_shared<const coadapt::GameModel>(coadapt::build_model(config->parsed));
    *out = m.release();
  });
}

coadapt_status coadapt_model_describe(const coadapt_model* model, char** out) {
  COADAPT_REQUIRE(model);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const auto& m = *model->model;
    nlohmann::ordered_json j;
    j["env"] = m.env_name;
    j["horizon"] = m.horizon;
    j["states"] = m.state_count();
    j["robot_actions"] = m.robot_actions;
    j["human_actions"] = m.human_actions;
    auto types = nlohmann::ordered_json::array();
    for (const auto& t : m.types.types()) {
      nlohmann::ordered_json e;
      e["label"] = t.label;
      e["alpha"] = t.adaptability;
      e["reward_param"] = t.reward_param;
      types.push_back(std::move(e));
    }
    j["types"] = std::move(types);
    *out = copy_string(j.dump());
  });
}

void coadapt_model_free(coadapt_model* model) { delete model; }

coadapt_status coadapt_policy_solve(const coadapt_config* config, const char* condition, coadapt_policy** out) {
  COADAPT_REQUIRE(config);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto p = std::make_unique<coadapt_policy>();
    p->bundle = coadapt::solve_policy(config->parsed, condition ? condition : config->parsed.condition);
    *out = p.release();
  });
}

coadapt_status coadapt_policy_value(const coadapt_policy* policy, double* out) {
  COADAPT_REQUIRE(policy);
  COADAPT_REQUIRE(out);
  *out = policy->bundle.value;
  return COADAPT_OK;
}

coadapt_status coadapt_policy_save(const coadapt_policy* policy, const char* path) {
  COADAPT_REQUIRE(policy);
  COADAPT_REQUIRE(path);
  return guarded([&] {
    auto bundle = policy->bundle;
    coadapt::write_text_file(path, coadapt::policy_to_json(bundle).dump(2) + "\n");
  });
}

coadapt_status coadapt_policy_load(const char* path, coadapt_policy** out) {
  COADAPT_REQUIRE(path);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(coadapt::read_text_file(path, "policy"));
    } catch (const nlohmann::json::parse_error& e) {
      throw coadapt::Error(coadapt::ErrorCode::kConfig, std::string("malformed policy JSON: ") + e.what(), "policy");
    }
    auto p = std::make_unique<coadapt_policy>();
    p->bundle = coadapt::policy_from_json(doc);
    *out = p.release();
  });
}

coadapt_status coadapt_policy_tree_dot(const coadapt_policy* policy, int depth, char** out) {
  COADAPT_REQUIRE(policy);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const auto& p = *policy->bundle.policy;
    const auto& pm = p.planning_model();
    const int d = depth < 0 ? policy->bundle.stored_depth : depth;
    const auto tree = coadapt::extract_policy_tree(p, pm.initial_state, p.initial_belief(), d);
    *out = copy_string(coadapt::policy_tree_dot(tree, pm));
  });
}

void coadapt_policy_free(coadapt_policy* policy) { delete policy; }

coadapt_status coadapt_run_command(const char* command, const coadapt_config* config, const char* out_dir,
                                   unsigned jobs, const char* policy_path, int depth, char** out_json) {
  COADAPT_REQUIRE(command);
  COADAPT_REQUIRE(out_json);
  *out_json = nullptr;
  const bool is_tree = std::strcmp(command, "tree") == 0;
  if (!is_tree) COADAPT_REQUIRE(config);
  return guarded([&] {
    coadapt::CommandOptions options;
    if (out_dir) options.out = out_dir;
    options.jobs = jobs == 0 ? 1 : jobs;
    if (policy_path) options.policy_path = policy_path;
    options.depth = depth;
    const coadapt::AppConfig empty;
    const auto summary = coadapt::run_command(command, config ? config->parsed : empty, options);
    *out_json = copy_string(summary.dump());
  });
}

coadapt_status coadapt_server_start(const coadapt_config* config, int port, coadapt_server** out) {
  COADAPT_REQUIRE(config);
  COADAPT_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    coadapt::ServerConfig sc = config->parsed.server;
    if (port >= 0) sc.port = port;
    auto s = std::make_unique<coadapt_server>();
    s->server = std::make_unique<coadapt::SessionServer>(sc, config->document);
    s->server->start();
    *out = s.release();
  });
}

int coadapt_server_port(const coadapt_server* server) { return server ? server->server->port() : -1; }

void coadapt_server_wait(coadapt_server* server) {
  if (server) server->server->wait();
}

void coadapt_server_stop(coadapt_server* server) {
  if (!server) return;
  server->server->stop();
  delete server;
}

}  // extern "C"
