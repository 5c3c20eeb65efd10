/* C interface to the coadapt library.
 *
 * Every function returning coadapt_status leaves a message retrievable with
 * coadapt_last_error() on failure; the message is per thread and stays valid
 * until the next failing call on that thread. Strings returned through char**
 * out-parameters are owned by the caller and released with
 * coadapt_string_free(). Handles are not safe for concurrent mutation;
 * read-only use from several threads is fine.
 */
#ifndef COADAPT_H
#define COADAPT_H

#include <stdint.h>

#if defined(_WIN32)
#define COADAPT_API __declspec(dllexport)
#else
#define COADAPT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum coadapt_status {
  COADAPT_OK = 0,
  COADAPT_ERR_CONFIG = 1,
  COADAPT_ERR_UNKNOWN_ENVIRONMENT = 2,
  COADAPT_ERR_INVALID_PARAMS = 3,
  COADAPT_ERR_ZERO_LIKELIHOOD = 4,
  COADAPT_ERR_BELIEF_EXPLOSION = 5,
  COADAPT_ERR_TOO_LARGE = 6,
  COADAPT_ERR_EMPTY_HISTORY = 7,
  COADAPT_ERR_TOO_FEW_DEMOS = 8,
  COADAPT_ERR_EMPTY_CLUSTER = 9,
  COADAPT_ERR_ROLE_SWAP_UNSUPPORTED = 10,
  COADAPT_ERR_BAD_CONDITION = 11,
  COADAPT_ERR_NOT_FOUND = 12,
  COADAPT_ERR_IO = 13,
  COADAPT_ERR_INVALID_ARGUMENT = 14, /* null handle or pointer */
  COADAPT_ERR_INTERNAL = 15
} coadapt_status;

typedef struct coadapt_config coadapt_config;
typedef struct coadapt_model coadapt_model;
typedef struct coadapt_policy coadapt_policy;
typedef struct coadapt_server coadapt_server;

COADAPT_API const char* coadapt_version(void);
COADAPT_API const char* coadapt_last_error(void);
COADAPT_API const char* coadapt_status_name(coadapt_status status);
COADAPT_API void coadapt_string_free(char* s);

/* Configs are validated on load and after every change; a rejected change
 * leaves the config untouched. */
COADAPT_API coadapt_status coadapt_config_load(const char* path, coadapt_config** out);
COADAPT_API coadapt_status coadapt_config_parse(const char* json, coadapt_config** out);
/* "a.b.c=value"; value is parsed as JSON when possible, else as a string. */
COADAPT_API coadapt_status coadapt_config_set(coadapt_config* config, const char* assignment);
/* Loads `path` (or starts from an empty object when NULL), applies every
 * assignment in order, then validates once. */
COADAPT_API coadapt_status coadapt_config_compose(const char* path, const char* const* assignments, int count,
                                                  coadapt_config** out);
COADAPT_API coadapt_status coadapt_config_set_seed(coadapt_config* config, uint64_t seed);
COADAPT_API coadapt_status coadapt_config_to_json(const coadapt_config* config, char** out);
COADAPT_API void coadapt_config_free(coadapt_config* config);

COADAPT_API coadapt_status coadapt_model_build(const coadapt_config* config, coadapt_model** out);
/* {"env","horizon","states","robot_actions","human_actions","types":[...]} */
COADAPT_API coadapt_status coadapt_model_describe(const coadapt_model* model, char** out);
COADAPT_API void coadapt_model_free(coadapt_model* model);

/* condition NULL: the config's planner.condition. */
COADAPT_API coadapt_status coadapt_policy_solve(const coadapt_config* config, const char* condition,
                                                coadapt_policy** out);
COADAPT_API coadapt_status coadapt_policy_value(const coadapt_policy* policy, double* out);
COADAPT_API coadapt_status coadapt_policy_save(const coadapt_policy* policy, const char* path);
COADAPT_API coadapt_status coadapt_policy_load(const char* path, coadapt_policy** out);
/* depth < 0: the depth stored with the policy. */
COADAPT_API coadapt_status coadapt_policy_tree_dot(const coadapt_policy* policy, int depth, char** out);
COADAPT_API void coadapt_policy_free(coadapt_policy* policy);

/* Runs a CLI command (solve, simulate, population, crosstrain, cluster,
 * tree) and returns its JSON summary. config may be NULL for tree;
 * policy_path and depth are only read by tree. */
COADAPT_API coadapt_status coadapt_run_command(const char* command, const coadapt_config* config,
                                               const char* out_dir, unsigned jobs, const char* policy_path,
                                               int depth, char** out_json);

/* Starts the session server in the background. port < 0 uses server.port
 * from the config; 0 picks a free port. */
COADAPT_API coadapt_status coadapt_server_start(const coadapt_config* config, int port, coadapt_server** out);
COADAPT_API int coadapt_server_port(const coadapt_server* server);
/* Blocks until the server is stopped from another thread. */
COADAPT_API void coadapt_server_wait(coadapt_server* server);
/* Stops the server and frees the handle. */
COADAPT_API void coadapt_server_stop(coadapt_server* server);

#ifdef __cplusplus
}
#endif

#endif /* COADAPT_H */
