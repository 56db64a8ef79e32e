/*
 * darl — demonstration-augmented reinforcement learning, C API.
 *
 * Opaque handles plus status codes; every function returns DARL_OK on
 * success. darl_last_error() describes the most recent failure on the
 * calling thread.
 */
#ifndef DARL_H
#define DARL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum darl_status {
  DARL_OK = 0,
  DARL_ERR_INVALID_ARGUMENT = 1, /* null pointers, bad handles */
  DARL_ERR_CONFIG = 2,           /* schema violations, dimension conflicts */
  DARL_ERR_IO = 3,               /* missing or malformed files */
  DARL_ERR_NUMERIC = 4,          /* non-finite losses or inputs */
  DARL_ERR_NOT_READY = 5,        /* empty buffers, insufficient data */
  DARL_ERR_DATA = 6,             /* data-quality failures */
  DARL_ERR_UNKNOWN = 7
} darl_status;

const char* darl_status_name(darl_status status);

/* Thread-local message for the last failing call; never NULL. */
const char* darl_last_error(void);

const char* darl_version(void);

/* ---- environments ----------------------------------------------------- */

typedef struct darl_env darl_env;

/* Known names: "point-reach", "point-push", "tabular-3". */
darl_status darl_env_create(const char* name, uint64_t seed, darl_env** out);
void darl_env_destroy(darl_env* env);

darl_status darl_env_state_dim(const darl_env* env, int32_t* out);
darl_status darl_env_action_dim(const darl_env* env, int32_t* out);
darl_status darl_env_horizon(const darl_env* env, int32_t* out);

/* state must hold state_dim doubles. */
darl_status darl_env_reset(darl_env* env, uint64_t seed, double* state);

/* action: action_dim doubles; next_state: state_dim doubles. terminal and
 * success may be NULL. */
darl_status darl_env_step(darl_env* env, const double* action, double* next_state,
                          double* reward, int32_t* terminal, int32_t* success);

/* ---- demo datasets ----------------------------------------------------- */

typedef struct darl_dataset darl_dataset;

darl_status darl_dataset_load(const char* path, darl_dataset** out);
darl_status darl_dataset_save(const darl_dataset* dataset, const char* path);
darl_status darl_dataset_num_episodes(const darl_dataset* dataset, int64_t* out);
darl_status darl_dataset_num_transitions(const darl_dataset* dataset, int64_t* out);
void darl_dataset_destroy(darl_dataset* dataset);

/* ---- config-driven commands -------------------------------------------- */

/* Generates the demo dataset described by the config and writes it to
 * out_path (canonical dataset text format). */
darl_status darl_make_demos(const char* config_path, const char* out_path);

/* Runs offline pretraining per the config; writes <out_stem>.actor.mlp,
 * <out_stem>.critic<i>.mlp and the <out_stem>.meta provenance sidecar. */
darl_status darl_pretrain(const char* config_path, const char* out_stem);

/* Executes one training run. seed_override / budget_override < 0 keep the
 * config values. On success copies the run directory path into run_dir_out
 * (when non-NULL). A numerical failure persists the partial record and
 * returns DARL_ERR_NUMERIC. */
darl_status darl_run(const char* config_path, const char* out_root, int64_t seed_override,
                     int64_t budget_override, char* run_dir_out, size_t run_dir_cap);

/* Runs every (env, agent, seed) sweep cell, jobs cells in parallel.
 * Completed cells are skipped; failed cell counts are reported through
 * failed_out (may be NULL). */
darl_status darl_sweep(const char* config_path, const char* out_root, int32_t jobs,
                       int32_t* failed_out);

/* Builds report tables and plots from a tree of persisted runs. */
darl_status darl_report(const char* run_root, const char* out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DARL_H */
