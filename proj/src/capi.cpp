// extern-C shim over the C++ core: opaque handles, status codes, and a
// thread-local last-error message.
#include "darl.h"

#include "darl/env.hpp"
#include "darl/pipeline.hpp"
#include "darl/replay.hpp"

#include <cstring>
#include <string>

namespace {

thread_local std::string g_last_error = "no error";

darl_status set_error(darl_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

darl_status catch_to_status() {
  try {
    throw;
  } catch (const darl::ConfigError& e) {
    return set_error(DARL_ERR_CONFIG, e.what());
  } catch (const darl::IoError& e) {
    return set_error(DARL_ERR_IO, e.what());
  } catch (const darl::NumericError& e) {
    return set_error(DARL_ERR_NUMERIC, e.what());
  } catch (const darl::NotReadyError& e) {
    return set_error(DARL_ERR_NOT_READY, e.what());
  } catch (const darl::DataError& e) {
    return set_error(DARL_ERR_DATA, e.what());
  } catch (const std::exception& e) {
    return set_error(DARL_ERR_UNKNOWN, e.what());
  } catch (...) {
    return set_error(DARL_ERR_UNKNOWN, "unknown error");
  }
}

}  // namespace

struct darl_env {
  std::unique_ptr<darl::Env> impl;
};

struct darl_dataset {
  darl::TrajectoryDataset impl;
};

extern "C" {

const char* darl_status_name(darl_status status) {
  switch (status) {
    case DARL_OK: return "ok";
    case DARL_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case DARL_ERR_CONFIG: return "config-error";
    case DARL_ERR_IO: return "io-error";
    case DARL_ERR_NUMERIC: return "numerical-failure";
    case DARL_ERR_NOT_READY: return "not-ready";
    case DARL_ERR_DATA: return "data-quality";
    case DARL_ERR_UNKNOWN: return "unknown";
  }
  return "unknown";
}

const char* darl_last_error(void) { return g_last_error.c_str(); }

const char* darl_version(void) { return "darl 1.0.0"; }

darl_status darl_env_create(const char* name, uint64_t seed, darl_env** out) {
  if (!name || !out) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  try {
    auto env = darl::make_env(name, seed);
    *out = new darl_env{std::move(env)};
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

void darl_env_destroy(darl_env* env) { delete env; }

darl_status darl_env_state_dim(const darl_env* env, int32_t* out) {
  if (!env || !out) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  *out = env->impl->spec().state_dim;
  return DARL_OK;
}

darl_status darl_env_action_dim(const darl_env* env, int32_t* out) {
  if (!env || !out) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  *out = env->impl->spec().action_dim;
  return DARL_OK;
}

darl_status darl_env_horizon(const darl_env* env, int32_t* out) {
  if (!env || !out) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  *out = env->impl->spec().horizon;
  return DARL_OK;
}

darl_status darl_env_reset(darl_env* env, uint64_t seed, double* state) {
  if (!env || !state) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  try {
    darl::VectorXd s = env->impl->reset(seed);
    std::memcpy(state, s.data(), sizeof(double) * s.size());
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

darl_status darl_env_step(darl_env* env, const double* action, double* next_state, double* reward,
                          int32_t* terminal, int32_t* success) {
  if (!env || !action || !next_state || !reward)
    return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  try {
    const int m = env->impl->spec().action_dim;
    darl::VectorXd a = Eigen::Map<const darl::VectorXd>(action, m);
    darl::StepResult res = env->impl->step(a);
    std::memcpy(next_state, res.next_state.data(), sizeof(double) * res.next_state.size());
    *reward = res.reward;
    if (terminal) *terminal = res.terminal ? 1 : 0;
    if (success) *success = res.success ? 1 : 0;
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

darl_status darl_dataset_load(const char* path, darl_dataset** out) {
  if (!path || !out) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  try {
    auto* ds = new darl_dataset{darl::load_dataset(path)};
    *out = ds;
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

darl_status darl_dataset_save(const darl_dataset* dataset, const char* path) {
  if (!dataset || !path) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  try {
    darl::save_dataset(dataset->impl, path);
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

darl_status darl_dataset_num_episodes(const darl_dataset* dataset, int64_t* out) {
  if (!dataset || !out) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  *out = static_cast<int64_t>(dataset->impl.episodes.size());
  return DARL_OK;
}

darl_status darl_dataset_num_transitions(const darl_dataset* dataset, int64_t* out) {
  if (!dataset || !out) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  *out = static_cast<int64_t>(dataset->impl.num_transitions());
  return DARL_OK;
}

void darl_dataset_destroy(darl_dataset* dataset) { delete dataset; }

darl_status darl_make_demos(const char* config_path, const char* out_path) {
  if (!config_path || !out_path) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  try {
    darl::make_demos_file(config_path, out_path);
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

darl_status darl_pretrain(const char* config_path, const char* out_stem) {
  if (!config_path || !out_stem) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  try {
    darl::pretrain_file(config_path, out_stem);
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

darl_status darl_run(const char* config_path, const char* out_root, int64_t seed_override,
                     int64_t budget_override, char* run_dir_out, size_t run_dir_cap) {
  if (!config_path || !out_root) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  try {
    darl::RunOutcome res =
        darl::run_config_file(config_path, out_root, seed_override, budget_override);
    if (run_dir_out && run_dir_cap > 0) {
      const std::string dir = res.dir.string();
      std::snprintf(run_dir_out, run_dir_cap, "%s", dir.c_str());
    }
    if (res.status != "ok") return set_error(DARL_ERR_NUMERIC, res.status);
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

darl_status darl_sweep(const char* config_path, const char* out_root, int32_t jobs,
                       int32_t* failed_out) {
  if (!config_path || !out_root) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  try {
    darl::SweepOutcome res = darl::sweep(config_path, out_root, jobs);
    if (failed_out) *failed_out = res.failed;
    if (res.failed > 0)
      return set_error(DARL_ERR_NUMERIC,
                       std::to_string(res.failed) + " sweep cell(s) failed");
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

darl_status darl_report(const char* run_root, const char* out_dir) {
  if (!run_root || !out_dir) return set_error(DARL_ERR_INVALID_ARGUMENT, "null argument");
  try {
    darl::report_tree(run_root, out_dir);
    return DARL_OK;
  } catch (...) {
    return catch_to_status();
  }
}

}  // extern "C"
