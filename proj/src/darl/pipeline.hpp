// Experiment orchestration: content-hash artifact caching, single runs with
// atomic persistence, parallel sweeps over the composition lattice, and
// report generation from persisted run records.
#pragma once

#include "darl/compose.hpp"
#include "darl/config.hpp"
#include "darl/demos.hpp"
#include "darl/metrics.hpp"

namespace darl {

// DARL_CACHE_DIR overrides; defaults to <out_root>/cache.
std::filesystem::path cache_root(const std::filesystem::path& out_root);

std::string dataset_cache_key(const RunConfig& cfg);
std::string checkpoint_cache_key(const RunConfig& cfg, PretrainMethod method,
                                 const std::string& dataset_key);

// Generates (or reuses) the demo dataset / pretrained checkpoint implied by
// the config. Returns the dataset path / checkpoint stem.
std::filesystem::path ensure_dataset(const RunConfig& cfg, const std::filesystem::path& cache);
std::filesystem::path ensure_checkpoint(const RunConfig& cfg, PretrainMethod method,
                                        const std::filesystem::path& dataset_path,
                                        const std::filesystem::path& cache);

struct RunOutcome {
  std::filesystem::path dir;
  std::string status;  // "ok" or the failure marker
};

// Resolves prerequisites, composes, trains, and persists the run directory
// (record.txt, config.txt, final network checkpoints) via atomic rename.
RunOutcome run_one(const RunConfig& cfg, const std::filesystem::path& out_root);
RunOutcome run_config_file(const std::filesystem::path& config_path,
                           const std::filesystem::path& out_root, int64_t seed_override = -1,
                           int64_t budget_override = -1);

struct SweepOutcome {
  int total = 0, trained = 0, skipped = 0, failed = 0;
};
// Executes every (env, agent, seed) cell; completed cells are skipped, cell
// failures are logged without aborting the sweep.
SweepOutcome sweep(const std::filesystem::path& config_path,
                   const std::filesystem::path& out_root, int jobs);

// Loads every <root>/<env>/<alg>/seed*/record.txt and writes report files.
void report_tree(const std::filesystem::path& run_root, const std::filesystem::path& out_dir);

std::filesystem::path make_demos_file(const std::filesystem::path& config_path,
                                      const std::filesystem::path& out_path);
std::filesystem::path pretrain_file(const std::filesystem::path& config_path,
                                    const std::filesystem::path& out_stem);

}  // namespace darl
