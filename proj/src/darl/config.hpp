// Flat key-value experiment configuration: parsing, schema validation with
// field-level diagnostics, and canonical effective-config snapshots.
#pragma once

#include "darl/offline.hpp"
#include "darl/rl.hpp"

#include <map>

namespace darl {

// Raw "key = value" pairs; '#' starts a comment, blank lines ignored.
struct KvConfig {
  std::vector<std::pair<std::string, std::string>> entries;
  bool has(const std::string& key) const;
  const std::string* find(const std::string& key) const;
};
KvConfig parse_kv_text(const std::string& text);
KvConfig parse_kv_file(const std::filesystem::path& path);

struct DemoConfig {
  std::string expert = "scripted";  // scripted | rl
  int episodes = 100;
  int64_t expert_budget = 50000;  // rl expert training steps
  double filter_fraction = 0.9;
  uint64_t seed = 0;  // artifact seed, independent of the run seed
};

struct PretrainConfig {
  int64_t steps = 20000;
  int batch = 256;
  double cql_weight = 5.0;
  double actor_lr = 3e-5;
  double mcq_epsilon = 0.1;
  int cql_candidates = 10;
  uint64_t seed = 0;
  std::string dataset_path;  // optional explicit dataset for the CLI command
  std::string method;        // optional explicit method for the CLI command
};

struct RunConfig {
  int version = 1;
  std::string env_name = "point-reach";
  uint64_t seed = 0;
  int64_t budget = 20000;
  AgentSpec agent;
  Hyper hp;
  DemoConfig demos;
  PretrainConfig pretrain;
};

// Validates every key against the schema; unknown keys and bad values raise
// ConfigError messages that name the field.
RunConfig parse_run_config(const KvConfig& kv);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical effective configuration (every key, defaults filled, sorted).
std::vector<std::pair<std::string, std::string>> snapshot(const RunConfig& cfg);

struct SweepConfig {
  RunConfig base;
  std::vector<std::string> envs;
  std::vector<uint64_t> seeds;
  std::vector<std::string> agents;  // canonical spec strings
};
SweepConfig parse_sweep_config(const KvConfig& kv);
SweepConfig load_sweep_config(const std::filesystem::path& path);

PretrainParams pretrain_params(const RunConfig& cfg, PretrainMethod method);

}  // namespace darl
