// Offline dataset production: expert training (RL or the scripted
// controller), peak-return episode filtering, and dataset export.
#pragma once

#include "darl/rl.hpp"

namespace darl {

// Every completed episode of an expert run with its undiscounted return.
struct DemoLog {
  std::vector<EpisodeSteps> episodes;
  std::vector<double> returns;
  int state_dim = 0, action_dim = 0, horizon = 0;
};

struct ExpertResult {
  Actor policy;
  DemoLog log;
  RunRecord record;
};

// Plain SAC trained for the budget; every training episode is logged.
ExpertResult train_expert(const std::string& env_name, int64_t budget, Hyper hp, uint64_t seed);

// Rollouts of the hand-coded controller (the zero-cost expert).
DemoLog scripted_rollouts(const std::string& env_name, int episodes, uint64_t seed);

// Keeps episodes whose return reaches fraction * max(log returns); order and
// episode ids are preserved. Throws DataError when nothing qualifies.
TrajectoryDataset filter_episodes(const DemoLog& log, double fraction, double gamma);

// Canonical dataset interchange write (the replay-module text format).
void export_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path);

}  // namespace darl
