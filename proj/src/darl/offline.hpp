// Offline policy and value extraction: behavior cloning, conservative critic
// training (two push-down variants plus the return-calibrated one), and
// Monte-Carlo return regression with an occasional TD step.
#pragma once

#include "darl/replay.hpp"
#include "darl/rl.hpp"

namespace darl {

enum class PretrainMethod { Bc, Mcq, CalQl, CqlRho, CqlH };

const char* pretrain_method_name(PretrainMethod m);
PretrainMethod parse_pretrain_method(const std::string& name);
PretrainMethod method_for_init(InitMethod init);

struct PretrainParams {
  PretrainMethod method = PretrainMethod::Bc;
  int64_t steps = 20000;
  int batch = 256;
  double critic_lr = 3e-4;
  double actor_lr = 3e-5;  // conservative-critic actor updates
  double bc_lr = 3e-4;
  double cql_weight = 5.0;
  int cql_candidates = 10;  // per proposal distribution
  double mcq_epsilon = 0.1;
  double gamma = 0.8;
  double tau = 0.01;
  double alpha = 0.2;
  int hidden = 32;
  int layers = 2;
  int num_critics = 2;
  bool stochastic_actor = true;  // matches the online base algorithm
  uint64_t seed = 0;
};

struct OfflineCheckpoint {
  Actor actor;
  std::optional<CriticEnsemble> critics;
  PretrainMethod method = PretrainMethod::Bc;
  int64_t steps = 0;
  std::string dataset_hash;
};

OfflineCheckpoint bc_train(const TrajectoryDataset& ds, const PretrainParams& p);

// Return regression with probability (1 - eps_b), 1-step TD with probability
// eps_b; a BC actor is trained alongside and bundled into the checkpoint.
OfflineCheckpoint mcq_train(const TrajectoryDataset& ds, const PretrainParams& p,
                            int64_t* td_branch_steps = nullptr);

// Conservative critic training (method selects the push-down variant) with
// alternating stochastic-actor updates.
OfflineCheckpoint cql_train(const TrajectoryDataset& ds, const PretrainParams& p);

OfflineCheckpoint pretrain(const PretrainParams& p, const TrajectoryDataset& ds);

// stem.actor.mlp, stem.critic<i>.mlp, stem.meta (provenance sidecar).
void save_checkpoint(const OfflineCheckpoint& ckpt, const std::filesystem::path& stem);
OfflineCheckpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace darl
