// Declarative assembly of single-strategy and hybrid agents: buffer prefill,
// pretrained weight loading (with input-layer expansion for augmented states),
// reference-policy installation, and mixer wiring.
#pragma once

#include "darl/offline.hpp"
#include "darl/rl.hpp"

namespace darl {

struct ComposeInputs {
  const TrajectoryDataset* dataset = nullptr;      // demos
  const OfflineCheckpoint* checkpoint = nullptr;   // pretrained artifacts
};

// Builds a training-ready agent. Throws ConfigError naming the missing or
// mismatched component. Pure in (spec, hyper, env, seed, inputs).
Agent compose(const AgentSpec& spec, const Hyper& hp, const std::string& env_name, uint64_t seed,
              const ComposeInputs& inputs);

// Offline buffer for strategy A: demo transitions, or fresh rollouts of the
// reference policy matching the dataset's transition count. States gain the
// mixing-weight coordinate when the agent observes augmented states.
std::unique_ptr<ReplayBuffer> prefill_buffer(const AgentSpec& spec, const Hyper& hp,
                                             const std::string& env_name,
                                             const TrajectoryDataset* dataset,
                                             const Actor* reference, uint64_t seed);

// Copies a checkpoint network whose input layer lacks the extra coordinate:
// columns [0, insert_col) are kept, one freshly initialized column is inserted
// at insert_col, and the remaining columns shift right.
Mlp expand_input_layer(const Mlp& net, int insert_col, Rng& rng);

}  // namespace darl
