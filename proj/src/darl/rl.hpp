// Online actor-critic training: SAC and TD3 with h-step subset-min ensemble
// targets, update-to-data scheduling, reference-action mixing hooks, and
// periodic deterministic evaluation.
#pragma once

#include "darl/env.hpp"
#include "darl/losses.hpp"
#include "darl/replay.hpp"
#include "darl/strategy.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace darl {

struct Hyper {
  double gamma = 0.8;
  int nstep = 3;
  double tau = 0.01;
  int batch = 256;
  double lr = 3e-4;
  double alpha = 0.2;           // fixed entropy coefficient
  int utd = 0;                  // 0 = auto: 1, or 5 for prefill methods
  int num_critics = 0;          // 0 = auto: 2, or 5 for prefill methods
  int subset = 2;               // REDQ subset size
  int hidden = 32;
  int layers = 2;
  double td3_policy_noise = 0.1;
  double td3_noise_clip = 0.5;
  double td3_explore_noise = 0.1;
  int64_t warmup_steps = 1000;  // random-action warmup for uninformed agents
  int64_t eval_every = 1000;
  int eval_episodes = 20;
  int64_t resrl_burn_in = 2000;  // env steps with critic-only updates
  double auxbc_alpha = 2.5;
  CheqParams cheq;
  size_t buffer_capacity = 1000000;
};

// Fills the auto defaults that depend on the composed strategy.
void resolve_auto_hyper(Hyper& hp, const AgentSpec& spec);

struct Actor {
  Mlp net;
  bool stochastic = true;
};

struct CriticEnsemble {
  std::vector<Mlp> online, target;
  int size() const { return static_cast<int>(online.size()); }
  std::vector<const Mlp*> online_ptrs() const;
  std::vector<const Mlp*> target_ptrs() const;
};

struct EvalPoint {
  int64_t env_step = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
};

struct RunRecord {
  std::vector<std::pair<std::string, std::string>> config;  // snapshot header
  std::vector<EvalPoint> points;
  std::string status = "ok";
};
void save_run_record(const RunRecord& rec, const std::filesystem::path& path);
RunRecord load_run_record(const std::filesystem::path& path);

// A fully composed agent: training state plus the strategy attachments.
struct Agent {
  AgentSpec spec;
  Hyper hp;
  std::string env_name;
  int n = 0, m = 0;  // raw environment dimensions
  uint64_t seed = 0;

  Actor actor;
  AdamState actor_opt;
  CriticEnsemble critics;
  std::vector<AdamState> critic_opts;
  std::optional<Actor> pi_off;  // frozen reference policy

  std::unique_ptr<ReplayBuffer> online_buf;
  std::unique_ptr<ReplayBuffer> offline_buf;  // populated by strategy A

  Rng rng{0};
  int64_t env_steps = 0;
  int64_t grad_steps = 0;        // critic update count
  int64_t actor_grad_steps = 0;
  int64_t update_start_step = -1;
  double lambda_prev = 0.0;  // CHEQ: previous mixing weight (state coordinate)

  bool cheq_active() const { return spec.mixer == MixerKind::Cheq; }
  bool uses_mixed_sampling() const { return spec.prefill != PrefillSource::Off; }
  int obs_dim() const { return n + (cheq_active() ? 1 : 0); }
  // Warmup is skipped when a pretrained or reference policy informs actions.
  int64_t effective_warmup() const {
    return (spec.init != InitMethod::None || spec.mixer != MixerKind::None) ? 0
                                                                            : hp.warmup_steps;
  }
  VectorXd augment(const VectorXd& env_state, double lambda) const;
};

// Frozen reference action a_off at raw env states; mean when deterministic.
VectorXd reference_action(const Agent& agent, const VectorXd& env_state, bool deterministic,
                          Rng& rng);

// Deterministic action with clipped Gaussian smoothing noise, clipped to the
// action bounds (target-policy smoothing).
MatrixXd td3_smoothed_actions(const Mlp& net, const MatrixXd& states, const Hyper& hp, Rng& rng);

// Behavior/eval action with the agent's mixer applied. lambda_io carries the
// CHEQ weight chain; other mixers leave it untouched.
VectorXd select_action(const Agent& agent, const VectorXd& env_state, bool deterministic,
                       Rng& rng, double& lambda_io);

// h-step backup targets with a fresh random 2-subset of target critics per
// batch; SAC subtracts the entropy term at the bootstrap state.
VectorXd q_target(Agent& agent, const NStepBatch& batch);

// One gradient step for every ensemble member toward the shared targets,
// followed by the EMA target update. Returns the mean regression loss.
double critic_update(Agent& agent, const NStepBatch& batch);

// Policy improvement step (base-algorithm and mixer aware). Returns the actor
// loss, or NaN when the step was skipped (TD3 delay, residual burn-in).
double actor_update(Agent& agent, const NStepBatch& batch);

EvalPoint evaluate(Agent& agent, int64_t env_step, uint64_t eval_seed);

using EpisodeSink = std::function<void(const EpisodeSteps&, double undiscounted_return)>;

// Interleaves environment steps, UTD gradient steps, and periodic
// deterministic evaluation. snapshot becomes the record's config header.
RunRecord train_online(Agent& agent, Env& env, int64_t budget,
                       std::vector<std::pair<std::string, std::string>> snapshot = {},
                       const EpisodeSink& sink = nullptr);

}  // namespace darl
