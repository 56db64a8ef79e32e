#include "darl/compose.hpp"

#include <cmath>

namespace darl {

namespace {

constexpr uint64_t kComposeSalt = 0xC0117053ull;
constexpr uint64_t kRolloutSalt = 0x2011001ull;

std::vector<int> net_dims(int in, int hidden, int layers, int out) {
  std::vector<int> dims{in};
  for (int i = 0; i < layers; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

VectorXd augment_state(const VectorXd& s, bool cheq, double lambda) {
  if (!cheq) return s;
  VectorXd out(s.size() + 1);
  out << s, lambda;
  return out;
}

}  // namespace

Mlp expand_input_layer(const Mlp& net, int insert_col, Rng& rng) {
  Mlp out = net;
  const int in = net.in_dim();
  if (insert_col < 0 || insert_col > in)
    throw ConfigError("input-layer expansion column out of range");
  const int rows = static_cast<int>(net.w[0].rows());
  MatrixXd w(rows, in + 1);
  w.leftCols(insert_col) = net.w[0].leftCols(insert_col);
  w.rightCols(in - insert_col) = net.w[0].rightCols(in - insert_col);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in + 1));
  for (int r = 0; r < rows; ++r) w(r, insert_col) = rng.uniform(-bound, bound);
  out.w[0] = std::move(w);
  return out;
}

std::unique_ptr<ReplayBuffer> prefill_buffer(const AgentSpec& spec, const Hyper& hp,
                                             const std::string& env_name,
                                             const TrajectoryDataset* dataset,
                                             const Actor* reference, uint64_t seed) {
  if (dataset == nullptr) throw ConfigError("prefill requested but no demo dataset supplied");
  const bool cheq = spec.mixer == MixerKind::Cheq;
  const double lambda0 = hp.cheq.lambda_min;
  const int n = dataset->state_dim + (cheq ? 1 : 0);
  auto buf = std::make_unique<ReplayBuffer>(n, dataset->action_dim, hp.buffer_capacity);

  if (spec.prefill == PrefillSource::Demos || (spec.prefill == PrefillSource::Off && spec.auxbc)) {
    for (const auto& ep : dataset->episodes) {
      for (const auto& tr : ep.steps) {
        Transition aug = tr;
        aug.s = augment_state(tr.s, cheq, lambda0);
        aug.s_next = augment_state(tr.s_next, cheq, lambda0);
        buf->push(aug);
      }
      buf->end_episode();
    }
    return buf;
  }

  // Rollout prefill: execute the reference policy for the same transition
  // count the demo dataset would have contributed.
  if (reference == nullptr)
    throw ConfigError("rollouts prefill needs a pretrained reference policy");
  const size_t want = dataset->num_transitions();
  auto env = make_env(env_name, Rng::derive(seed, kRolloutSalt));
  if (env->spec().action_dim != dataset->action_dim ||
      env->spec().state_dim != dataset->state_dim)
    throw ConfigError("reference policy dimensions do not match the environment");
  Rng rng(Rng::derive(seed, kRolloutSalt + 1));
  int64_t episode_id = 0;
  while (buf->size() < want) {
    VectorXd state = env->reset(Rng::derive(seed, kRolloutSalt + 2 + static_cast<uint64_t>(episode_id)));
    int t = 0;
    while (!env->episode_done()) {
      VectorXd a;
      if (reference->stochastic) {
        MatrixXd s = state;
        a = sample_tanh_gaussian(reference->net, s, &rng).action.col(0);
      } else {
        MatrixXd s = state;
        a = tanh_policy(reference->net, s).col(0);
      }
      StepResult sr = env->step(a);
      Transition tr;
      tr.s = augment_state(state, cheq, lambda0);
      tr.a = a;
      tr.r = sr.reward;
      tr.s_next = augment_state(sr.next_state, cheq, lambda0);
      tr.terminal = sr.terminal;
      tr.episode_id = episode_id;
      tr.t = t++;
      buf->push(tr);
      state = sr.next_state;
      if (sr.terminal) break;
    }
    buf->end_episode();
    ++episode_id;
  }
  return buf;
}

Agent compose(const AgentSpec& spec, const Hyper& hyper, const std::string& env_name,
              uint64_t seed, const ComposeInputs& inputs) {
  validate_spec(spec);
  Agent agent;
  agent.spec = spec;
  agent.hp = hyper;
  resolve_auto_hyper(agent.hp, spec);
  agent.env_name = env_name;
  agent.seed = seed;

  {
    auto env = make_env(env_name, 0);
    agent.n = env->spec().state_dim;
    agent.m = env->spec().action_dim;
  }

  const bool cheq = spec.mixer == MixerKind::Cheq;
  const bool residual = spec.mixer == MixerKind::ResRl;
  const int obs = agent.obs_dim();
  const int actor_in = obs + (residual ? agent.m : 0);
  const bool stochastic = spec.base == BaseAlg::Sac;
  const int actor_out = stochastic ? 2 * agent.m : agent.m;

  Rng init_rng(Rng::derive(seed, kComposeSalt));
  agent.actor.stochastic = stochastic;
  agent.actor.net = make_mlp(net_dims(actor_in, agent.hp.hidden, agent.hp.layers, actor_out),
                             stochastic ? Head::TanhGaussian : Head::Tanh, init_rng, residual);
  agent.actor_opt = make_adam(agent.actor.net, agent.hp.lr);
  for (int i = 0; i < agent.hp.num_critics; ++i) {
    agent.critics.online.push_back(
        make_mlp(net_dims(obs + agent.m, agent.hp.hidden, agent.hp.layers, 1), Head::Linear,
                 init_rng));
    agent.critic_opts.push_back(make_adam(agent.critics.online.back(), agent.hp.lr));
  }
  agent.critics.target = agent.critics.online;

  const OfflineCheckpoint* ckpt = inputs.checkpoint;
  if (spec.init != InitMethod::None || spec.needs_reference_policy()) {
    if (ckpt == nullptr)
      throw ConfigError("composition needs a pretrained checkpoint for component '" +
                        std::string(spec.init != InitMethod::None ? init_name(spec.init)
                                                                  : mixer_name(spec.mixer)) +
                        "'");
    if (ckpt->actor.net.in_dim() != agent.n || ckpt->actor.net.action_dim() != agent.m)
      throw ConfigError("checkpoint dimensions do not match environment '" + env_name + "'");
  }

  // Strategy B: load pretrained weights; conservative/regression terms are
  // dropped online in favor of the pure RL objectives.
  if (spec.init != InitMethod::None) {
    if (ckpt->actor.stochastic != stochastic)
      throw ConfigError("checkpoint actor kind does not match the base algorithm");
    if (!residual) {
      // The residual policy stays zero-initialized; for every other mixer the
      // online policy starts from the pretrained one.
      agent.actor.net = cheq ? expand_input_layer(ckpt->actor.net, agent.n, init_rng)
                             : ckpt->actor.net;
      agent.actor_opt = make_adam(agent.actor.net, agent.hp.lr);
    }
    if (ckpt->critics) {
      const int loadable = std::min(ckpt->critics->size(), agent.critics.size());
      for (int i = 0; i < loadable; ++i) {
        Mlp critic = cheq ? expand_input_layer(ckpt->critics->online[i], agent.n, init_rng)
                          : ckpt->critics->online[i];
        agent.critics.online[i] = critic;
        agent.critics.target[i] = std::move(critic);
        agent.critic_opts[i] = make_adam(agent.critics.online[i], agent.hp.lr);
      }
    }
  }

  // Strategy C (and rollout prefill): frozen reference policy.
  if (spec.needs_reference_policy()) {
    agent.pi_off = ckpt->actor;
  }

  agent.online_buf = std::make_unique<ReplayBuffer>(obs, agent.m, agent.hp.buffer_capacity);

  // Strategy A data: prefilled buffer, or demos for the auxiliary BC term.
  if (spec.prefill != PrefillSource::Off || spec.auxbc) {
    if (inputs.dataset == nullptr)
      throw ConfigError("composition needs a demo dataset for component '" +
                        std::string(spec.prefill != PrefillSource::Off ? "prefill" : "auxbc") +
                        "'");
    if (inputs.dataset->state_dim != agent.n || inputs.dataset->action_dim != agent.m)
      throw ConfigError("demo dataset dimensions do not match environment '" + env_name + "'");
    const Actor* ref = agent.pi_off ? &*agent.pi_off : nullptr;
    agent.offline_buf = prefill_buffer(spec, agent.hp, env_name, inputs.dataset, ref, seed);
  }

  agent.rng = Rng(Rng::derive(seed, kComposeSalt + 1));
  agent.lambda_prev = agent.hp.cheq.lambda_min;
  return agent;
}

}  // namespace darl
