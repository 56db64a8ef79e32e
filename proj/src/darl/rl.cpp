#include "darl/rl.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace darl {

namespace {

constexpr uint64_t kEpisodeSalt = 0xAB00000000ull;
constexpr uint64_t kEvalSalt = 0xE00100000000ull;

std::pair<int, int> draw_pair(Rng& rng, int n) {
  if (n < 2) throw ConfigError("critic ensemble needs at least 2 members");
  const int i = rng.uniform_int(n);
  int j = rng.uniform_int(n - 1);
  if (j >= i) ++j;
  return {i, j};
}

MatrixXd vstack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

// Batched frozen-reference actions (mean for stochastic heads).
MatrixXd reference_actions(const Agent& agent, const MatrixXd& raw_states) {
  if (!agent.pi_off) throw ConfigError("agent has no reference policy");
  if (agent.pi_off->stochastic)
    return sample_tanh_gaussian(agent.pi_off->net, raw_states, nullptr).action;
  return tanh_policy(agent.pi_off->net, raw_states);
}

}  // namespace

MatrixXd td3_smoothed_actions(const Mlp& net, const MatrixXd& states, const Hyper& hp, Rng& rng) {
  MatrixXd a = tanh_policy(net, states);
  MatrixXd noise = hp.td3_policy_noise * rng.normal_mat(static_cast<int>(a.rows()),
                                                        static_cast<int>(a.cols()));
  noise = noise.cwiseMax(-hp.td3_noise_clip).cwiseMin(hp.td3_noise_clip);
  return (a + noise).cwiseMax(-1.0).cwiseMin(1.0);
}

void resolve_auto_hyper(Hyper& hp, const AgentSpec& spec) {
  const bool prefill = spec.prefill != PrefillSource::Off;
  if (hp.utd == 0) hp.utd = prefill ? 5 : 1;
  if (hp.num_critics == 0) hp.num_critics = prefill ? 5 : 2;
  if (hp.num_critics < hp.subset)
    throw ConfigError("number of critics must be at least the subset size");
}

std::vector<const Mlp*> CriticEnsemble::online_ptrs() const {
  std::vector<const Mlp*> p;
  for (const auto& c : online) p.push_back(&c);
  return p;
}

std::vector<const Mlp*> CriticEnsemble::target_ptrs() const {
  std::vector<const Mlp*> p;
  for (const auto& c : target) p.push_back(&c);
  return p;
}

VectorXd Agent::augment(const VectorXd& env_state, double lambda) const {
  if (!cheq_active()) return env_state;
  VectorXd s(env_state.size() + 1);
  s << env_state, lambda;
  return s;
}

VectorXd reference_action(const Agent& agent, const VectorXd& env_state, bool deterministic,
                          Rng& rng) {
  if (!agent.pi_off) throw ConfigError("agent has no reference policy");
  MatrixXd s = env_state;
  if (agent.pi_off->stochastic) {
    Rng* sampler = deterministic ? nullptr : &rng;
    return sample_tanh_gaussian(agent.pi_off->net, s, sampler).action.col(0);
  }
  return tanh_policy(agent.pi_off->net, s).col(0);
}

namespace {

// Base-algorithm proposal at a single observation.
VectorXd base_action(const Agent& agent, const MatrixXd& obs, bool deterministic, Rng& rng) {
  if (agent.actor.stochastic) {
    Rng* sampler = deterministic ? nullptr : &rng;
    return sample_tanh_gaussian(agent.actor.net, obs, sampler).action.col(0);
  }
  VectorXd a = tanh_policy(agent.actor.net, obs).col(0);
  if (!deterministic)
    a = (a + agent.hp.td3_explore_noise * rng.normal_vec(static_cast<int>(a.size())))
            .cwiseMax(-1.0)
            .cwiseMin(1.0);
  return a;
}

}  // namespace

VectorXd select_action(const Agent& agent, const VectorXd& env_state, bool deterministic,
                       Rng& rng, double& lambda_io) {
  switch (agent.spec.mixer) {
    case MixerKind::None:
      return base_action(agent, env_state, deterministic, rng);
    case MixerKind::Ibrl: {
      VectorXd a_on = base_action(agent, env_state, deterministic, rng);
      VectorXd a_off = reference_action(agent, env_state, deterministic, rng);
      return mix_ibrl(agent.critics.online_ptrs(), env_state, a_off, a_on);
    }
    case MixerKind::Cheq: {
      VectorXd obs = agent.augment(env_state, lambda_io);
      VectorXd a_on = base_action(agent, obs, deterministic, rng);
      VectorXd a_off = reference_action(agent, env_state, deterministic, rng);
      CheqMixResult res = mix_cheq(agent.critics.online_ptrs(), obs, a_off, a_on, agent.hp.cheq);
      lambda_io = res.lambda;
      return res.a_mix;
    }
    case MixerKind::ResRl: {
      VectorXd a_off = reference_action(agent, env_state, deterministic, rng);
      MatrixXd in(env_state.size() + a_off.size(), 1);
      in.col(0) << env_state, a_off;
      VectorXd a_res = base_action(agent, in, deterministic, rng);
      return mix_residual(a_off, a_res);
    }
  }
  throw ConfigError("unknown mixer");
}

VectorXd q_target(Agent& agent, const NStepBatch& batch) {
  const int b = batch.size();
  const Hyper& hp = agent.hp;
  const MatrixXd& bs = batch.bootstrap_s;  // observation-dim bootstrap states
  MatrixXd raw_bs = agent.cheq_active() ? MatrixXd(bs.topRows(agent.n)) : bs;

  MatrixXd a_boot;
  VectorXd entropy = VectorXd::Zero(b);

  if (agent.spec.mixer == MixerKind::ResRl) {
    MatrixXd a_off = reference_actions(agent, raw_bs);
    MatrixXd in = vstack(raw_bs, a_off);
    MatrixXd a_res;
    if (agent.actor.stochastic) {
      PolicySample ps = sample_tanh_gaussian(agent.actor.net, in, &agent.rng);
      a_res = ps.action;
      entropy = hp.alpha * ps.log_prob;
    } else {
      a_res = td3_smoothed_actions(agent.actor.net, in, hp, agent.rng);
    }
    a_boot = (a_off + a_res).cwiseMax(-1.0).cwiseMin(1.0);
  } else {
    MatrixXd a_on;
    VectorXd log_prob = VectorXd::Zero(b);
    if (agent.actor.stochastic) {
      PolicySample ps = sample_tanh_gaussian(agent.actor.net, bs, &agent.rng);
      a_on = ps.action;
      log_prob = ps.log_prob;
      entropy = hp.alpha * log_prob;
    } else {
      a_on = td3_smoothed_actions(agent.actor.net, bs, hp, agent.rng);
    }
    if (agent.spec.mixer == MixerKind::Ibrl) {
      MatrixXd a_off = reference_actions(agent, raw_bs);
      // Full-ensemble min over target critics decides the bootstrap proposal.
      auto tptrs = agent.critics.target_ptrs();
      VectorXd q_off = min_q_values(tptrs, vstack(bs, a_off));
      VectorXd q_on = min_q_values(tptrs, vstack(bs, a_on));
      a_boot = a_on;
      for (int j = 0; j < b; ++j) {
        if (q_off[j] > q_on[j]) {
          a_boot.col(j) = a_off.col(j);
          entropy[j] = 0.0;  // entropy applies to the online proposal only
        }
      }
    } else if (agent.spec.mixer == MixerKind::Cheq) {
      MatrixXd a_off = reference_actions(agent, raw_bs);
      // Ensemble spread of the target critics at (s', a_on), column-wise.
      const int nc = agent.critics.size();
      MatrixXd q(nc, b);
      MatrixXd sa_on = vstack(bs, a_on);
      for (int i = 0; i < nc; ++i) q.row(i) = mlp_forward(agent.critics.target[i], sa_on).row(0);
      a_boot = a_on;
      for (int j = 0; j < b; ++j) {
        const double mean = q.col(j).mean();
        const double var = std::max(0.0, q.col(j).squaredNorm() / nc - mean * mean);
        const double lambda = cheq_lambda(std::sqrt(var), hp.cheq);
        a_boot.col(j) = (1.0 - lambda) * a_off.col(j) + lambda * a_on.col(j);
      }
    } else {
      a_boot = a_on;
    }
  }

  auto [i, j] = draw_pair(agent.rng, agent.critics.size());
  MatrixXd sa = vstack(bs, a_boot);
  VectorXd q = min_q_values({&agent.critics.target[i], &agent.critics.target[j]}, sa);
  VectorXd y = batch.partial_return.array() +
               batch.discount.array() * batch.bootstrap_mask.array() *
                   (q.array() - entropy.array());
  return y;
}

double critic_update(Agent& agent, const NStepBatch& batch) {
  VectorXd y = q_target(agent, batch);
  MatrixXd sa = vstack(batch.s, batch.a);
  double total = 0.0;
  for (int i = 0; i < agent.critics.size(); ++i) {
    Grads g = zeros_like(agent.critics.online[i]);
    total += critic_mse_loss(agent.critics.online[i], sa, y, &g);
    adam_step(agent.critics.online[i], agent.critic_opts[i], g);
  }
  for (int i = 0; i < agent.critics.size(); ++i)
    ema_update(agent.critics.target[i], agent.critics.online[i], agent.hp.tau);
  agent.grad_steps += 1;
  return total / agent.critics.size();
}

double actor_update(Agent& agent, const NStepBatch& batch) {
  const Hyper& hp = agent.hp;
  if (agent.spec.base == BaseAlg::Td3 && agent.grad_steps % 2 != 0)
    return std::numeric_limits<double>::quiet_NaN();
  if (agent.spec.mixer == MixerKind::ResRl && agent.env_steps <= hp.resrl_burn_in)
    return std::numeric_limits<double>::quiet_NaN();

  auto [i, j] = draw_pair(agent.rng, agent.critics.size());
  std::vector<const Mlp*> subset = {&agent.critics.online[i], &agent.critics.online[j]};
  const int b = batch.size();

  Grads g = zeros_like(agent.actor.net);
  double mean_abs_q = 0.0;
  double loss = 0.0;
  const bool residual = agent.spec.mixer == MixerKind::ResRl;
  MatrixXd a_off;
  if (residual) a_off = reference_actions(agent, batch.s);

  if (agent.actor.stochastic) {
    MatrixXd eps = agent.rng.normal_mat(agent.m, b);
    loss = residual ? sac_residual_actor_loss(agent.actor.net, subset, batch.s, a_off, eps,
                                              hp.alpha, &g, &mean_abs_q)
                    : sac_actor_loss(agent.actor.net, subset, batch.s, eps, hp.alpha, &g,
                                     &mean_abs_q);
  } else {
    loss = residual
               ? td3_residual_actor_loss(agent.actor.net, subset, batch.s, a_off, &g, &mean_abs_q)
               : td3_actor_loss(agent.actor.net, subset, batch.s, &g, &mean_abs_q);
  }

  if (agent.spec.auxbc && agent.offline_buf && agent.offline_buf->sampleable_size() > 0) {
    NStepBatch off = agent.offline_buf->sample_nstep(hp.batch, 1, hp.gamma, agent.rng);
    Grads gb = zeros_like(agent.actor.net);
    double bc_loss = 0.0;
    if (residual) {
      // Supervise the mixed action: the residual target is the gap between
      // the dataset action and the reference proposal.
      MatrixXd off_ref = reference_actions(agent, off.s);
      MatrixXd target = (off.a - off_ref).cwiseMax(-1.0 + 1e-6).cwiseMin(1.0 - 1e-6);
      MatrixXd in = vstack(off.s, off_ref);
      bc_loss = agent.actor.stochastic ? bc_nll_loss(agent.actor.net, in, target, &gb)
                                       : bc_mse_loss(agent.actor.net, in, target, &gb);
    } else {
      bc_loss = agent.actor.stochastic ? bc_nll_loss(agent.actor.net, off.s, off.a, &gb)
                                       : bc_mse_loss(agent.actor.net, off.s, off.a, &gb);
    }
    const double w = auxbc_weight(hp.auxbc_alpha, mean_abs_q);
    loss += w * bc_loss;
    g.axpy(w, gb);
  }

  if (!std::isfinite(loss)) throw NumericError("non-finite actor loss");
  adam_step(agent.actor.net, agent.actor_opt, g);
  agent.actor_grad_steps += 1;
  return loss;
}

EvalPoint evaluate(Agent& agent, int64_t env_step, uint64_t eval_seed) {
  auto env = make_env(agent.env_name, Rng::derive(eval_seed, 0));
  Rng unused(0);
  double success = 0.0, total_return = 0.0;
  const int episodes = agent.hp.eval_episodes;
  for (int e = 0; e < episodes; ++e) {
    VectorXd state = env->reset(Rng::derive(eval_seed, 1000 + static_cast<uint64_t>(e)));
    double lambda = agent.hp.cheq.lambda_min;
    double ep_return = 0.0;
    bool ep_success = false;
    while (!env->episode_done()) {
      VectorXd a = select_action(agent, state, true, unused, lambda);
      StepResult sr = env->step(a);
      ep_return += sr.reward;
      ep_success = sr.success;
      state = sr.next_state;
      if (sr.terminal) break;
    }
    success += ep_success ? 1.0 : 0.0;
    total_return += ep_return;
  }
  return {env_step, success / episodes, total_return / episodes};
}

RunRecord train_online(Agent& agent, Env& env, int64_t budget,
                       std::vector<std::pair<std::string, std::string>> snapshot,
                       const EpisodeSink& sink) {
  const Hyper& hp = agent.hp;
  RunRecord rec;
  rec.config = std::move(snapshot);
  rec.points.push_back(evaluate(agent, 0, Rng::derive(agent.seed, kEvalSalt)));

  int64_t episode_id = 0;
  VectorXd state = env.reset(Rng::derive(agent.seed, kEpisodeSalt + static_cast<uint64_t>(episode_id)));
  agent.lambda_prev = hp.cheq.lambda_min;
  std::vector<Transition> episode;
  double episode_return = 0.0;
  const int64_t warmup = agent.effective_warmup();

  try {
    for (int64_t step = 1; step <= budget; ++step) {
      VectorXd obs = agent.augment(state, agent.lambda_prev);
      double lambda_next = agent.lambda_prev;
      VectorXd a;
      if (step <= warmup)
        a = agent.rng.uniform_vec(agent.m, -1.0, 1.0);
      else
        a = select_action(agent, state, false, agent.rng, lambda_next);

      StepResult sr = env.step(a);
      Transition tr;
      tr.s = obs;
      tr.a = a;
      tr.r = sr.reward;
      tr.s_next = agent.augment(sr.next_state, lambda_next);
      tr.terminal = sr.terminal;
      tr.episode_id = episode_id;
      tr.t = env.steps_taken() - 1;
      agent.online_buf->push(tr);
      episode.push_back(std::move(tr));
      episode_return += sr.reward;
      agent.lambda_prev = lambda_next;
      agent.env_steps = step;

      if (sr.terminal || env.episode_done()) {
        agent.online_buf->end_episode();
        if (sink) {
          EpisodeSteps ep;
          ep.id = episode_id;
          ep.steps = std::move(episode);
          sink(ep, episode_return);
        }
        episode.clear();
        episode_return = 0.0;
        ++episode_id;
        state = env.reset(Rng::derive(agent.seed, kEpisodeSalt + static_cast<uint64_t>(episode_id)));
        agent.lambda_prev = hp.cheq.lambda_min;
      } else {
        state = sr.next_state;
      }

      const bool ready =
          agent.uses_mixed_sampling()
              ? (agent.offline_buf && (agent.offline_buf->sampleable_size() > 0 ||
                                       agent.online_buf->sampleable_size() > 0))
              : agent.online_buf->sampleable_size() > 0;
      if (step > warmup && ready) {
        if (agent.update_start_step < 0) agent.update_start_step = step;
        for (int u = 0; u < hp.utd; ++u) {
          NStepBatch batch =
              agent.uses_mixed_sampling()
                  ? ReplayBuffer::sample_mixed(*agent.online_buf, *agent.offline_buf, hp.batch,
                                               hp.nstep, hp.gamma, agent.rng)
                  : agent.online_buf->sample_nstep(hp.batch, hp.nstep, hp.gamma, agent.rng);
          critic_update(agent, batch);
          actor_update(agent, batch);
        }
      }

      if (hp.eval_every > 0 && step % hp.eval_every == 0)
        rec.points.push_back(evaluate(
            agent, step, Rng::derive(agent.seed, kEvalSalt + static_cast<uint64_t>(step / hp.eval_every))));
    }
    if (budget > 0 && (hp.eval_every <= 0 || budget % hp.eval_every != 0))
      rec.points.push_back(evaluate(
          agent, budget,
          Rng::derive(agent.seed, kEvalSalt + static_cast<uint64_t>(budget / std::max<int64_t>(hp.eval_every, 1)) + 1)));
  } catch (const NumericError& e) {
    rec.status = "failed at env step " + std::to_string(agent.env_steps) + ": " + e.what();
  }
  return rec;
}

void save_run_record(const RunRecord& rec, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# darl-run-record v1\n";
  out << "# status " << rec.status << '\n';
  out << "# config.begin\n";
  for (const auto& [k, v] : rec.config) out << "# " << k << " = " << v << '\n';
  out << "# config.end\n";
  out << "# columns env_step success_rate mean_return\n";
  for (const auto& p : rec.points)
    out << p.env_step << ' ' << fmt_double(p.success_rate) << ' ' << fmt_double(p.mean_return)
        << '\n';
  write_text_file(path, out.str());
}

RunRecord load_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run record: " + path.string());
  RunRecord rec;
  std::string line;
  bool in_config = false;
  while (std::getline(in, line)) {
    if (line.rfind("# status ", 0) == 0) {
      rec.status = line.substr(9);
    } else if (line == "# config.begin") {
      in_config = true;
    } else if (line == "# config.end") {
      in_config = false;
    } else if (in_config && line.rfind("# ", 0) == 0) {
      const std::string body = line.substr(2);
      const size_t eq = body.find(" = ");
      if (eq != std::string::npos)
        rec.config.emplace_back(body.substr(0, eq), body.substr(eq + 3));
    } else if (!line.empty() && line[0] != '#') {
      auto tok = split_ws(line);
      if (tok.size() != 3) throw IoError("malformed run record row: " + line);
      EvalPoint p;
      p.env_step = parse_int(tok[0], "env_step");
      p.success_rate = parse_double(tok[1], "success_rate");
      p.mean_return = parse_double(tok[2], "mean_return");
      rec.points.push_back(p);
    }
  }
  return rec;
}

}  // namespace darl
