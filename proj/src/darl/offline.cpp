#include "darl/offline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace darl {

namespace {

constexpr uint64_t kPretrainSalt = 0x0FF11AE500ull;

std::vector<int> net_dims(int in, int hidden, int layers, int out) {
  std::vector<int> dims{in};
  for (int i = 0; i < layers; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

MatrixXd vstack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

struct OfflineTrainer {
  const TrajectoryDataset& ds;
  const PretrainParams& p;
  Rng rng;
  Actor actor;
  AdamState actor_opt;
  CriticEnsemble critics;
  std::vector<AdamState> critic_opts;

  OfflineTrainer(const TrajectoryDataset& dataset, const PretrainParams& params, bool with_critics,
                 double actor_lr)
      : ds(dataset), p(params), rng(Rng::derive(params.seed, kPretrainSalt)) {
    if (ds.episodes.empty()) throw ConfigError("offline pretraining needs a non-empty dataset");
    const int n = ds.state_dim, m = ds.action_dim;
    const int actor_out = p.stochastic_actor ? 2 * m : m;
    actor.stochastic = p.stochastic_actor;
    actor.net = make_mlp(net_dims(n, p.hidden, p.layers, actor_out),
                         p.stochastic_actor ? Head::TanhGaussian : Head::Tanh, rng);
    actor_opt = make_adam(actor.net, actor_lr);
    if (with_critics) {
      for (int i = 0; i < p.num_critics; ++i) {
        critics.online.push_back(
            make_mlp(net_dims(n + m, p.hidden, p.layers, 1), Head::Linear, rng));
        critic_opts.push_back(make_adam(critics.online.back(), p.critic_lr));
      }
      critics.target = critics.online;
    }
  }

  std::pair<int, int> draw_pair() {
    const int n = critics.size();
    const int i = rng.uniform_int(n);
    int j = rng.uniform_int(n - 1);
    if (j >= i) ++j;
    return {i, j};
  }

  // 1-step backup targets from the target ensemble; entropy-corrected when the
  // actor is stochastic.
  VectorXd td_targets(const OfflineBatch& batch, bool with_entropy) {
    auto [i, j] = draw_pair();
    MatrixXd a_next;
    VectorXd ent = VectorXd::Zero(batch.size());
    if (actor.stochastic) {
      PolicySample ps = sample_tanh_gaussian(actor.net, batch.s_next, &rng);
      a_next = ps.action;
      if (with_entropy) ent = p.alpha * ps.log_prob;
    } else {
      a_next = tanh_policy(actor.net, batch.s_next);
    }
    VectorXd q = min_q_values({&critics.target[i], &critics.target[j]},
                              vstack(batch.s_next, a_next));
    return batch.r.array() +
           p.gamma * (1.0 - batch.terminal.array()) * (q.array() - ent.array());
  }

  void ema_all() {
    for (int i = 0; i < critics.size(); ++i)
      ema_update(critics.target[i], critics.online[i], p.tau);
  }

  OfflineCheckpoint finish(PretrainMethod method, bool with_critics) {
    OfflineCheckpoint ckpt;
    ckpt.actor = std::move(actor);
    if (with_critics) ckpt.critics = std::move(critics);
    ckpt.method = method;
    ckpt.steps = p.steps;
    return ckpt;
  }
};

}  // namespace

const char* pretrain_method_name(PretrainMethod m) {
  switch (m) {
    case PretrainMethod::Bc: return "bc";
    case PretrainMethod::Mcq: return "mcq";
    case PretrainMethod::CalQl: return "calql";
    case PretrainMethod::CqlRho: return "cqlrho";
    case PretrainMethod::CqlH: return "cqlh";
  }
  return "bc";
}

PretrainMethod parse_pretrain_method(const std::string& name) {
  if (name == "bc") return PretrainMethod::Bc;
  if (name == "mcq") return PretrainMethod::Mcq;
  if (name == "calql") return PretrainMethod::CalQl;
  if (name == "cqlrho" || name == "cql-rho") return PretrainMethod::CqlRho;
  if (name == "cqlh" || name == "cql-h") return PretrainMethod::CqlH;
  throw ConfigError("unknown pretraining method '" + name + "'");
}

PretrainMethod method_for_init(InitMethod init) {
  switch (init) {
    case InitMethod::Bc: return PretrainMethod::Bc;
    case InitMethod::Mcq: return PretrainMethod::Mcq;
    case InitMethod::CalQl: return PretrainMethod::CalQl;
    case InitMethod::CqlRho: return PretrainMethod::CqlRho;
    case InitMethod::CqlH: return PretrainMethod::CqlH;
    case InitMethod::None: return PretrainMethod::Bc;  // reference-policy default
  }
  return PretrainMethod::Bc;
}

OfflineCheckpoint bc_train(const TrajectoryDataset& ds, const PretrainParams& p) {
  OfflineTrainer tr(ds, p, false, p.bc_lr);
  for (int64_t step = 0; step < p.steps; ++step) {
    OfflineBatch batch = sample_offline(ds, p.batch, tr.rng);
    Grads g = zeros_like(tr.actor.net);
    if (tr.actor.stochastic)
      bc_nll_loss(tr.actor.net, batch.s, batch.a, &g);
    else
      bc_mse_loss(tr.actor.net, batch.s, batch.a, &g);
    adam_step(tr.actor.net, tr.actor_opt, g);
  }
  return tr.finish(PretrainMethod::Bc, false);
}

OfflineCheckpoint mcq_train(const TrajectoryDataset& ds, const PretrainParams& p,
                            int64_t* td_branch_steps) {
  for (const auto& ep : ds.episodes)
    for (size_t t = 0; t < ep.steps.size(); ++t)
      if (ep.steps[t].t != ep.steps[0].t + static_cast<int>(t))
        throw ConfigError("return regression needs complete, contiguous episodes");
  OfflineTrainer tr(ds, p, true, p.bc_lr);
  int64_t td_count = 0;
  for (int64_t step = 0; step < p.steps; ++step) {
    OfflineBatch batch = sample_offline(ds, p.batch, tr.rng);
    const bool td_branch = tr.rng.uniform() < p.mcq_epsilon;
    MatrixXd sa = vstack(batch.s, batch.a);
    VectorXd target = td_branch ? tr.td_targets(batch, false) : batch.mc_return;
    if (td_branch) ++td_count;
    for (int i = 0; i < tr.critics.size(); ++i) {
      Grads g = zeros_like(tr.critics.online[i]);
      critic_mse_loss(tr.critics.online[i], sa, target, &g);
      adam_step(tr.critics.online[i], tr.critic_opts[i], g);
    }
    tr.ema_all();
    // Concurrent BC actor (bundled with every value-initialization here).
    Grads ga = zeros_like(tr.actor.net);
    if (tr.actor.stochastic)
      bc_nll_loss(tr.actor.net, batch.s, batch.a, &ga);
    else
      bc_mse_loss(tr.actor.net, batch.s, batch.a, &ga);
    adam_step(tr.actor.net, tr.actor_opt, ga);
  }
  if (td_branch_steps) *td_branch_steps = td_count;
  return tr.finish(PretrainMethod::Mcq, true);
}

OfflineCheckpoint cql_train(const TrajectoryDataset& ds, const PretrainParams& p) {
  if (!p.stochastic_actor)
    throw ConfigError("conservative pretraining trains a stochastic actor");
  OfflineTrainer tr(ds, p, true, p.actor_lr);
  const int m = ds.action_dim;
  const int k = p.cql_candidates;
  const bool h_variant = p.method == PretrainMethod::CqlH;
  const CqlVariant variant = p.method == PretrainMethod::CqlH    ? CqlVariant::H
                             : p.method == PretrainMethod::CalQl ? CqlVariant::CalQl
                                                                 : CqlVariant::Rho;
  const int cand_per_state = h_variant ? 2 * k : k;
  const double log_unif = m * std::log(0.5);  // uniform density on [-1,1]^m

  for (int64_t step = 0; step < p.steps; ++step) {
    OfflineBatch batch = sample_offline(ds, p.batch, tr.rng);
    const int b = batch.size();

    // Candidate actions: K uniform (H only) then K policy samples per state.
    MatrixXd cand(m, static_cast<Eigen::Index>(b) * cand_per_state);
    VectorXd logd = VectorXd::Zero(cand.cols());
    MatrixXd s_rep(ds.state_dim, static_cast<Eigen::Index>(b) * k);
    for (int jj = 0; jj < b; ++jj)
      for (int c = 0; c < k; ++c) s_rep.col(static_cast<Eigen::Index>(jj) * k + c) = batch.s.col(jj);
    PolicySample pol = sample_tanh_gaussian(tr.actor.net, s_rep, &tr.rng);
    for (int jj = 0; jj < b; ++jj) {
      for (int c = 0; c < cand_per_state; ++c) {
        const Eigen::Index dst = static_cast<Eigen::Index>(jj) * cand_per_state + c;
        if (h_variant && c < k) {
          cand.col(dst) = tr.rng.uniform_vec(m, -1.0, 1.0);
          logd[dst] = log_unif;
        } else {
          const Eigen::Index src = static_cast<Eigen::Index>(jj) * k + (h_variant ? c - k : c);
          cand.col(dst) = pol.action.col(src);
          logd[dst] = pol.log_prob[src];
        }
      }
    }

    VectorXd y = tr.td_targets(batch, true);
    for (int i = 0; i < tr.critics.size(); ++i) {
      Grads g = zeros_like(tr.critics.online[i]);
      cql_critic_loss(tr.critics.online[i], batch.s, batch.a, y, cand, logd, cand_per_state,
                      variant, p.cql_weight, batch.mc_return, &g);
      adam_step(tr.critics.online[i], tr.critic_opts[i], g);
    }
    tr.ema_all();

    // Stochastic actor improvement against the conservative critics.
    auto [i, j] = tr.draw_pair();
    std::vector<const Mlp*> subset = {&tr.critics.online[i], &tr.critics.online[j]};
    MatrixXd eps = tr.rng.normal_mat(m, b);
    Grads ga = zeros_like(tr.actor.net);
    sac_actor_loss(tr.actor.net, subset, batch.s, eps, p.alpha, &ga);
    adam_step(tr.actor.net, tr.actor_opt, ga);
  }
  return tr.finish(p.method, true);
}

OfflineCheckpoint pretrain(const PretrainParams& p, const TrajectoryDataset& ds) {
  switch (p.method) {
    case PretrainMethod::Bc: return bc_train(ds, p);
    case PretrainMethod::Mcq: return mcq_train(ds, p);
    case PretrainMethod::CalQl:
    case PretrainMethod::CqlRho:
    case PretrainMethod::CqlH: return cql_train(ds, p);
  }
  throw ConfigError("unknown pretraining method");
}

void save_checkpoint(const OfflineCheckpoint& ckpt, const std::filesystem::path& stem) {
  save_mlp(ckpt.actor.net, stem.string() + ".actor.mlp");
  const int nc = ckpt.critics ? ckpt.critics->size() : 0;
  for (int i = 0; i < nc; ++i)
    save_mlp(ckpt.critics->online[i], stem.string() + ".critic" + std::to_string(i) + ".mlp");
  std::ostringstream meta;
  meta << "critics = " << nc << '\n';
  meta << "dataset = " << ckpt.dataset_hash << '\n';
  meta << "method = " << pretrain_method_name(ckpt.method) << '\n';
  meta << "steps = " << ckpt.steps << '\n';
  meta << "stochastic = " << (ckpt.actor.stochastic ? 1 : 0) << '\n';
  write_text_file(stem.string() + ".meta", meta.str());
}

OfflineCheckpoint load_checkpoint(const std::filesystem::path& stem) {
  OfflineCheckpoint ckpt;
  int nc = 0;
  std::ifstream meta(stem.string() + ".meta");
  if (!meta) throw IoError("cannot open checkpoint sidecar: " + stem.string() + ".meta");
  std::string line;
  while (std::getline(meta, line)) {
    const size_t eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    if (key == "critics") nc = static_cast<int>(parse_int(value, "checkpoint critics"));
    else if (key == "dataset") ckpt.dataset_hash = value;
    else if (key == "method") ckpt.method = parse_pretrain_method(value);
    else if (key == "steps") ckpt.steps = parse_int(value, "checkpoint steps");
    else if (key == "stochastic") ckpt.actor.stochastic = parse_int(value, "stochastic") != 0;
  }
  ckpt.actor.net = load_mlp(stem.string() + ".actor.mlp");
  if (nc > 0) {
    CriticEnsemble ce;
    for (int i = 0; i < nc; ++i)
      ce.online.push_back(load_mlp(stem.string() + ".critic" + std::to_string(i) + ".mlp"));
    ce.target = ce.online;
    ckpt.critics = std::move(ce);
  }
  return ckpt;
}

}  // namespace darl
