#include "darl/losses.hpp"

#include <cmath>

namespace darl {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)
constexpr double kAtanhClip = 1.0 - 1e-6;

MatrixXd vstack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

void check_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) throw NumericError(std::string("non-finite loss in ") + what);
}

}  // namespace

VectorXd min_q_values(const std::vector<const Mlp*>& critics, const MatrixXd& sa) {
  if (critics.empty()) throw ConfigError("min_q_values needs at least one critic");
  VectorXd best = mlp_forward(*critics[0], sa).row(0).transpose();
  for (size_t i = 1; i < critics.size(); ++i)
    best = best.cwiseMin(mlp_forward(*critics[i], sa).row(0).transpose());
  return best;
}

MatrixXd min_q_input_grad(const std::vector<const Mlp*>& critics, const MatrixXd& sa,
                          const VectorXd& row_weights, VectorXd* min_vals) {
  const int b = static_cast<int>(sa.cols());
  const int c = static_cast<int>(critics.size());
  std::vector<FwdCache> caches(c);
  MatrixXd q(c, b);
  for (int i = 0; i < c; ++i) q.row(i) = mlp_forward_cached(*critics[i], sa, caches[i]).row(0);
  Eigen::VectorXi argmin(b);
  VectorXd vals(b);
  for (int j = 0; j < b; ++j) {
    int best = 0;
    for (int i = 1; i < c; ++i)
      if (q(i, j) < q(best, j)) best = i;
    argmin[j] = best;
    vals[j] = q(best, j);
  }
  if (min_vals) *min_vals = vals;
  MatrixXd d_input = MatrixXd::Zero(sa.rows(), b);
  for (int i = 0; i < c; ++i) {
    MatrixXd d_out = MatrixXd::Zero(1, b);
    bool any = false;
    for (int j = 0; j < b; ++j)
      if (argmin[j] == i && row_weights[j] != 0.0) {
        d_out(0, j) = row_weights[j];
        any = true;
      }
    if (!any) continue;
    Grads scratch = zeros_like(*critics[i]);
    d_input += mlp_backward(*critics[i], caches[i], d_out, scratch);
  }
  return d_input;
}

double critic_mse_loss(const Mlp& critic, const MatrixXd& sa, const VectorXd& target, Grads* grads,
                       MatrixXd* d_input) {
  const int b = static_cast<int>(sa.cols());
  FwdCache cache;
  const MatrixXd& raw = mlp_forward_cached(critic, sa, cache);
  VectorXd diff = raw.row(0).transpose() - target;
  const double loss = diff.squaredNorm() / b;
  check_finite(loss, "critic regression");
  if (grads || d_input) {
    MatrixXd d_out = (2.0 / b) * diff.transpose();
    Grads scratch;
    Grads* g = grads;
    if (!g) {
      scratch = zeros_like(critic);
      g = &scratch;
    }
    MatrixXd din = mlp_backward(critic, cache, d_out, *g);
    if (d_input) *d_input = std::move(din);
  }
  return loss;
}

namespace {

// Shared core of the SAC-style reparameterized actor losses. Computes the
// squashed sample, the critic path gradient w.r.t. the executed action, and
// assembles the head gradient. When a_off is non-null the executed action is
// clip(a_off + a_res) and the actor input is `actor_in` (residual form).
double squashed_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                           const MatrixXd& actor_in, const MatrixXd& critic_state,
                           const MatrixXd* a_off, const MatrixXd& eps, double alpha, Grads* grads,
                           double* mean_abs_q) {
  const int b = static_cast<int>(actor_in.cols());
  FwdCache cache;
  const MatrixXd& raw = mlp_forward_cached(actor, actor_in, cache);
  GaussianParams p = split_gaussian(raw);
  const int m = static_cast<int>(p.mean.rows());

  MatrixXd u = p.mean + p.stddev.cwiseProduct(eps);
  MatrixXd a_on = u.array().tanh();

  // Per-sample log pi(a~|s) with the tanh change of variables.
  VectorXd log_prob = VectorXd::Zero(b);
  for (int j = 0; j < b; ++j)
    for (int d = 0; d < m; ++d)
      log_prob[j] += -0.5 * eps(d, j) * eps(d, j) - p.log_std(d, j) - kHalfLog2Pi -
                     log_one_minus_tanh_sq(u(d, j));

  MatrixXd a_exec = a_on;
  MatrixXd clip_mask = MatrixXd::Ones(m, b);
  if (a_off) {
    MatrixXd pre = *a_off + a_on;
    a_exec = pre.cwiseMax(-1.0).cwiseMin(1.0);
    clip_mask = ((pre.array() > -1.0) && (pre.array() < 1.0)).cast<double>();
  }

  MatrixXd sa = vstack(critic_state, a_exec);
  VectorXd weights = VectorXd::Constant(b, -1.0 / b);
  VectorXd qmin;
  MatrixXd d_sa = min_q_input_grad(critics, sa, weights, &qmin);
  MatrixXd d_a = d_sa.bottomRows(m);  // d(-mean Q)/d a_exec
  if (a_off) d_a = d_a.cwiseProduct(clip_mask);

  const double loss = alpha * log_prob.mean() - qmin.mean();
  check_finite(loss, "actor objective");
  if (mean_abs_q) *mean_abs_q = qmin.cwiseAbs().mean();

  if (grads) {
    // d loss / d u: entropy path 2*alpha*a/B plus the critic path through tanh.
    MatrixXd one_minus_a2 = 1.0 - a_on.array().square();
    MatrixXd g_u = (alpha / b) * 2.0 * a_on + d_a.cwiseProduct(one_minus_a2);
    MatrixXd g_mean = g_u;
    MatrixXd g_log_std =
        (g_u.cwiseProduct(p.stddev.cwiseProduct(eps)).array() - alpha / b).matrix();
    g_log_std = g_log_std.cwiseProduct(p.clamp_active.matrix());
    MatrixXd d_raw(2 * m, b);
    d_raw.topRows(m) = g_mean;
    d_raw.bottomRows(m) = g_log_std;
    mlp_backward(actor, cache, d_raw, *grads);
  }
  return loss;
}

double deterministic_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                                const MatrixXd& actor_in, const MatrixXd& critic_state,
                                const MatrixXd* a_off, Grads* grads, double* mean_abs_q) {
  const int b = static_cast<int>(actor_in.cols());
  FwdCache cache;
  const MatrixXd& raw = mlp_forward_cached(actor, actor_in, cache);
  MatrixXd a_on = raw.array().tanh();
  const int m = static_cast<int>(a_on.rows());

  MatrixXd a_exec = a_on;
  MatrixXd clip_mask = MatrixXd::Ones(m, b);
  if (a_off) {
    MatrixXd pre = *a_off + a_on;
    a_exec = pre.cwiseMax(-1.0).cwiseMin(1.0);
    clip_mask = ((pre.array() > -1.0) && (pre.array() < 1.0)).cast<double>();
  }

  MatrixXd sa = vstack(critic_state, a_exec);
  VectorXd weights = VectorXd::Constant(b, -1.0 / b);
  VectorXd qmin;
  MatrixXd d_sa = min_q_input_grad(critics, sa, weights, &qmin);
  MatrixXd d_a = d_sa.bottomRows(m);
  if (a_off) d_a = d_a.cwiseProduct(clip_mask);

  const double loss = -qmin.mean();
  check_finite(loss, "actor objective");
  if (mean_abs_q) *mean_abs_q = qmin.cwiseAbs().mean();
  if (grads) {
    MatrixXd d_raw = d_a.cwiseProduct((1.0 - a_on.array().square()).matrix());
    mlp_backward(actor, cache, d_raw, *grads);
  }
  return loss;
}

}  // namespace

double sac_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                      const MatrixXd& states, const MatrixXd& eps, double alpha, Grads* grads,
                      double* mean_abs_q) {
  return squashed_actor_loss(actor, critics, states, states, nullptr, eps, alpha, grads,
                             mean_abs_q);
}

double td3_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                      const MatrixXd& states, Grads* grads, double* mean_abs_q) {
  return deterministic_actor_loss(actor, critics, states, states, nullptr, grads, mean_abs_q);
}

double sac_residual_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                               const MatrixXd& obs, const MatrixXd& a_off, const MatrixXd& eps,
                               double alpha, Grads* grads, double* mean_abs_q) {
  return squashed_actor_loss(actor, critics, vstack(obs, a_off), obs, &a_off, eps, alpha, grads,
                             mean_abs_q);
}

double td3_residual_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                               const MatrixXd& obs, const MatrixXd& a_off, Grads* grads,
                               double* mean_abs_q) {
  return deterministic_actor_loss(actor, critics, vstack(obs, a_off), obs, &a_off, grads,
                                  mean_abs_q);
}

double bc_nll_loss(const Mlp& actor, const MatrixXd& states, const MatrixXd& actions,
                   Grads* grads) {
  const int b = static_cast<int>(states.cols());
  FwdCache cache;
  const MatrixXd& raw = mlp_forward_cached(actor, states, cache);
  GaussianParams p = split_gaussian(raw);
  const int m = static_cast<int>(p.mean.rows());
  if (actions.rows() != m) throw ConfigError("bc_nll_loss action dimension mismatch");

  MatrixXd a = actions.cwiseMax(-kAtanhClip).cwiseMin(kAtanhClip);
  MatrixXd u = a.array().atanh();
  MatrixXd z = (u - p.mean).cwiseQuotient(p.stddev);

  double loss = 0.0;
  for (int j = 0; j < b; ++j)
    for (int d = 0; d < m; ++d)
      loss += 0.5 * z(d, j) * z(d, j) + p.log_std(d, j) + kHalfLog2Pi +
              log_one_minus_tanh_sq(u(d, j));
  loss /= b;
  check_finite(loss, "behavior cloning NLL");

  if (grads) {
    MatrixXd g_mean = (-1.0 / b) * z.cwiseQuotient(p.stddev);
    MatrixXd g_log_std = ((1.0 - z.array().square()) / b).matrix();
    g_log_std = g_log_std.cwiseProduct(p.clamp_active.matrix());
    MatrixXd d_raw(2 * m, b);
    d_raw.topRows(m) = g_mean;
    d_raw.bottomRows(m) = g_log_std;
    mlp_backward(actor, cache, d_raw, *grads);
  }
  return loss;
}

double bc_mse_loss(const Mlp& actor, const MatrixXd& states, const MatrixXd& actions,
                   Grads* grads) {
  const int b = static_cast<int>(states.cols());
  FwdCache cache;
  const MatrixXd& raw = mlp_forward_cached(actor, states, cache);
  MatrixXd pred = raw.array().tanh();
  if (actions.rows() != pred.rows()) throw ConfigError("bc_mse_loss action dimension mismatch");
  MatrixXd diff = pred - actions;
  const double loss = diff.squaredNorm() / b;
  check_finite(loss, "behavior cloning MSE");
  if (grads) {
    MatrixXd d_raw = (2.0 / b) * diff.cwiseProduct((1.0 - pred.array().square()).matrix());
    mlp_backward(actor, cache, d_raw, *grads);
  }
  return loss;
}

CqlLossTerms cql_critic_loss(const Mlp& critic, const MatrixXd& s, const MatrixXd& a_data,
                             const VectorXd& y, const MatrixXd& cand_a, const VectorXd& cand_logd,
                             int cand_per_state, CqlVariant variant, double weight,
                             const VectorXd& mc_return, Grads* grads) {
  const int b = static_cast<int>(s.cols());
  const int c = cand_per_state;
  if (cand_a.cols() != static_cast<Eigen::Index>(b) * c)
    throw ConfigError("cql candidate count does not match cand_per_state * batch");
  if (variant == CqlVariant::CalQl && mc_return.size() != b)
    throw ConfigError("CalQL needs a Monte-Carlo return per batch row");

  // Dataset + Bellman pass.
  FwdCache data_cache;
  MatrixXd sa_data = vstack(s, a_data);
  const MatrixXd& q_data_raw = mlp_forward_cached(critic, sa_data, data_cache);
  VectorXd q_data = q_data_raw.row(0).transpose();

  // Candidate pass: states repeated candidate-major.
  MatrixXd s_rep(s.rows(), static_cast<Eigen::Index>(b) * c);
  for (int j = 0; j < b; ++j)
    for (int k = 0; k < c; ++k) s_rep.col(static_cast<Eigen::Index>(j) * c + k) = s.col(j);
  FwdCache cand_cache;
  MatrixXd sa_cand = vstack(s_rep, cand_a);
  const MatrixXd& q_cand_raw = mlp_forward_cached(critic, sa_cand, cand_cache);
  VectorXd q_cand = q_cand_raw.row(0).transpose();

  CqlLossTerms terms;
  MatrixXd d_cand = MatrixXd::Zero(1, q_cand.size());

  switch (variant) {
    case CqlVariant::Rho: {
      terms.push_down = q_cand.mean();
      d_cand.setConstant(weight / static_cast<double>(b * c));
      break;
    }
    case CqlVariant::CalQl: {
      double acc = 0.0;
      for (int j = 0; j < b; ++j)
        for (int k = 0; k < c; ++k) {
          const Eigen::Index idx = static_cast<Eigen::Index>(j) * c + k;
          const double floor_v = mc_return[j];
          if (q_cand[idx] >= floor_v) {
            acc += q_cand[idx];
            d_cand(0, idx) = weight / static_cast<double>(b * c);
          } else {
            acc += floor_v;
          }
        }
      terms.push_down = acc / static_cast<double>(b * c);
      break;
    }
    case CqlVariant::H: {
      if (cand_logd.size() != q_cand.size())
        throw ConfigError("CQL-H needs a log proposal density per candidate");
      double acc = 0.0;
      for (int j = 0; j < b; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < c; ++k) {
          const Eigen::Index idx = static_cast<Eigen::Index>(j) * c + k;
          mx = std::max(mx, q_cand[idx] - cand_logd[idx]);
        }
        double sum = 0.0;
        for (int k = 0; k < c; ++k) {
          const Eigen::Index idx = static_cast<Eigen::Index>(j) * c + k;
          sum += std::exp(q_cand[idx] - cand_logd[idx] - mx);
        }
        const double lse = mx + std::log(sum);
        acc += lse - std::log(static_cast<double>(c));
        for (int k = 0; k < c; ++k) {
          const Eigen::Index idx = static_cast<Eigen::Index>(j) * c + k;
          d_cand(0, idx) =
              weight / b * std::exp(q_cand[idx] - cand_logd[idx] - mx) / sum;
        }
      }
      terms.push_down = acc / b;
      break;
    }
  }

  terms.dataset_term = q_data.mean();
  VectorXd bellman_diff = q_data - y;
  terms.bellman = bellman_diff.squaredNorm() / b;
  terms.total = weight * (terms.push_down - terms.dataset_term) + terms.bellman;
  check_finite(terms.total, "conservative critic objective");

  if (grads) {
    MatrixXd d_data =
        ((2.0 / b) * bellman_diff.array() - weight / b).matrix().transpose();
    mlp_backward(critic, data_cache, d_data, *grads);
    mlp_backward(critic, cand_cache, d_cand, *grads);
  }
  return terms;
}

double mcq_regression_loss(const Mlp& critic, const MatrixXd& sa, const VectorXd& mc_return,
                           Grads* grads) {
  return critic_mse_loss(critic, sa, mc_return, grads);
}

double auxbc_weight(double alpha_bc, double mean_abs_q) {
  return alpha_bc / std::max(mean_abs_q, 1e-8);
}

PolicySample sample_tanh_gaussian(const Mlp& actor, const MatrixXd& states, Rng* rng) {
  const int b = static_cast<int>(states.cols());
  GaussianParams p = split_gaussian(mlp_forward(actor, states));
  const int m = static_cast<int>(p.mean.rows());
  MatrixXd eps = rng ? rng->normal_mat(m, b) : MatrixXd::Zero(m, b);
  MatrixXd u = p.mean + p.stddev.cwiseProduct(eps);
  PolicySample out;
  out.action = u.array().tanh();
  out.log_prob = VectorXd::Zero(b);
  for (int j = 0; j < b; ++j)
    for (int d = 0; d < m; ++d)
      out.log_prob[j] += -0.5 * eps(d, j) * eps(d, j) - p.log_std(d, j) - kHalfLog2Pi -
                         log_one_minus_tanh_sq(u(d, j));
  return out;
}

VectorXd tanh_gaussian_log_prob(const Mlp& actor, const MatrixXd& states, const MatrixXd& actions) {
  const int b = static_cast<int>(states.cols());
  GaussianParams p = split_gaussian(mlp_forward(actor, states));
  const int m = static_cast<int>(p.mean.rows());
  MatrixXd a = actions.cwiseMax(-kAtanhClip).cwiseMin(kAtanhClip);
  MatrixXd u = a.array().atanh();
  MatrixXd z = (u - p.mean).cwiseQuotient(p.stddev);
  VectorXd lp = VectorXd::Zero(b);
  for (int j = 0; j < b; ++j)
    for (int d = 0; d < m; ++d)
      lp[j] += -0.5 * z(d, j) * z(d, j) - p.log_std(d, j) - kHalfLog2Pi -
               log_one_minus_tanh_sq(u(d, j));
  return lp;
}

MatrixXd tanh_policy(const Mlp& actor, const MatrixXd& states) {
  return mlp_forward(actor, states).array().tanh();
}

}  // namespace darl
