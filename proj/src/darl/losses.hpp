// Analytic loss gradients for every training objective, plus squashed-Gaussian
// policy math. Each function is deterministic given its inputs: noise and
// sampled candidate actions are drawn by the caller, which keeps the losses
// checkable against central finite differences.
#pragma once

#include "darl/nn.hpp"

namespace darl {

// Values of min_i Q_i(s,a) per column of sa.
VectorXd min_q_values(const std::vector<const Mlp*>& critics, const MatrixXd& sa);

// Input gradient of sum_j w_j * min_i Q_i(sa_j). Ties route to the lowest
// critic index. Optionally returns the per-column min values.
MatrixXd min_q_input_grad(const std::vector<const Mlp*>& critics, const MatrixXd& sa,
                          const VectorXd& row_weights, VectorXd* min_vals = nullptr);

// Squared-error regression of a critic to fixed per-row targets (the shared
// critic loss form). Returns the mean loss; accumulates into grads when given;
// d_input receives d_loss/d_sa when non-null.
double critic_mse_loss(const Mlp& critic, const MatrixXd& sa, const VectorXd& target,
                       Grads* grads, MatrixXd* d_input = nullptr);

// Stochastic actor objective: mean_j [alpha * log pi(a~|s_j) - min_i Q_i(s_j, a~)]
// with a~ = tanh(mean + std * eps). critic_state may differ from states when
// the critic sees an augmented observation.
double sac_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                      const MatrixXd& states, const MatrixXd& eps, double alpha, Grads* grads,
                      double* mean_abs_q = nullptr);

// Deterministic actor objective: mean_j [- min_i Q_i(s_j, tanh(raw(s_j)))].
double td3_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                      const MatrixXd& states, Grads* grads, double* mean_abs_q = nullptr);

// Residual variants: the actor consumes [obs; a_off], its output is a
// corrective action, and the critic scores a_mix = clip(a_off + a_res).
double sac_residual_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                               const MatrixXd& obs, const MatrixXd& a_off, const MatrixXd& eps,
                               double alpha, Grads* grads, double* mean_abs_q = nullptr);
double td3_residual_actor_loss(const Mlp& actor, const std::vector<const Mlp*>& critics,
                               const MatrixXd& obs, const MatrixXd& a_off, Grads* grads,
                               double* mean_abs_q = nullptr);

// Behavior cloning. NLL for stochastic (tanh-Gaussian) actors, squared error
// for deterministic (tanh) actors.
double bc_nll_loss(const Mlp& actor, const MatrixXd& states, const MatrixXd& actions,
                   Grads* grads);
double bc_mse_loss(const Mlp& actor, const MatrixXd& states, const MatrixXd& actions,
                   Grads* grads);

// Conservative critic objectives. cand_a holds cand_per_state pre-drawn
// candidate actions per state, state-major; cand_logd carries each
// candidate's log proposal density (importance correction, H variant only).
enum class CqlVariant { Rho, H, CalQl };
struct CqlLossTerms {
  double total = 0.0;
  double push_down = 0.0;     // first term of the objective
  double dataset_term = 0.0;  // mean Q over dataset actions
  double bellman = 0.0;
};
CqlLossTerms cql_critic_loss(const Mlp& critic, const MatrixXd& s, const MatrixXd& a_data,
                             const VectorXd& y, const MatrixXd& cand_a, const VectorXd& cand_logd,
                             int cand_per_state, CqlVariant variant, double weight,
                             const VectorXd& mc_return, Grads* grads);

// Monte-Carlo return regression (the MCQ objective's main branch).
double mcq_regression_loss(const Mlp& critic, const MatrixXd& sa, const VectorXd& mc_return,
                           Grads* grads);

// Auxiliary BC weight: alpha_bc / mean|Q|.
double auxbc_weight(double alpha_bc, double mean_abs_q);

// Policy evaluation helpers.
struct PolicySample {
  MatrixXd action;
  VectorXd log_prob;
};
// rng == nullptr gives the deterministic mean action tanh(mean).
PolicySample sample_tanh_gaussian(const Mlp& actor, const MatrixXd& states, Rng* rng);
// log pi(a|s) of given squashed actions under the actor.
VectorXd tanh_gaussian_log_prob(const Mlp& actor, const MatrixXd& states, const MatrixXd& actions);
MatrixXd tanh_policy(const Mlp& actor, const MatrixXd& states);

}  // namespace darl
