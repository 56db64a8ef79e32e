// Dense MLP substrate: forward/backward passes, Adam, EMA target tracking,
// portable checkpoint IO. Batches are column-major: one sample per column.
#pragma once

#include "darl/common.hpp"

namespace darl {

// Output head applied by consumers on top of the raw final-layer output.
// TanhGaussian nets emit 2m raw outputs (mean, log-std) for action dim m.
enum class Head : uint32_t { Linear = 0, Tanh = 1, TanhGaussian = 2 };

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;

struct Mlp {
  std::vector<MatrixXd> w;  // w[k] is out_k x in_k
  std::vector<VectorXd> b;
  Head head = Head::Linear;

  int num_layers() const { return static_cast<int>(w.size()); }
  int in_dim() const { return static_cast<int>(w.front().cols()); }
  int raw_out_dim() const { return static_cast<int>(w.back().rows()); }
  // Action dimension implied by the head.
  int action_dim() const { return head == Head::TanhGaussian ? raw_out_dim() / 2 : raw_out_dim(); }
};

// dims = {in, hidden..., raw_out}. Uniform fan-in init; zero_final zeroes the
// output layer (residual policies).
Mlp make_mlp(const std::vector<int>& dims, Head head, Rng& rng, bool zero_final = false);

bool same_shape(const Mlp& a, const Mlp& b);
bool bit_equal(const Mlp& a, const Mlp& b);
bool all_finite(const Mlp& m);

struct Grads {
  std::vector<MatrixXd> w;
  std::vector<VectorXd> b;
  void set_zero();
  void axpy(double scale, const Grads& other);  // this += scale * other
  double squared_norm() const;
};
Grads zeros_like(const Mlp& net);

struct FwdCache {
  // act[0] = input; act[k] = post-ReLU output of layer k-1 for hidden layers;
  // act.back() = raw output of the final layer (no activation).
  std::vector<MatrixXd> act;
};

// Raw pre-head outputs. Hidden activation is ReLU throughout.
MatrixXd mlp_forward(const Mlp& net, const MatrixXd& x);
const MatrixXd& mlp_forward_cached(const Mlp& net, const MatrixXd& x, FwdCache& cache);

// Backpropagates d_loss/d_raw_output, accumulating parameter gradients into
// grads. Returns d_loss/d_input.
MatrixXd mlp_backward(const Mlp& net, const FwdCache& cache, const MatrixXd& d_out, Grads& grads);

// Split + clamp a TanhGaussian raw output into (mean, log_std).
// clamp_active is 1 where log_std was inside the clamp range (gradient mask).
struct GaussianParams {
  MatrixXd mean, log_std, stddev;
  Eigen::ArrayXXd clamp_active;
};
GaussianParams split_gaussian(const MatrixXd& raw);

// log(1 - tanh(u)^2) in a numerically stable form.
double log_one_minus_tanh_sq(double u);

struct AdamState {
  std::vector<MatrixXd> mw, vw;
  std::vector<VectorXd> mb, vb;
  int64_t step = 0;
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};
AdamState make_adam(const Mlp& net, double lr);

// Standard Adam with bias correction; increments state.step.
void adam_step(Mlp& net, AdamState& state, const Grads& grads);

// target = (1 - tau) * target + tau * online, element-wise.
void ema_update(Mlp& target, const Mlp& online, double tau);

// Checkpoint file: magic, format version, head tag, layer dims, then
// row-major little-endian f64 weight/bias arrays. Bit-exact round-trip.
void save_mlp(const Mlp& net, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace darl
