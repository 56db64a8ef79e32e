#include "darl/nn.hpp"

#include <cmath>
#include <fstream>

namespace darl {

Mlp make_mlp(const std::vector<int>& dims, Head head, Rng& rng, bool zero_final) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least an input and an output dimension");
  for (int d : dims)
    if (d < 1) throw ConfigError("mlp dimensions must be positive");
  Mlp net;
  net.head = head;
  const int layers = static_cast<int>(dims.size()) - 1;
  net.w.reserve(layers);
  net.b.reserve(layers);
  for (int k = 0; k < layers; ++k) {
    const int in = dims[k], out = dims[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    MatrixXd w(out, in);
    VectorXd b(out);
    for (int c = 0; c < in; ++c)
      for (int r = 0; r < out; ++r) w(r, c) = rng.uniform(-bound, bound);
    for (int r = 0; r < out; ++r) b[r] = rng.uniform(-bound, bound);
    if (zero_final && k == layers - 1) {
      w.setZero();
      b.setZero();
    }
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
  return net;
}

bool same_shape(const Mlp& a, const Mlp& b) {
  if (a.w.size() != b.w.size() || a.head != b.head) return false;
  for (size_t k = 0; k < a.w.size(); ++k)
    if (a.w[k].rows() != b.w[k].rows() || a.w[k].cols() != b.w[k].cols()) return false;
  return true;
}

bool bit_equal(const Mlp& a, const Mlp& b) {
  if (!same_shape(a, b)) return false;
  for (size_t k = 0; k < a.w.size(); ++k)
    if (a.w[k] != b.w[k] || a.b[k] != b.b[k]) return false;
  return true;
}

bool all_finite(const Mlp& m) {
  for (size_t k = 0; k < m.w.size(); ++k)
    if (!m.w[k].allFinite() || !m.b[k].allFinite()) return false;
  return true;
}

void Grads::set_zero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
}

void Grads::axpy(double scale, const Grads& other) {
  for (size_t k = 0; k < w.size(); ++k) {
    w[k] += scale * other.w[k];
    b[k] += scale * other.b[k];
  }
}

double Grads::squared_norm() const {
  double s = 0.0;
  for (size_t k = 0; k < w.size(); ++k) s += w[k].squaredNorm() + b[k].squaredNorm();
  return s;
}

Grads zeros_like(const Mlp& net) {
  Grads g;
  g.w.reserve(net.w.size());
  g.b.reserve(net.b.size());
  for (size_t k = 0; k < net.w.size(); ++k) {
    g.w.emplace_back(MatrixXd::Zero(net.w[k].rows(), net.w[k].cols()));
    g.b.emplace_back(VectorXd::Zero(net.b[k].size()));
  }
  return g;
}

MatrixXd mlp_forward(const Mlp& net, const MatrixXd& x) {
  if (x.rows() != net.in_dim())
    throw ConfigError("mlp input dimension mismatch: got " + std::to_string(x.rows()) +
                      ", expected " + std::to_string(net.in_dim()));
  MatrixXd h = x;
  const int layers = net.num_layers();
  for (int k = 0; k < layers; ++k) {
    MatrixXd z = (net.w[k] * h).colwise() + net.b[k];
    if (k + 1 < layers) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

const MatrixXd& mlp_forward_cached(const Mlp& net, const MatrixXd& x, FwdCache& cache) {
  if (x.rows() != net.in_dim())
    throw ConfigError("mlp input dimension mismatch: got " + std::to_string(x.rows()) +
                      ", expected " + std::to_string(net.in_dim()));
  const int layers = net.num_layers();
  cache.act.assign(1, x);
  cache.act.reserve(layers + 1);
  for (int k = 0; k < layers; ++k) {
    MatrixXd z = (net.w[k] * cache.act.back()).colwise() + net.b[k];
    if (k + 1 < layers) z = z.cwiseMax(0.0);
    cache.act.push_back(std::move(z));
  }
  return cache.act.back();
}

MatrixXd mlp_backward(const Mlp& net, const FwdCache& cache, const MatrixXd& d_out, Grads& grads) {
  const int layers = net.num_layers();
  MatrixXd g = d_out;  // gradient w.r.t. the pre-activation of the current layer
  for (int k = layers - 1; k >= 0; --k) {
    grads.w[k].noalias() += g * cache.act[k].transpose();
    grads.b[k] += g.rowwise().sum();
    if (k == 0) return net.w[0].transpose() * g;
    MatrixXd gp = net.w[k].transpose() * g;
    // ReLU mask: post-activation > 0 iff pre-activation > 0.
    g = gp.array() * (cache.act[k].array() > 0.0).cast<double>();
  }
  return g;  // unreachable
}

GaussianParams split_gaussian(const MatrixXd& raw) {
  const int m = static_cast<int>(raw.rows()) / 2;
  if (raw.rows() % 2 != 0) throw ConfigError("tanh-gaussian head needs an even raw output dim");
  GaussianParams p;
  p.mean = raw.topRows(m);
  MatrixXd ls = raw.bottomRows(m);
  p.clamp_active = ((ls.array() > kLogStdMin) && (ls.array() < kLogStdMax)).cast<double>();
  p.log_std = ls.array().min(kLogStdMax).max(kLogStdMin);
  p.stddev = p.log_std.array().exp();
  return p;
}

double log_one_minus_tanh_sq(double u) {
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
  const double x = -2.0 * u;
  const double softplus = x > 20.0 ? x : std::log1p(std::exp(x));
  return 2.0 * (std::log(2.0) - u - softplus);
}

AdamState make_adam(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (size_t k = 0; k < net.w.size(); ++k) {
    s.mw.emplace_back(MatrixXd::Zero(net.w[k].rows(), net.w[k].cols()));
    s.vw.emplace_back(MatrixXd::Zero(net.w[k].rows(), net.w[k].cols()));
    s.mb.emplace_back(VectorXd::Zero(net.b[k].size()));
    s.vb.emplace_back(VectorXd::Zero(net.b[k].size()));
  }
  return s;
}

void adam_step(Mlp& net, AdamState& state, const Grads& grads) {
  if (state.mw.size() != net.w.size() || grads.w.size() != net.w.size())
    throw ConfigError("adam state/gradient shapes do not match the network");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < net.w.size(); ++k) {
    if (grads.w[k].rows() != net.w[k].rows() || grads.w[k].cols() != net.w[k].cols())
      throw ConfigError("adam gradient shape mismatch at layer " + std::to_string(k));
    state.mw[k] = state.beta1 * state.mw[k] + (1.0 - state.beta1) * grads.w[k];
    state.vw[k] = state.beta2 * state.vw[k].array().matrix() +
                  (1.0 - state.beta2) * grads.w[k].array().square().matrix();
    state.mb[k] = state.beta1 * state.mb[k] + (1.0 - state.beta1) * grads.b[k];
    state.vb[k] = state.beta2 * state.vb[k].array().matrix() +
                  (1.0 - state.beta2) * grads.b[k].array().square().matrix();
    net.w[k].array() -= state.lr * (state.mw[k].array() / bc1) /
                        ((state.vw[k].array() / bc2).sqrt() + state.eps);
    net.b[k].array() -= state.lr * (state.mb[k].array() / bc1) /
                        ((state.vb[k].array() / bc2).sqrt() + state.eps);
  }
}

void ema_update(Mlp& target, const Mlp& online, double tau) {
  if (!same_shape(target, online)) throw ConfigError("ema_update shape mismatch");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("ema tau must lie in [0, 1]");
  for (size_t k = 0; k < target.w.size(); ++k) {
    target.w[k] = (1.0 - tau) * target.w[k] + tau * online.w[k];
    target.b[k] = (1.0 - tau) * target.b[k] + tau * online.b[k];
  }
}

namespace {
constexpr char kMagic[8] = {'D', 'A', 'R', 'L', 'M', 'L', 'P', '\0'};
constexpr uint32_t kFormatVersion = 1;
}  // namespace

void save_mlp(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, 8);
  write_u32_le(out, kFormatVersion);
  write_u32_le(out, static_cast<uint32_t>(net.head));
  write_u32_le(out, static_cast<uint32_t>(net.num_layers()));
  for (int k = 0; k < net.num_layers(); ++k) {
    write_u32_le(out, static_cast<uint32_t>(net.w[k].rows()));
    write_u32_le(out, static_cast<uint32_t>(net.w[k].cols()));
  }
  for (int k = 0; k < net.num_layers(); ++k) {
    for (Eigen::Index r = 0; r < net.w[k].rows(); ++r)
      for (Eigen::Index c = 0; c < net.w[k].cols(); ++c) write_f64_le(out, net.w[k](r, c));
    for (Eigen::Index r = 0; r < net.b[k].size(); ++r) write_f64_le(out, net.b[k][r]);
  }
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  const uint32_t version = read_u32_le(in);
  if (version != kFormatVersion)
    throw IoError("unsupported checkpoint format version " + std::to_string(version));
  const uint32_t head = read_u32_le(in);
  if (head > 2) throw IoError("unknown head tag " + std::to_string(head));
  const uint32_t layers = read_u32_le(in);
  if (layers == 0 || layers > 64) throw IoError("implausible layer count in checkpoint");
  Mlp net;
  net.head = static_cast<Head>(head);
  std::vector<std::pair<uint32_t, uint32_t>> dims(layers);
  for (auto& d : dims) {
    d.first = read_u32_le(in);
    d.second = read_u32_le(in);
  }
  for (uint32_t k = 0; k < layers; ++k) {
    MatrixXd w(dims[k].first, dims[k].second);
    VectorXd b(dims[k].first);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = read_f64_le(in);
    for (Eigen::Index r = 0; r < b.size(); ++r) b[r] = read_f64_le(in);
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
  // Dimension chaining check.
  for (uint32_t k = 1; k < layers; ++k)
    if (net.w[k].cols() != net.w[k - 1].rows())
      throw IoError("checkpoint layer dimensions do not chain");
  return net;
}

}  // namespace darl
