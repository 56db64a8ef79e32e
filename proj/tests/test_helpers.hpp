// Shared test utilities: the central-finite-difference gradient oracle and a
// scoped temporary directory.
#pragma once

#include "darl/nn.hpp"

#include <doctest.h>

#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace darl::test {

// Independent gradient oracle: central differences over every parameter of a
// network. The loss functor must be a pure function of the network.
inline Grads fd_grads(Mlp net, const std::function<double(const Mlp&)>& loss, double delta = 1e-5) {
  Grads g = zeros_like(net);
  for (size_t k = 0; k < net.w.size(); ++k) {
    for (Eigen::Index r = 0; r < net.w[k].rows(); ++r)
      for (Eigen::Index c = 0; c < net.w[k].cols(); ++c) {
        const double orig = net.w[k](r, c);
        net.w[k](r, c) = orig + delta;
        const double up = loss(net);
        net.w[k](r, c) = orig - delta;
        const double down = loss(net);
        net.w[k](r, c) = orig;
        g.w[k](r, c) = (up - down) / (2.0 * delta);
      }
    for (Eigen::Index r = 0; r < net.b[k].size(); ++r) {
      const double orig = net.b[k][r];
      net.b[k][r] = orig + delta;
      const double up = loss(net);
      net.b[k][r] = orig - delta;
      const double down = loss(net);
      net.b[k][r] = orig;
      g.b[k][r] = (up - down) / (2.0 * delta);
    }
  }
  return g;
}

// Worst relative disagreement between analytic and finite-difference
// gradients, with an absolute floor so near-zero entries do not blow up.
inline double max_rel_err(const Grads& analytic, const Grads& fd, double floor_abs = 1e-6) {
  double worst = 0.0;
  auto upd = [&](double a, double f) {
    const double denom = std::max({std::fabs(a), std::fabs(f), floor_abs});
    worst = std::max(worst, std::fabs(a - f) / denom);
  };
  for (size_t k = 0; k < analytic.w.size(); ++k) {
    for (Eigen::Index r = 0; r < analytic.w[k].rows(); ++r)
      for (Eigen::Index c = 0; c < analytic.w[k].cols(); ++c) upd(analytic.w[k](r, c), fd.w[k](r, c));
    for (Eigen::Index r = 0; r < analytic.b[k].size(); ++r) upd(analytic.b[k][r], fd.b[k][r]);
  }
  return worst;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    dir_ = std::filesystem::temp_directory_path() /
           ("darl-test-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace darl::test
