#include "darl/nn.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

using namespace darl;

TEST_CASE("zero-weight network maps any input to zero") {
  Rng rng(1);
  Mlp net = make_mlp({3, 4, 2}, Head::Linear, rng);
  for (auto& w : net.w) w.setZero();
  for (auto& b : net.b) b.setZero();
  MatrixXd x = rng.normal_mat(3, 5);
  CHECK(mlp_forward(net, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity single linear layer reproduces its input") {
  Mlp net;
  net.head = Head::Linear;
  net.w.push_back(MatrixXd::Identity(2, 2));
  net.b.push_back(VectorXd::Zero(2));
  MatrixXd x(2, 1);
  x << 1.0, 2.0;
  MatrixXd y = mlp_forward(net, x);
  CHECK(y(0, 0) == 1.0);
  CHECK(y(1, 0) == 2.0);
}

TEST_CASE("random 2-layer forward matches a naive matrix-multiply oracle") {
  Rng rng(7);
  Mlp net = make_mlp({4, 6, 3}, Head::Linear, rng);
  VectorXd x = rng.normal_vec(4);

  // Hand-rolled oracle: explicit loops, no shared code path.
  std::vector<double> h(6, 0.0);
  for (int r = 0; r < 6; ++r) {
    double acc = net.b[0][r];
    for (int c = 0; c < 4; ++c) acc += net.w[0](r, c) * x[c];
    h[r] = acc > 0.0 ? acc : 0.0;
  }
  std::vector<double> out(3, 0.0);
  for (int r = 0; r < 3; ++r) {
    double acc = net.b[1][r];
    for (int c = 0; c < 6; ++c) acc += net.w[1](r, c) * h[c];
    out[r] = acc;
  }

  MatrixXd y = mlp_forward(net, x);
  for (int r = 0; r < 3; ++r) CHECK(y(r, 0) == doctest::Approx(out[r]).epsilon(1e-12));
}

TEST_CASE("forward is pure: identical inputs give bit-identical outputs") {
  Rng rng(11);
  Mlp net = make_mlp({5, 8, 8, 2}, Head::Linear, rng);
  MatrixXd x = rng.normal_mat(5, 9);
  MatrixXd a = mlp_forward(net, x);
  MatrixXd b = mlp_forward(net, x);
  CHECK(a == b);
}

TEST_CASE("forward rejects dimension mismatches") {
  Rng rng(3);
  Mlp net = make_mlp({4, 4, 1}, Head::Linear, rng);
  CHECK_THROWS_AS(mlp_forward(net, MatrixXd::Zero(3, 1)), ConfigError);
}

TEST_CASE("squared-error backprop on one linear sample equals the hand derivative") {
  // 1-layer linear net, one sample: L = (w x + b - t)^2,
  // dL/dw = 2 (pred - t) x, dL/db = 2 (pred - t).
  Mlp net;
  net.head = Head::Linear;
  net.w.push_back((MatrixXd(1, 2) << 0.3, -0.7).finished());
  net.b.push_back((VectorXd(1) << 0.1).finished());
  MatrixXd x(2, 1);
  x << 0.5, -1.5;
  const double target = 0.9;

  FwdCache cache;
  const MatrixXd& raw = mlp_forward_cached(net, x, cache);
  const double pred = raw(0, 0);
  MatrixXd d_out(1, 1);
  d_out(0, 0) = 2.0 * (pred - target);
  Grads g = zeros_like(net);
  mlp_backward(net, cache, d_out, g);

  CHECK(g.w[0](0, 0) == doctest::Approx(2.0 * (pred - target) * 0.5).epsilon(1e-12));
  CHECK(g.w[0](0, 1) == doctest::Approx(2.0 * (pred - target) * -1.5).epsilon(1e-12));
  CHECK(g.b[0][0] == doctest::Approx(2.0 * (pred - target)).epsilon(1e-12));
}

TEST_CASE("constant loss (prediction equals target) gives zero gradients") {
  Rng rng(5);
  Mlp net = make_mlp({3, 5, 1}, Head::Linear, rng);
  MatrixXd x = rng.normal_mat(3, 4);
  FwdCache cache;
  const MatrixXd& raw = mlp_forward_cached(net, x, cache);
  // d(mean (pred - pred)^2)/d pred = 0 everywhere.
  MatrixXd d_out = MatrixXd::Zero(1, raw.cols());
  Grads g = zeros_like(net);
  mlp_backward(net, cache, d_out, g);
  CHECK(g.squared_norm() == 0.0);
}

TEST_CASE("raw backprop agrees with central finite differences") {
  Rng rng(13);
  Mlp net = make_mlp({4, 8, 8, 3}, Head::Linear, rng);
  MatrixXd x = rng.normal_mat(4, 6);
  MatrixXd t = rng.normal_mat(3, 6);

  auto loss_fn = [&](const Mlp& m) {
    MatrixXd pred = mlp_forward(m, x);
    return (pred - t).squaredNorm() / x.cols();
  };
  FwdCache cache;
  const MatrixXd& pred = mlp_forward_cached(net, x, cache);
  MatrixXd d_out = 2.0 / x.cols() * (pred - t);
  Grads analytic = zeros_like(net);
  mlp_backward(net, cache, d_out, analytic);

  Grads fd = darl::test::fd_grads(net, loss_fn);
  CHECK(darl::test::max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("backprop input gradient agrees with finite differences") {
  Rng rng(17);
  Mlp net = make_mlp({3, 6, 1}, Head::Linear, rng);
  MatrixXd x = rng.normal_mat(3, 2);
  FwdCache cache;
  mlp_forward_cached(net, x, cache);
  Grads g = zeros_like(net);
  MatrixXd d_out = MatrixXd::Ones(1, 2);
  MatrixXd d_in = mlp_backward(net, cache, d_out, g);

  const double delta = 1e-6;
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 3; ++r) {
      MatrixXd xp = x, xm = x;
      xp(r, c) += delta;
      xm(r, c) -= delta;
      const double fd = (mlp_forward(net, xp).sum() - mlp_forward(net, xm).sum()) / (2 * delta);
      CHECK(d_in(r, c) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("adam with zero gradients and zero moments leaves parameters unchanged") {
  Rng rng(19);
  Mlp net = make_mlp({2, 4, 1}, Head::Linear, rng);
  Mlp before = net;
  AdamState st = make_adam(net, 3e-4);
  Grads g = zeros_like(net);
  adam_step(net, st, g);
  CHECK(bit_equal(net, before));
  CHECK(st.step == 1);
}

TEST_CASE("adam first step with unit gradient moves by about the learning rate") {
  Mlp net;
  net.head = Head::Linear;
  net.w.push_back((MatrixXd(1, 1) << 1.0).finished());
  net.b.push_back(VectorXd::Zero(1));
  AdamState st = make_adam(net, 1e-3);
  Grads g = zeros_like(net);
  g.w[0](0, 0) = 1.0;
  adam_step(net, st, g);
  // Bias-corrected first step: lr * g / (|g| + eps) = lr / (1 + eps).
  CHECK(net.w[0](0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
}

TEST_CASE("repeated identical gradients drift parameters monotonically against the sign") {
  // Scalar simulation oracle: identical positive gradients must produce a
  // strictly decreasing parameter sequence.
  Mlp net;
  net.head = Head::Linear;
  net.w.push_back((MatrixXd(1, 1) << 0.5).finished());
  net.b.push_back(VectorXd::Zero(1));
  AdamState st = make_adam(net, 1e-2);
  Grads g = zeros_like(net);
  g.w[0](0, 0) = 0.3;
  double prev = net.w[0](0, 0);
  for (int i = 0; i < 50; ++i) {
    adam_step(net, st, g);
    CHECK(net.w[0](0, 0) < prev);
    prev = net.w[0](0, 0);
  }
}

TEST_CASE("ema endpoints and the pinned smoothing value") {
  Rng rng(23);
  Mlp online = make_mlp({2, 3, 1}, Head::Linear, rng);
  Mlp target = make_mlp({2, 3, 1}, Head::Linear, rng);

  SUBCASE("tau = 1 copies the online network") {
    Mlp t = target;
    ema_update(t, online, 1.0);
    CHECK(bit_equal(t, online));
  }
  SUBCASE("tau = 0 is the identity") {
    Mlp t = target;
    ema_update(t, online, 0.0);
    CHECK(bit_equal(t, target));
  }
  SUBCASE("tau = 0.01 from zero toward one gives 0.01") {
    Mlp t = target, o = online;
    for (auto& w : t.w) w.setZero();
    for (auto& b : t.b) b.setZero();
    for (auto& w : o.w) w.setOnes();
    for (auto& b : o.b) b.setOnes();
    ema_update(t, o, 0.01);
    CHECK(t.w[0](0, 0) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(t.b[1][0] == doctest::Approx(0.01).epsilon(1e-15));
  }
}

TEST_CASE("ema is affine in its arguments") {
  Rng rng(29);
  Mlp a = make_mlp({2, 2, 1}, Head::Linear, rng);
  Mlp b = make_mlp({2, 2, 1}, Head::Linear, rng);
  const double tau = 0.3;
  Mlp t = a;
  ema_update(t, b, tau);
  for (size_t k = 0; k < t.w.size(); ++k) {
    MatrixXd expect = (1 - tau) * a.w[k] + tau * b.w[k];
    CHECK((t.w[k] - expect).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("tanh-gaussian head clamps log-std to the documented range") {
  MatrixXd raw(4, 2);
  raw << 0.5, -0.5, 1.0, 2.0,  // means
      -9.0, 7.0, 0.3, -1.0;    // log-stds
  GaussianParams p = split_gaussian(raw);
  CHECK(p.log_std(0, 0) == kLogStdMin);
  CHECK(p.log_std(0, 1) == kLogStdMax);
  CHECK(p.log_std(1, 0) == 0.3);
  CHECK(p.clamp_active(0, 0) == 0.0);
  CHECK(p.clamp_active(1, 0) == 1.0);
}

TEST_CASE("zero-initialized final layer emits the zero action") {
  Rng rng(31);
  Mlp net = make_mlp({3, 8, 2}, Head::Tanh, rng, /*zero_final=*/true);
  MatrixXd x = rng.normal_mat(3, 4);
  CHECK(mlp_forward(net, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Rng rng(37);
  Mlp net = make_mlp({5, 7, 6}, Head::TanhGaussian, rng);
  net.w[0](0, 0) = 0.1 + 0.2;  // a value without a short decimal form
  darl::test::TempDir tmp("ckpt");
  const auto path = tmp.path() / "net.mlp";
  save_mlp(net, path);
  Mlp loaded = load_mlp(path);
  CHECK(loaded.head == Head::TanhGaussian);
  CHECK(bit_equal(net, loaded));
}

TEST_CASE("checkpoint loader rejects foreign files") {
  darl::test::TempDir tmp("ckpt-bad");
  const auto path = tmp.path() / "junk.mlp";
  write_text_file(path, "not a checkpoint");
  CHECK_THROWS_AS(load_mlp(path), IoError);
}

TEST_CASE("make_mlp validates dimension lists") {
  Rng rng(41);
  CHECK_THROWS_AS(make_mlp({3}, Head::Linear, rng), ConfigError);
  CHECK_THROWS_AS(make_mlp({3, 0, 1}, Head::Linear, rng), ConfigError);
}
