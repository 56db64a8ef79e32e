#include "darl/losses.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

using namespace darl;
using darl::test::fd_grads;
using darl::test::max_rel_err;

namespace {

Mlp small_critic(Rng& rng, int in) { return make_mlp({in, 8, 8, 1}, Head::Linear, rng); }

struct ActorFixture {
  Mlp actor;
  Mlp q1, q2;
  MatrixXd states, eps;
  std::vector<const Mlp*> critics;
  int n, m, b;

  ActorFixture(uint64_t seed, int n_, int m_, int b_, bool stochastic) : n(n_), m(m_), b(b_) {
    Rng rng(seed);
    actor = make_mlp({n, 8, 8, stochastic ? 2 * m : m},
                     stochastic ? Head::TanhGaussian : Head::Tanh, rng);
    q1 = small_critic(rng, n + m);
    q2 = small_critic(rng, n + m);
    states = rng.normal_mat(n, b);
    eps = rng.normal_mat(m, b);
    critics = {&q1, &q2};
  }
};

}  // namespace

TEST_CASE("critic regression loss gradient matches finite differences") {
  Rng rng(101);
  Mlp critic = small_critic(rng, 6);
  MatrixXd sa = rng.normal_mat(6, 7);
  VectorXd y = rng.normal_vec(7);
  Grads analytic = zeros_like(critic);
  critic_mse_loss(critic, sa, y, &analytic);
  Grads fd = fd_grads(critic, [&](const Mlp& m) { return critic_mse_loss(m, sa, y, nullptr); });
  CHECK(max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("stochastic actor objective gradient matches finite differences") {
  ActorFixture fx(102, 4, 2, 5, true);
  Grads analytic = zeros_like(fx.actor);
  sac_actor_loss(fx.actor, fx.critics, fx.states, fx.eps, 0.2, &analytic);
  Grads fd = fd_grads(fx.actor, [&](const Mlp& m) {
    return sac_actor_loss(m, fx.critics, fx.states, fx.eps, 0.2, nullptr);
  });
  CHECK(max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("deterministic actor objective gradient matches finite differences") {
  ActorFixture fx(103, 3, 2, 6, false);
  Grads analytic = zeros_like(fx.actor);
  td3_actor_loss(fx.actor, fx.critics, fx.states, &analytic);
  Grads fd = fd_grads(
      fx.actor, [&](const Mlp& m) { return td3_actor_loss(m, fx.critics, fx.states, nullptr); });
  CHECK(max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("residual actor objectives pass the gradient check") {
  Rng rng(104);
  const int n = 3, m = 2, b = 5;
  MatrixXd obs = rng.normal_mat(n, b);
  MatrixXd a_off = 0.5 * rng.normal_mat(m, b).array().tanh().matrix();
  Mlp q1 = small_critic(rng, n + m), q2 = small_critic(rng, n + m);
  std::vector<const Mlp*> critics = {&q1, &q2};

  SUBCASE("stochastic residual") {
    Mlp actor = make_mlp({n + m, 8, 2 * m}, Head::TanhGaussian, rng);
    MatrixXd eps = rng.normal_mat(m, b);
    Grads analytic = zeros_like(actor);
    sac_residual_actor_loss(actor, critics, obs, a_off, eps, 0.2, &analytic);
    // A 1e-5 step crosses a ReLU kink of this fixture's second critic;
    // 1e-6 keeps the finite-difference oracle on one side of it.
    Grads fd = fd_grads(actor, [&](const Mlp& mm) {
      return sac_residual_actor_loss(mm, critics, obs, a_off, eps, 0.2, nullptr);
    }, 1e-6);
    CHECK(max_rel_err(analytic, fd) < 1e-4);
  }
  SUBCASE("deterministic residual") {
    Mlp actor = make_mlp({n + m, 8, m}, Head::Tanh, rng);
    Grads analytic = zeros_like(actor);
    td3_residual_actor_loss(actor, critics, obs, a_off, &analytic);
    Grads fd = fd_grads(actor, [&](const Mlp& mm) {
      return td3_residual_actor_loss(mm, critics, obs, a_off, nullptr);
    });
    CHECK(max_rel_err(analytic, fd) < 1e-4);
  }
}

TEST_CASE("behavior-cloning NLL gradient matches finite differences") {
  Rng rng(105);
  const int n = 4, m = 2, b = 6;
  Mlp actor = make_mlp({n, 8, 8, 2 * m}, Head::TanhGaussian, rng);
  MatrixXd states = rng.normal_mat(n, b);
  MatrixXd actions = 0.8 * rng.normal_mat(m, b).array().tanh().matrix();
  Grads analytic = zeros_like(actor);
  bc_nll_loss(actor, states, actions, &analytic);
  Grads fd =
      fd_grads(actor, [&](const Mlp& mm) { return bc_nll_loss(mm, states, actions, nullptr); });
  CHECK(max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("behavior-cloning MSE gradient matches finite differences") {
  Rng rng(106);
  const int n = 3, m = 2, b = 5;
  Mlp actor = make_mlp({n, 8, m}, Head::Tanh, rng);
  MatrixXd states = rng.normal_mat(n, b);
  MatrixXd actions = 0.8 * rng.normal_mat(m, b).array().tanh().matrix();
  Grads analytic = zeros_like(actor);
  bc_mse_loss(actor, states, actions, &analytic);
  Grads fd =
      fd_grads(actor, [&](const Mlp& mm) { return bc_mse_loss(mm, states, actions, nullptr); });
  CHECK(max_rel_err(analytic, fd) < 1e-4);
}

namespace {

struct CqlFixture {
  Mlp critic;
  MatrixXd s, a_data, cand;
  VectorXd y, logd, returns;
  int k;  // candidates per state

  CqlFixture(uint64_t seed, int cand_per_state) : k(cand_per_state) {
    Rng rng(seed);
    const int n = 3, m = 2, b = 4;
    critic = make_mlp({n + m, 8, 8, 1}, Head::Linear, rng);
    s = rng.normal_mat(n, b);
    a_data = 0.8 * rng.normal_mat(m, b).array().tanh().matrix();
    y = rng.normal_vec(b);
    cand = 0.9 * rng.normal_mat(m, b * k).array().tanh().matrix();
    logd = rng.normal_vec(b * k).array() - 1.0;  // arbitrary proposal densities
    returns = rng.normal_vec(b);
  }
};

}  // namespace

TEST_CASE("conservative critic loss gradients match finite differences") {
  SUBCASE("expected-Q push-down variant") {
    CqlFixture fx(107, 10);
    Grads analytic = zeros_like(fx.critic);
    cql_critic_loss(fx.critic, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k, CqlVariant::Rho, 5.0,
                    VectorXd(), &analytic);
    Grads fd = fd_grads(fx.critic, [&](const Mlp& m) {
      return cql_critic_loss(m, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k, CqlVariant::Rho,
                             5.0, VectorXd(), nullptr)
          .total;
    });
    CHECK(max_rel_err(analytic, fd) < 1e-4);
  }
  SUBCASE("logsumexp push-down variant with importance correction") {
    CqlFixture fx(108, 20);
    Grads analytic = zeros_like(fx.critic);
    cql_critic_loss(fx.critic, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k, CqlVariant::H, 5.0,
                    VectorXd(), &analytic);
    Grads fd = fd_grads(fx.critic, [&](const Mlp& m) {
      return cql_critic_loss(m, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k, CqlVariant::H, 5.0,
                             VectorXd(), nullptr)
          .total;
    });
    CHECK(max_rel_err(analytic, fd) < 1e-4);
  }
  SUBCASE("return-floored push-down variant") {
    CqlFixture fx(109, 10);
    Grads analytic = zeros_like(fx.critic);
    cql_critic_loss(fx.critic, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k, CqlVariant::CalQl,
                    5.0, fx.returns, &analytic);
    Grads fd = fd_grads(fx.critic, [&](const Mlp& m) {
      return cql_critic_loss(m, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k, CqlVariant::CalQl,
                             5.0, fx.returns, nullptr)
          .total;
    });
    CHECK(max_rel_err(analytic, fd) < 1e-4);
  }
}

TEST_CASE("return-regression loss gradient matches finite differences") {
  Rng rng(110);
  Mlp critic = small_critic(rng, 5);
  MatrixXd sa = rng.normal_mat(5, 6);
  VectorXd g_ret = rng.normal_vec(6);
  Grads analytic = zeros_like(critic);
  mcq_regression_loss(critic, sa, g_ret, &analytic);
  Grads fd =
      fd_grads(critic, [&](const Mlp& m) { return mcq_regression_loss(m, sa, g_ret, nullptr); });
  CHECK(max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("auxiliary-BC composite actor gradient matches finite differences") {
  ActorFixture fx(111, 4, 2, 5, true);
  Rng rng(112);
  MatrixXd off_s = rng.normal_mat(4, 5);
  MatrixXd off_a = 0.8 * rng.normal_mat(2, 5).array().tanh().matrix();
  const double lambda_bc = 0.7;  // fixed normalizer for the check

  auto combined = [&](const Mlp& m, Grads* g) {
    double loss = sac_actor_loss(m, fx.critics, fx.states, fx.eps, 0.2, g);
    if (g) {
      Grads gb = zeros_like(m);
      loss += lambda_bc * bc_nll_loss(m, off_s, off_a, &gb);
      g->axpy(lambda_bc, gb);
    } else {
      loss += lambda_bc * bc_nll_loss(m, off_s, off_a, nullptr);
    }
    return loss;
  };
  Grads analytic = zeros_like(fx.actor);
  combined(fx.actor, &analytic);
  Grads fd = fd_grads(fx.actor, [&](const Mlp& m) { return combined(m, nullptr); });
  CHECK(max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("auxiliary-BC weight halves when the Q scale doubles") {
  const double w1 = auxbc_weight(2.5, 1.7);
  const double w2 = auxbc_weight(2.5, 3.4);
  CHECK(w2 == doctest::Approx(w1 / 2.0).epsilon(1e-12));
  CHECK(auxbc_weight(0.0, 1.0) == 0.0);  // disabled term
}

TEST_CASE("constant critic reduces the stochastic actor gradient to the entropy path") {
  ActorFixture fx(113, 3, 2, 6, true);
  Mlp c1 = fx.q1, c2 = fx.q2;
  for (auto& w : c1.w) w.setZero();
  for (auto& w : c2.w) w.setZero();
  for (auto& b : c1.b) b.setZero();
  for (auto& b : c2.b) b.setZero();
  c1.b.back()[0] = 1.3;
  c2.b.back()[0] = -0.4;
  std::vector<const Mlp*> constant_critics = {&c1, &c2};

  Grads analytic = zeros_like(fx.actor);
  sac_actor_loss(fx.actor, constant_critics, fx.states, fx.eps, 0.2, &analytic);

  // Entropy-only oracle: alpha * mean log pi under the same fixed noise.
  auto entropy_only = [&](const Mlp& m) {
    GaussianParams p = split_gaussian(mlp_forward(m, fx.states));
    MatrixXd u = p.mean + p.stddev.cwiseProduct(fx.eps);
    double lp = 0.0;
    for (int j = 0; j < fx.b; ++j)
      for (int d = 0; d < fx.m; ++d)
        lp += -0.5 * fx.eps(d, j) * fx.eps(d, j) - p.log_std(d, j) - 0.9189385332046727 -
              log_one_minus_tanh_sq(u(d, j));
    return 0.2 * lp / fx.b;
  };
  Grads fd = fd_grads(fx.actor, entropy_only);
  CHECK(max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("conservative loss terms obey the documented identities") {
  CqlFixture fx(114, 10);

  SUBCASE("weight 0 reduces to the Bellman regression") {
    CqlLossTerms t = cql_critic_loss(fx.critic, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k,
                                 CqlVariant::Rho, 0.0, VectorXd(), nullptr);
    MatrixXd sa(fx.s.rows() + fx.a_data.rows(), fx.s.cols());
    sa << fx.s, fx.a_data;
    const double bellman = critic_mse_loss(fx.critic, sa, fx.y, nullptr);
    CHECK(t.total == doctest::Approx(bellman).epsilon(1e-12));
  }

  SUBCASE("a critic constant in its input cancels the push-down against the dataset term") {
    Mlp flat = fx.critic;
    for (auto& w : flat.w) w.setZero();
    for (auto& b : flat.b) b.setZero();
    flat.b.back()[0] = 2.5;
    CqlLossTerms t = cql_critic_loss(flat, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k,
                                 CqlVariant::Rho, 5.0, VectorXd(), nullptr);
    CHECK(t.push_down - t.dataset_term == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("floored variant with all Q above the returns equals the plain variant") {
    VectorXd low_returns = VectorXd::Constant(fx.s.cols(), -1e6);
    CqlLossTerms a = cql_critic_loss(fx.critic, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k,
                                 CqlVariant::CalQl, 5.0, low_returns, nullptr);
    CqlLossTerms b = cql_critic_loss(fx.critic, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k,
                                 CqlVariant::Rho, 5.0, VectorXd(), nullptr);
    CHECK(a.push_down == doctest::Approx(b.push_down).epsilon(1e-12));
  }

  SUBCASE("floored variant with all Q below the returns has a constant push-down") {
    VectorXd high_returns = VectorXd::Constant(fx.s.cols(), 1e6);
    Grads with_floor = zeros_like(fx.critic);
    cql_critic_loss(fx.critic, fx.s, fx.a_data, fx.y, fx.cand, fx.logd, fx.k, CqlVariant::CalQl,
                    5.0, high_returns, &with_floor);
    // Expected gradient: Bellman term + weight * (-dataset term); the
    // saturated push-down contributes nothing.
    MatrixXd sa(fx.s.rows() + fx.a_data.rows(), fx.s.cols());
    sa << fx.s, fx.a_data;
    Grads expected = zeros_like(fx.critic);
    critic_mse_loss(fx.critic, sa, fx.y, &expected);
    FwdCache cache;
    mlp_forward_cached(fx.critic, sa, cache);
    MatrixXd d_out = MatrixXd::Constant(1, fx.s.cols(), -5.0 / fx.s.cols());
    mlp_backward(fx.critic, cache, d_out, expected);
    with_floor.axpy(-1.0, expected);
    CHECK(with_floor.squared_norm() < 1e-20);
  }

  SUBCASE("two-row hand oracle for the floored push-down") {
    Mlp sum_net;  // Q(s, a) = sum of inputs
    sum_net.head = Head::Linear;
    sum_net.w.push_back(MatrixXd::Ones(1, 3));
    sum_net.b.push_back(VectorXd::Zero(1));
    MatrixXd s(2, 2);
    s << 1.0, 0.0, 0.0, 1.0;
    MatrixXd a_data(1, 2);
    a_data << 0.5, -0.5;
    VectorXd y = VectorXd::Zero(2);
    MatrixXd cand(1, 2);
    cand << 0.25, -0.75;
    VectorXd logd = VectorXd::Zero(2);
    VectorXd g_ret(2);
    g_ret << 1.0, 0.9;
    // Q(s1, c1) = 1 + 0 + 0.25 = 1.25 (above G = 1.0)
    // Q(s2, c2) = 0 + 1 - 0.75 = 0.25 (below G = 0.9 -> floored)
    // push_down = (1.25 + 0.9) / 2 = 1.075
    CqlLossTerms t =
        cql_critic_loss(sum_net, s, a_data, y, cand, logd, 1, CqlVariant::CalQl, 1.0, g_ret,
                        nullptr);
    CHECK(t.push_down == doctest::Approx(1.075).epsilon(1e-12));
  }
}

TEST_CASE("min-q input gradient routes through the pointwise smaller critic") {
  Rng rng(115);
  Mlp q1 = small_critic(rng, 4), q2 = small_critic(rng, 4);
  MatrixXd sa = rng.normal_mat(4, 3);
  VectorXd w = VectorXd::Ones(3);
  VectorXd vals;
  MatrixXd din = min_q_input_grad({&q1, &q2}, sa, w, &vals);
  const double delta = 1e-6;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 4; ++r) {
      MatrixXd up = sa, down = sa;
      up(r, c) += delta;
      down(r, c) -= delta;
      const double fd =
          (min_q_values({&q1, &q2}, up).sum() - min_q_values({&q1, &q2}, down).sum()) /
          (2 * delta);
      CHECK(din(r, c) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("non-finite targets raise a numerical failure") {
  Rng rng(116);
  Mlp critic = small_critic(rng, 4);
  MatrixXd sa = rng.normal_mat(4, 2);
  VectorXd y(2);
  y << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(critic_mse_loss(critic, sa, y, nullptr), NumericError);
}
