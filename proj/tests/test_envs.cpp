#include "darl/env.hpp"

#include <doctest.h>

#include <cmath>

using namespace darl;

TEST_CASE("registry dimensions match the task definitions") {
  auto reach = make_env("point-reach", 0);
  CHECK(reach->spec().state_dim == 4);
  CHECK(reach->spec().action_dim == 2);
  CHECK(reach->spec().horizon == 50);
  auto push = make_env("point-push", 0);
  CHECK(push->spec().state_dim == 8);
  CHECK(push->spec().action_dim == 2);
}

TEST_CASE("unknown environment names are configuration errors") {
  CHECK_THROWS_AS(make_env("point-juggle", 0), ConfigError);
}

TEST_CASE("same spec and seed give identical reset states") {
  for (const auto& name : {"point-reach", "point-push"}) {
    auto a = make_env(name, 7);
    auto b = make_env(name, 7);
    CHECK(a->reset(42) == b->reset(42));
  }
}

TEST_CASE("different seeds give different reset states") {
  auto env = make_env("point-reach", 0);
  VectorXd s1 = env->reset(1);
  VectorXd s2 = env->reset(2);
  CHECK((s1 - s2).norm() > 0.0);
}

TEST_CASE("reset after a full episode zeroes the step counter") {
  auto env = make_env("point-reach", 0);
  env->reset(3);
  VectorXd zero = VectorXd::Zero(2);
  for (int t = 0; t < env->spec().horizon; ++t) env->step(zero);
  CHECK(env->steps_taken() == env->spec().horizon);
  CHECK(env->episode_done());
  env->reset(4);
  CHECK(env->steps_taken() == 0);
}

TEST_CASE("zero action from rest at the goal yields the success bonus") {
  auto env = make_env("point-reach", 0);
  env->set_state(VectorXd::Zero(4));  // at the goal, zero velocity
  StepResult r = env->step(VectorXd::Zero(2));
  CHECK(r.success);
  CHECK(r.reward == doctest::Approx(1.0 - 0.0));
}

TEST_CASE("zero action from rest off the goal keeps the position and pays -distance") {
  auto env = make_env("point-reach", 0);
  VectorXd s(4);
  s << 0.5, 0.5, 0.0, 0.0;
  env->set_state(s);
  StepResult r = env->step(VectorXd::Zero(2));
  CHECK(r.next_state[0] == 0.5);
  CHECK(r.next_state[1] == 0.5);
  CHECK_FALSE(r.success);
  CHECK(r.reward == doctest::Approx(-std::hypot(0.5, 0.5)));
}

TEST_CASE("fixed seed and action sequence reproduce the reference dynamics trace") {
  // Golden trace from the reference equations, recomputed here independently:
  // semi-implicit Euler with dt = 0.1, accel 1, vmax 1, workspace [-1, 1]^2,
  // reward -dist (+1 inside the 0.1 tolerance) evaluated at the next position.
  auto env = make_env("point-reach", 0);
  VectorXd state = env->reset(99);
  Rng actions(5);
  double px = state[0], py = state[1], vx = state[2], vy = state[3];
  for (int t = 0; t < 50; ++t) {
    VectorXd a(2);
    a << actions.uniform(-1.0, 1.0), actions.uniform(-1.0, 1.0);
    StepResult r = env->step(a);
    vx = std::clamp(vx + 0.1 * a[0], -1.0, 1.0);
    vy = std::clamp(vy + 0.1 * a[1], -1.0, 1.0);
    px = std::clamp(px + 0.1 * vx, -1.0, 1.0);
    py = std::clamp(py + 0.1 * vy, -1.0, 1.0);
    const double dist = std::hypot(px, py);
    const double reward = -dist + (dist <= 0.1 ? 1.0 : 0.0);
    CHECK(r.next_state[0] == doctest::Approx(px).epsilon(1e-15));
    CHECK(r.next_state[1] == doctest::Approx(py).epsilon(1e-15));
    CHECK(r.next_state[2] == doctest::Approx(vx).epsilon(1e-15));
    CHECK(r.next_state[3] == doctest::Approx(vy).epsilon(1e-15));
    CHECK(r.reward == doctest::Approx(reward).epsilon(1e-15));
    CHECK(r.terminal == (t == 49));
  }
}

TEST_CASE("success latches for the rest of the episode") {
  auto env = make_env("point-reach", 0);
  VectorXd s(4);
  s << 0.05, 0.0, 0.0, 0.0;  // inside tolerance
  env->set_state(s);
  StepResult r1 = env->step(VectorXd::Zero(2));
  CHECK(r1.success);
  VectorXd away(2);
  away << 1.0, 1.0;
  bool still_success = true;
  for (int t = 0; t < 20; ++t) still_success = env->step(away).success && still_success;
  CHECK(still_success);
}

TEST_CASE("rewards stay inside the workspace-diagonal bound") {
  for (const auto& name : {"point-reach", "point-push"}) {
    auto env = make_env(name, 0);
    const double bound = 2.0 * std::sqrt(2.0) + 1.0;
    Rng rng(17);
    for (int e = 0; e < 5; ++e) {
      env->reset(100 + e);
      while (!env->episode_done()) {
        VectorXd a = rng.uniform_vec(2, -1.0, 1.0);
        StepResult r = env->step(a);
        CHECK(std::fabs(r.reward) <= bound);
      }
    }
  }
}

TEST_CASE("actions are clipped to the bounds before integration") {
  auto env = make_env("point-reach", 0);
  VectorXd s(4);
  s << 0.5, 0.5, 0.0, 0.0;
  env->set_state(s);
  VectorXd huge(2);
  huge << 100.0, -100.0;
  StepResult r = env->step(huge);
  // Velocity change is capped at accel * dt * 1.
  CHECK(r.next_state[2] == doctest::Approx(0.1));
  CHECK(r.next_state[3] == doctest::Approx(-0.1));
}

TEST_CASE("NaN actions raise a numerical failure") {
  auto env = make_env("point-reach", 0);
  env->reset(0);
  VectorXd bad(2);
  bad << std::numeric_limits<double>::quiet_NaN(), 0.0;
  CHECK_THROWS_AS(env->step(bad), NumericError);
}

TEST_CASE("the proportional controller solves point-reach on at least 95 of 100 seeds") {
  auto env = make_env("point-reach", 0);
  auto policy = scripted_policy("point-reach");
  int successes = 0;
  for (int seed = 0; seed < 100; ++seed) {
    VectorXd state = env->reset(seed);
    bool success = false;
    while (!env->episode_done()) {
      StepResult r = env->step(policy(state));
      state = r.next_state;
      success = r.success;
    }
    successes += success ? 1 : 0;
  }
  CHECK(successes >= 95);
}

TEST_CASE("the scripted pusher moves the box to the goal on most seeds") {
  auto env = make_env("point-push", 0);
  auto policy = scripted_policy("point-push");
  int successes = 0;
  for (int seed = 0; seed < 100; ++seed) {
    VectorXd state = env->reset(seed);
    bool success = false;
    while (!env->episode_done()) {
      StepResult r = env->step(policy(state));
      state = r.next_state;
      success = r.success;
    }
    successes += success ? 1 : 0;
  }
  CHECK(successes >= 60);
}

TEST_CASE("the diagnostic chain walks as documented") {
  auto env = make_env("tabular-3", 0);
  CHECK(env->spec().state_dim == 3);
  CHECK(env->spec().horizon == 10);
  VectorXd s = env->reset(0);
  CHECK(s[0] == 1.0);  // starts at state 0
  VectorXd right(1), left(1);
  right << 1.0;
  left << -1.0;
  StepResult r = env->step(right);
  CHECK(r.next_state[1] == 1.0);
  CHECK(r.reward == 0.0);
  r = env->step(right);
  CHECK(r.next_state[2] == 1.0);
  CHECK(r.reward == 1.0);
  r = env->step(right);  // saturates at the last state
  CHECK(r.next_state[2] == 1.0);
  CHECK(r.reward == 1.0);
  r = env->step(left);
  CHECK(r.next_state[1] == 1.0);
  CHECK(r.reward == 0.0);
  // Horizon truncation is not a value terminal for this env.
  env->reset(0);
  StepResult last;
  for (int t = 0; t < 10; ++t) last = env->step(right);
  CHECK(env->episode_done());
  CHECK_FALSE(last.terminal);
}
