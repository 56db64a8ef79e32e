#include "darl/env.hpp"

#include <cmath>

namespace darl {

VectorXd Env::reset(uint64_t seed) {
  rng_ = Rng(seed);
  t_ = 0;
  success_latch_ = false;
  state_ = sample_initial(rng_);
  return state_;
}

void Env::set_state(const VectorXd& state) {
  if (state.size() != spec_.state_dim) throw ConfigError("set_state dimension mismatch");
  state_ = state;
  t_ = 0;
  success_latch_ = false;
}

StepResult Env::step(const VectorXd& action) {
  if (action.size() != spec_.action_dim)
    throw ConfigError("action dimension mismatch: got " + std::to_string(action.size()) +
                      ", expected " + std::to_string(spec_.action_dim));
  if (!action.allFinite()) throw NumericError("non-finite action passed to env step");
  VectorXd a = action.cwiseMax(spec_.action_low).cwiseMin(spec_.action_high);

  StepResult res;
  bool success_now = false;
  dynamics(state_, a, res.next_state, res.reward, success_now);
  success_latch_ = success_latch_ || success_now;
  res.success = success_latch_;
  t_ += 1;
  res.terminal = spec_.timeout_terminal && t_ >= spec_.horizon;
  state_ = res.next_state;
  return res;
}

namespace {

// 2-D point mass under semi-implicit Euler integration. State [px py vx vy],
// fixed goal at the origin, dense reward -dist with a +1 bonus inside the
// goal tolerance.
class PointReach final : public Env {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kAccel = 1.0;
  static constexpr double kVmax = 1.0;
  static constexpr double kBound = 1.0;
  static constexpr double kTol = 0.1;

  explicit PointReach() {
    spec_.name = "point-reach";
    spec_.state_dim = 4;
    spec_.action_dim = 2;
    spec_.horizon = 50;
  }

 protected:
  VectorXd sample_initial(Rng& rng) const override {
    VectorXd s(4);
    // Start off-goal so the task is non-trivial.
    do {
      s[0] = rng.uniform(-0.8, 0.8);
      s[1] = rng.uniform(-0.8, 0.8);
    } while (std::hypot(s[0], s[1]) < 3.0 * kTol);
    s[2] = 0.0;
    s[3] = 0.0;
    return s;
  }

  void dynamics(const VectorXd& s, const VectorXd& a, VectorXd& next, double& reward,
                bool& success_now) const override {
    next = s;
    for (int i = 0; i < 2; ++i) {
      next[2 + i] = std::clamp(s[2 + i] + kAccel * a[i] * kDt, -kVmax, kVmax);
      next[i] = std::clamp(s[i] + next[2 + i] * kDt, -kBound, kBound);
    }
    const double dist = std::hypot(next[0], next[1]);
    success_now = dist <= kTol;
    reward = -dist + (success_now ? 1.0 : 0.0);
  }
};

// Point mass plus a box that is drawn toward the mass while inside the
// interaction radius. State [px py vx vy bx by gx gy]; reward is dense in the
// box-goal distance with a +1 bonus inside the tolerance.
class PointPush final : public Env {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kAccel = 1.0;
  static constexpr double kVmax = 1.0;
  static constexpr double kBound = 1.0;
  static constexpr double kTol = 0.15;
  static constexpr double kPullRadius = 0.35;
  static constexpr double kPullGain = 1.5;

  explicit PointPush() {
    spec_.name = "point-push";
    spec_.state_dim = 8;
    spec_.action_dim = 2;
    spec_.horizon = 50;
  }

 protected:
  VectorXd sample_initial(Rng& rng) const override {
    VectorXd s(8);
    s[0] = rng.uniform(-0.8, 0.8);
    s[1] = rng.uniform(-0.8, 0.8);
    s[2] = 0.0;
    s[3] = 0.0;
    s[4] = rng.uniform(-0.5, 0.5);
    s[5] = rng.uniform(-0.5, 0.5);
    do {
      s[6] = rng.uniform(-0.7, 0.7);
      s[7] = rng.uniform(-0.7, 0.7);
    } while (std::hypot(s[6] - s[4], s[7] - s[5]) < 0.3);
    return s;
  }

  void dynamics(const VectorXd& s, const VectorXd& a, VectorXd& next, double& reward,
                bool& success_now) const override {
    next = s;
    for (int i = 0; i < 2; ++i) {
      next[2 + i] = std::clamp(s[2 + i] + kAccel * a[i] * kDt, -kVmax, kVmax);
      next[i] = std::clamp(s[i] + next[2 + i] * kDt, -kBound, kBound);
    }
    const double pb = std::hypot(next[0] - s[4], next[1] - s[5]);
    if (pb <= kPullRadius) {
      for (int i = 0; i < 2; ++i)
        next[4 + i] = std::clamp(s[4 + i] + kPullGain * kDt * (next[i] - s[4 + i]), -kBound, kBound);
    }
    const double dist = std::hypot(next[4] - next[6], next[5] - next[7]);
    success_now = dist <= kTol;
    reward = -dist + (success_now ? 1.0 : 0.0);
  }
};

// Degenerate 3-state chain used as a Bellman diagnostic. One-hot states,
// scalar action: a >= 0 moves right, a < 0 moves left; reward 1 for landing
// on the last state. Horizon truncation is not a value terminal.
class Tabular3 final : public Env {
 public:
  explicit Tabular3() {
    spec_.name = "tabular-3";
    spec_.state_dim = 3;
    spec_.action_dim = 1;
    spec_.horizon = 10;
    spec_.timeout_terminal = false;
  }

  static int state_index(const VectorXd& s) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (s[i] > s[best]) best = i;
    return best;
  }

  static VectorXd one_hot(int i) {
    VectorXd s = VectorXd::Zero(3);
    s[i] = 1.0;
    return s;
  }

 protected:
  VectorXd sample_initial(Rng& rng) const override {
    (void)rng;
    return one_hot(0);
  }

  void dynamics(const VectorXd& s, const VectorXd& a, VectorXd& next, double& reward,
                bool& success_now) const override {
    const int i = state_index(s);
    const int j = a[0] >= 0.0 ? std::min(i + 1, 2) : std::max(i - 1, 0);
    next = one_hot(j);
    reward = j == 2 ? 1.0 : 0.0;
    success_now = j == 2;
  }
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name, uint64_t seed) {
  std::unique_ptr<Env> env;
  if (name == "point-reach")
    env = std::make_unique<PointReach>();
  else if (name == "point-push")
    env = std::make_unique<PointPush>();
  else if (name == "tabular-3")
    env = std::make_unique<Tabular3>();
  else
    throw ConfigError("unknown environment '" + name + "'");
  env->reset(seed);
  return env;
}

std::vector<std::string> env_names() { return {"point-reach", "point-push", "tabular-3"}; }

std::function<VectorXd(const VectorXd&)> scripted_policy(const std::string& env_name) {
  if (env_name == "point-reach") {
    return [](const VectorXd& s) {
      VectorXd a(2);
      for (int i = 0; i < 2; ++i) a[i] = std::clamp(-4.0 * s[i] - 2.0 * s[2 + i], -1.0, 1.0);
      return a;
    };
  }
  if (env_name == "point-push") {
    return [](const VectorXd& s) {
      const double bx = s[4], by = s[5], gx = s[6], gy = s[7];
      double dx = gx - bx, dy = gy - by;
      const double d = std::hypot(dx, dy);
      VectorXd a(2);
      if (d > 1e-9) {
        dx /= d;
        dy /= d;
      }
      // Stand slightly goal-side of the box so the pull moves it home.
      const double lead = std::min(0.25, d);
      const double tx = bx + lead * dx, ty = by + lead * dy;
      a[0] = std::clamp(4.0 * (tx - s[0]) - 2.0 * s[2], -1.0, 1.0);
      a[1] = std::clamp(4.0 * (ty - s[1]) - 2.0 * s[3], -1.0, 1.0);
      return a;
    };
  }
  if (env_name == "tabular-3") {
    return [](const VectorXd&) {
      VectorXd a(1);
      a[0] = 1.0;
      return a;
    };
  }
  throw ConfigError("no scripted policy for environment '" + env_name + "'");
}

}  // namespace darl
