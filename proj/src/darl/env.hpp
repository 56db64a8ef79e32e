// Desk-scale continuous-control environments with dense rewards, success
// predicates, and a fixed horizon. Registered by name.
#pragma once

#include "darl/common.hpp"

#include <functional>
#include <memory>

namespace darl {

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 50;
  double action_low = -1.0, action_high = 1.0;
  // When false the episode still ends at the horizon but the final transition
  // is not a value-function terminal (bootstrap stays unmasked).
  bool timeout_terminal = true;
};

struct StepResult {
  VectorXd next_state;
  double reward = 0.0;
  bool terminal = false;  // value-terminal: masks the bootstrap
  bool success = false;   // latched within the episode
};

class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }

  // Samples the initial state from the seeded distribution; zeroes the step
  // counter and the success latch.
  VectorXd reset(uint64_t seed);

  StepResult step(const VectorXd& action);

  int steps_taken() const { return t_; }
  bool episode_done() const { return t_ >= spec_.horizon; }
  const VectorXd& state() const { return state_; }

  // Places the environment in an arbitrary state (diagnostics and traces).
  void set_state(const VectorXd& state);

 protected:
  virtual VectorXd sample_initial(Rng& rng) const = 0;
  // Computes (next_state, reward, success-now) for a bounds-clipped action.
  virtual void dynamics(const VectorXd& state, const VectorXd& action, VectorXd& next_state,
                        double& reward, bool& success_now) const = 0;

  EnvSpec spec_;
  VectorXd state_;
  int t_ = 0;
  bool success_latch_ = false;
  Rng rng_{0};
};

// Known names: point-reach, point-push, tabular-3.
std::unique_ptr<Env> make_env(const std::string& name, uint64_t seed);
std::vector<std::string> env_names();

// Hand-coded proportional controller for an environment; doubles as the
// zero-cost scripted expert.
std::function<VectorXd(const VectorXd&)> scripted_policy(const std::string& env_name);

}  // namespace darl
