#include "darl/demos.hpp"

#include "darl/compose.hpp"

namespace darl {

namespace {
constexpr uint64_t kScriptedSalt = 0x5C1B7ED0ull;
}

ExpertResult train_expert(const std::string& env_name, int64_t budget, Hyper hp, uint64_t seed) {
  AgentSpec baseline;  // plain SAC
  Agent agent = compose(baseline, hp, env_name, seed, {});
  auto env = make_env(env_name, Rng::derive(seed, 1));
  ExpertResult res;
  res.log.state_dim = env->spec().state_dim;
  res.log.action_dim = env->spec().action_dim;
  res.log.horizon = env->spec().horizon;
  res.record = train_online(agent, *env, budget, {},
                            [&res](const EpisodeSteps& ep, double ret) {
                              res.log.episodes.push_back(ep);
                              res.log.returns.push_back(ret);
                            });
  if (res.record.status != "ok")
    throw NumericError("expert training failed: " + res.record.status);
  res.policy = std::move(agent.actor);
  return res;
}

DemoLog scripted_rollouts(const std::string& env_name, int episodes, uint64_t seed) {
  auto env = make_env(env_name, Rng::derive(seed, kScriptedSalt));
  auto policy = scripted_policy(env_name);
  DemoLog log;
  log.state_dim = env->spec().state_dim;
  log.action_dim = env->spec().action_dim;
  log.horizon = env->spec().horizon;
  for (int e = 0; e < episodes; ++e) {
    VectorXd state = env->reset(Rng::derive(seed, kScriptedSalt + 1 + static_cast<uint64_t>(e)));
    EpisodeSteps ep;
    ep.id = e;
    double ret = 0.0;
    int t = 0;
    while (!env->episode_done()) {
      VectorXd a = policy(state);
      StepResult sr = env->step(a);
      Transition tr;
      tr.s = state;
      tr.a = a;
      tr.r = sr.reward;
      tr.s_next = sr.next_state;
      tr.terminal = sr.terminal;
      tr.episode_id = e;
      tr.t = t++;
      ep.steps.push_back(std::move(tr));
      ret += sr.reward;
      state = sr.next_state;
      if (sr.terminal) break;
    }
    log.episodes.push_back(std::move(ep));
    log.returns.push_back(ret);
  }
  return log;
}

TrajectoryDataset filter_episodes(const DemoLog& log, double fraction, double gamma) {
  if (log.episodes.empty()) throw ConfigError("episode log is empty");
  double peak = log.returns[0];
  for (double r : log.returns) peak = std::max(peak, r);
  const double threshold = fraction * peak;
  TrajectoryDataset ds;
  ds.state_dim = log.state_dim;
  ds.action_dim = log.action_dim;
  ds.horizon = log.horizon;
  ds.gamma = gamma;
  for (size_t i = 0; i < log.episodes.size(); ++i)
    if (log.returns[i] >= threshold) ds.episodes.push_back(log.episodes[i]);
  if (ds.episodes.empty())
    throw DataError("no episode meets the return threshold " + fmt_double(threshold));
  ds.compute_returns();
  return ds;
}

void export_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path) {
  save_dataset(ds, path);
}

}  // namespace darl
