#include "darl/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace darl {

bool KvConfig::has(const std::string& key) const { return find(key) != nullptr; }

const std::string* KvConfig::find(const std::string& key) const {
  const std::string* last = nullptr;
  for (const auto& [k, v] : entries)
    if (k == key) last = &v;
  return last;
}

KvConfig parse_kv_text(const std::string& text) {
  KvConfig kv;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv.entries.emplace_back(key, value);
  }
  return kv;
}

KvConfig parse_kv_file(const std::filesystem::path& path) {
  return parse_kv_text(read_text_file(path));
}

namespace {

// Typed field readers; every diagnostic carries the key name.
class Schema {
 public:
  explicit Schema(const KvConfig& kv) : kv_(kv) {}

  int64_t get_int(const std::string& key, int64_t def, int64_t lo, int64_t hi) {
    seen_.insert(key);
    const std::string* v = kv_.find(key);
    if (!v) return def;
    const int64_t x = parse_int(*v, key);
    check_range(key, static_cast<double>(x), static_cast<double>(lo), static_cast<double>(hi));
    return x;
  }

  double get_double(const std::string& key, double def, double lo, double hi) {
    seen_.insert(key);
    const std::string* v = kv_.find(key);
    if (!v) return def;
    const double x = parse_double(*v, key);
    check_range(key, x, lo, hi);
    return x;
  }

  std::string get_enum(const std::string& key, const std::string& def,
                       const std::vector<std::string>& allowed) {
    seen_.insert(key);
    const std::string* v = kv_.find(key);
    const std::string x = v ? *v : def;
    if (std::find(allowed.begin(), allowed.end(), x) == allowed.end()) {
      std::string msg = key + ": unknown value '" + x + "' (expected one of:";
      for (const auto& a : allowed) msg += " " + a;
      throw ConfigError(msg + ")");
    }
    return x;
  }

  std::string get_string(const std::string& key, const std::string& def) {
    seen_.insert(key);
    const std::string* v = kv_.find(key);
    return v ? *v : def;
  }

  std::vector<std::string> get_list(const std::string& key) {
    seen_.insert(key);
    const std::string* v = kv_.find(key);
    if (!v) return {};
    std::string s = *v;
    std::replace(s.begin(), s.end(), ',', ' ');
    return split_ws(s);
  }

  void reject_unknown(const std::vector<std::string>& extra_allowed = {}) const {
    for (const auto& [k, v] : kv_.entries) {
      if (seen_.count(k)) continue;
      if (std::find(extra_allowed.begin(), extra_allowed.end(), k) != extra_allowed.end())
        continue;
      throw ConfigError(k + ": unknown configuration key");
    }
  }

 private:
  static void check_range(const std::string& key, double x, double lo, double hi) {
    if (x < lo || x > hi)
      throw ConfigError(key + ": value " + fmt_double(x) + " outside [" + fmt_double(lo) + ", " +
                        fmt_double(hi) + "]");
  }
  const KvConfig& kv_;
  std::set<std::string> seen_;
};

RunConfig parse_run_config_impl(const KvConfig& kv, Schema& s) {
  RunConfig cfg;
  cfg.version = static_cast<int>(s.get_int("version", 1, 1, 1));
  cfg.env_name = s.get_enum("env.name", cfg.env_name, env_names());
  cfg.seed = static_cast<uint64_t>(s.get_int("run.seed", 0, 0, INT64_MAX));
  cfg.budget = s.get_int("run.budget", cfg.budget, 0, INT64_MAX);

  cfg.agent.base = s.get_enum("agent.base", "sac", {"sac", "td3"}) == "sac" ? BaseAlg::Sac
                                                                            : BaseAlg::Td3;
  const std::string pf = s.get_enum("agent.prefill", "off", {"off", "demos", "rollouts"});
  cfg.agent.prefill = pf == "off"     ? PrefillSource::Off
                      : pf == "demos" ? PrefillSource::Demos
                                      : PrefillSource::Rollouts;
  cfg.agent.auxbc = s.get_enum("agent.auxbc", "off", {"off", "on"}) == "on";
  const std::string init =
      s.get_enum("agent.init", "none", {"none", "bc", "mcq", "calql", "cqlrho", "cqlh"});
  cfg.agent.init = init == "none"     ? InitMethod::None
                   : init == "bc"     ? InitMethod::Bc
                   : init == "mcq"    ? InitMethod::Mcq
                   : init == "calql"  ? InitMethod::CalQl
                   : init == "cqlrho" ? InitMethod::CqlRho
                                      : InitMethod::CqlH;
  const std::string mixer = s.get_enum("agent.mixer", "none", {"none", "ibrl", "cheq", "resrl"});
  cfg.agent.mixer = mixer == "none"   ? MixerKind::None
                    : mixer == "ibrl" ? MixerKind::Ibrl
                    : mixer == "cheq" ? MixerKind::Cheq
                                      : MixerKind::ResRl;

  Hyper& hp = cfg.hp;
  hp.gamma = s.get_double("rl.gamma", hp.gamma, 0.0, 0.999999);
  hp.nstep = static_cast<int>(s.get_int("rl.nstep", hp.nstep, 1, 100));
  hp.tau = s.get_double("rl.tau", hp.tau, 0.0, 1.0);
  hp.batch = static_cast<int>(s.get_int("rl.batch", hp.batch, 1, 1 << 20));
  hp.lr = s.get_double("rl.lr", hp.lr, 0.0, 1.0);
  hp.alpha = s.get_double("rl.alpha", hp.alpha, 0.0, 100.0);
  hp.utd = static_cast<int>(s.get_int("rl.utd", 0, 0, 1000));
  hp.num_critics = static_cast<int>(s.get_int("rl.critics", 0, 0, 64));
  hp.hidden = static_cast<int>(s.get_int("net.hidden", hp.hidden, 1, 4096));
  hp.layers = static_cast<int>(s.get_int("net.layers", hp.layers, 1, 16));
  hp.td3_policy_noise = s.get_double("rl.td3.policy_noise", hp.td3_policy_noise, 0.0, 10.0);
  hp.td3_noise_clip = s.get_double("rl.td3.noise_clip", hp.td3_noise_clip, 0.0, 10.0);
  hp.td3_explore_noise = s.get_double("rl.td3.explore_noise", hp.td3_explore_noise, 0.0, 10.0);
  hp.warmup_steps = s.get_int("rl.warmup_steps", hp.warmup_steps, 0, INT64_MAX);
  hp.eval_every = s.get_int("run.eval_every", hp.eval_every, 1, INT64_MAX);
  hp.eval_episodes = static_cast<int>(s.get_int("run.eval_episodes", hp.eval_episodes, 1, 10000));
  hp.resrl_burn_in = s.get_int("rl.resrl.burn_in", hp.resrl_burn_in, 0, INT64_MAX);
  hp.auxbc_alpha = s.get_double("rl.auxbc.alpha", hp.auxbc_alpha, 0.0, 1000.0);
  hp.cheq.u_min = s.get_double("cheq.u_min", hp.cheq.u_min, 0.0, 1e9);
  hp.cheq.u_max = s.get_double("cheq.u_max", hp.cheq.u_max, 0.0, 1e9);
  hp.cheq.lambda_min = s.get_double("cheq.lambda_min", hp.cheq.lambda_min, 0.0, 1.0);
  hp.cheq.lambda_max = s.get_double("cheq.lambda_max", hp.cheq.lambda_max, 0.0, 1.0);
  hp.buffer_capacity =
      static_cast<size_t>(s.get_int("rl.buffer_capacity", static_cast<int64_t>(hp.buffer_capacity),
                                    1, INT64_MAX));
  if (hp.cheq.u_max <= hp.cheq.u_min)
    throw ConfigError("cheq.u_max: must exceed cheq.u_min");
  if (hp.cheq.lambda_max < hp.cheq.lambda_min)
    throw ConfigError("cheq.lambda_max: must not be below cheq.lambda_min");

  DemoConfig& dc = cfg.demos;
  dc.expert = s.get_enum("demos.expert", dc.expert, {"scripted", "rl"});
  dc.episodes = static_cast<int>(s.get_int("demos.episodes", dc.episodes, 1, 1000000));
  dc.expert_budget = s.get_int("demos.expert_budget", dc.expert_budget, 0, INT64_MAX);
  dc.filter_fraction = s.get_double("demos.filter_fraction", dc.filter_fraction, 0.0, 1.0);
  dc.seed = static_cast<uint64_t>(s.get_int("demos.seed", 0, 0, INT64_MAX));

  PretrainConfig& pc = cfg.pretrain;
  pc.steps = s.get_int("pretrain.steps", pc.steps, 0, INT64_MAX);
  pc.batch = static_cast<int>(s.get_int("pretrain.batch", pc.batch, 1, 1 << 20));
  pc.cql_weight = s.get_double("pretrain.cql_weight", pc.cql_weight, 0.0, 1e6);
  pc.actor_lr = s.get_double("pretrain.actor_lr", pc.actor_lr, 0.0, 1.0);
  pc.mcq_epsilon = s.get_double("pretrain.mcq_epsilon", pc.mcq_epsilon, 0.0, 1.0);
  pc.cql_candidates = static_cast<int>(s.get_int("pretrain.cql_candidates", pc.cql_candidates, 1, 1000));
  pc.seed = static_cast<uint64_t>(s.get_int("pretrain.seed", 0, 0, INT64_MAX));
  pc.dataset_path = s.get_string("pretrain.dataset", "");
  pc.method = s.get_string("pretrain.method", "");
  if (!pc.method.empty()) parse_pretrain_method(pc.method);  // validate

  validate_spec(cfg.agent);
  return cfg;
}

}  // namespace

RunConfig parse_run_config(const KvConfig& kv) {
  Schema s(kv);
  RunConfig cfg = parse_run_config_impl(kv, s);
  s.reject_unknown();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(parse_kv_file(path));
}

std::vector<std::pair<std::string, std::string>> snapshot(const RunConfig& cfg) {
  Hyper resolved = cfg.hp;
  resolve_auto_hyper(resolved, cfg.agent);
  std::vector<std::pair<std::string, std::string>> kv;
  auto put = [&kv](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
  put("agent.auxbc", cfg.agent.auxbc ? "on" : "off");
  put("agent.base", base_name(cfg.agent.base));
  put("agent.init", init_name(cfg.agent.init));
  put("agent.mixer", mixer_name(cfg.agent.mixer));
  put("agent.prefill", prefill_name(cfg.agent.prefill));
  put("agent.spec", spec_string(cfg.agent));
  put("cheq.lambda_max", fmt_double(cfg.hp.cheq.lambda_max));
  put("cheq.lambda_min", fmt_double(cfg.hp.cheq.lambda_min));
  put("cheq.u_max", fmt_double(cfg.hp.cheq.u_max));
  put("cheq.u_min", fmt_double(cfg.hp.cheq.u_min));
  put("demos.episodes", std::to_string(cfg.demos.episodes));
  put("demos.expert", cfg.demos.expert);
  put("demos.expert_budget", std::to_string(cfg.demos.expert_budget));
  put("demos.filter_fraction", fmt_double(cfg.demos.filter_fraction));
  put("demos.seed", std::to_string(cfg.demos.seed));
  put("env.name", cfg.env_name);
  put("net.hidden", std::to_string(cfg.hp.hidden));
  put("net.layers", std::to_string(cfg.hp.layers));
  put("pretrain.batch", std::to_string(cfg.pretrain.batch));
  put("pretrain.cql_candidates", std::to_string(cfg.pretrain.cql_candidates));
  put("pretrain.cql_weight", fmt_double(cfg.pretrain.cql_weight));
  put("pretrain.actor_lr", fmt_double(cfg.pretrain.actor_lr));
  put("pretrain.mcq_epsilon", fmt_double(cfg.pretrain.mcq_epsilon));
  put("pretrain.seed", std::to_string(cfg.pretrain.seed));
  put("pretrain.steps", std::to_string(cfg.pretrain.steps));
  put("rl.alpha", fmt_double(cfg.hp.alpha));
  put("rl.auxbc.alpha", fmt_double(cfg.hp.auxbc_alpha));
  put("rl.batch", std::to_string(cfg.hp.batch));
  put("rl.buffer_capacity", std::to_string(cfg.hp.buffer_capacity));
  put("rl.critics", std::to_string(resolved.num_critics));
  put("rl.gamma", fmt_double(cfg.hp.gamma));
  put("rl.lr", fmt_double(cfg.hp.lr));
  put("rl.nstep", std::to_string(cfg.hp.nstep));
  put("rl.resrl.burn_in", std::to_string(cfg.hp.resrl_burn_in));
  put("rl.tau", fmt_double(cfg.hp.tau));
  put("rl.td3.explore_noise", fmt_double(cfg.hp.td3_explore_noise));
  put("rl.td3.noise_clip", fmt_double(cfg.hp.td3_noise_clip));
  put("rl.td3.policy_noise", fmt_double(cfg.hp.td3_policy_noise));
  put("rl.utd", std::to_string(resolved.utd));
  put("rl.warmup_steps", std::to_string(cfg.hp.warmup_steps));
  put("run.budget", std::to_string(cfg.budget));
  put("run.eval_episodes", std::to_string(cfg.hp.eval_episodes));
  put("run.eval_every", std::to_string(cfg.hp.eval_every));
  put("run.seed", std::to_string(cfg.seed));
  put("version", std::to_string(cfg.version));
  std::sort(kv.begin(), kv.end());
  return kv;
}

SweepConfig parse_sweep_config(const KvConfig& kv) {
  Schema s(kv);
  SweepConfig sweep;
  sweep.base = parse_run_config_impl(kv, s);
  std::vector<std::string> envs = s.get_list("sweep.envs");
  std::vector<std::string> seeds = s.get_list("sweep.seeds");
  std::vector<std::string> agents = s.get_list("sweep.agents");
  s.reject_unknown();
  if (envs.empty()) envs = {sweep.base.env_name};
  for (const auto& e : envs) {
    const auto names = env_names();
    if (std::find(names.begin(), names.end(), e) == names.end())
      throw ConfigError("sweep.envs: unknown environment '" + e + "'");
  }
  sweep.envs = envs;
  if (seeds.empty()) {
    sweep.seeds = {0, 1, 2};  // three seeds by default
  } else {
    for (const auto& t : seeds)
      sweep.seeds.push_back(static_cast<uint64_t>(parse_int(t, "sweep.seeds")));
  }
  if (agents.empty()) agents = {spec_string(sweep.base.agent)};
  for (const auto& a : agents) parse_spec_string(a);  // validate names early
  sweep.agents = agents;
  return sweep;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  return parse_sweep_config(parse_kv_file(path));
}

PretrainParams pretrain_params(const RunConfig& cfg, PretrainMethod method) {
  PretrainParams p;
  p.method = method;
  p.steps = cfg.pretrain.steps;
  p.batch = cfg.pretrain.batch;
  p.critic_lr = cfg.hp.lr;
  p.actor_lr = cfg.pretrain.actor_lr;
  p.bc_lr = cfg.hp.lr;
  p.cql_weight = cfg.pretrain.cql_weight;
  p.cql_candidates = cfg.pretrain.cql_candidates;
  p.mcq_epsilon = cfg.pretrain.mcq_epsilon;
  p.gamma = cfg.hp.gamma;
  p.tau = cfg.hp.tau;
  p.alpha = cfg.hp.alpha;
  p.hidden = cfg.hp.hidden;
  p.layers = cfg.hp.layers;
  p.num_critics = 2;  // pretraining ensembles stay at the base size
  p.stochastic_actor = method == PretrainMethod::Bc || method == PretrainMethod::Mcq
                           ? cfg.agent.base == BaseAlg::Sac
                           : true;  // conservative methods train a stochastic actor
  p.seed = cfg.pretrain.seed;
  return p;
}

}  // namespace darl
