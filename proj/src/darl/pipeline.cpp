#include "darl/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace darl {

namespace fs = std::filesystem;

std::filesystem::path cache_root(const std::filesystem::path& out_root) {
  if (const char* env = std::getenv("DARL_CACHE_DIR"); env && *env) return fs::path(env);
  return out_root / "cache";
}

namespace {

Hyper expert_hyper(const RunConfig& cfg) {
  Hyper hp = cfg.hp;
  AgentSpec baseline;
  hp.utd = 0;
  hp.num_critics = 0;
  resolve_auto_hyper(hp, baseline);
  return hp;
}

std::string hyper_key(const Hyper& hp) {
  std::ostringstream s;
  s << "gamma=" << fmt_double(hp.gamma) << "|nstep=" << hp.nstep << "|tau=" << fmt_double(hp.tau)
    << "|batch=" << hp.batch << "|lr=" << fmt_double(hp.lr) << "|alpha=" << fmt_double(hp.alpha)
    << "|hidden=" << hp.hidden << "|layers=" << hp.layers << "|warmup=" << hp.warmup_steps;
  return s.str();
}

TrajectoryDataset generate_dataset(const RunConfig& cfg) {
  DemoLog log;
  if (cfg.demos.expert == "scripted") {
    log = scripted_rollouts(cfg.env_name, cfg.demos.episodes, cfg.demos.seed);
  } else {
    ExpertResult expert =
        train_expert(cfg.env_name, cfg.demos.expert_budget, expert_hyper(cfg), cfg.demos.seed);
    log = std::move(expert.log);
  }
  TrajectoryDataset ds = filter_episodes(log, cfg.demos.filter_fraction, cfg.hp.gamma);
  // An RL expert logs its whole training history; keep the most recent
  // qualifying episodes up to the configured dataset size.
  if (static_cast<int>(ds.episodes.size()) > cfg.demos.episodes) {
    ds.episodes.erase(ds.episodes.begin(),
                      ds.episodes.end() - cfg.demos.episodes);
    ds.compute_returns();
  }
  return ds;
}

void atomic_write_file(const fs::path& final_path,
                       const std::function<void(const fs::path&)>& writer) {
  fs::create_directories(final_path.parent_path());
  const fs::path tmp = final_path.string() + ".tmp";
  writer(tmp);
  fs::rename(tmp, final_path);
}

}  // namespace

std::string dataset_cache_key(const RunConfig& cfg) {
  std::ostringstream s;
  s << "dataset|env=" << cfg.env_name << "|expert=" << cfg.demos.expert
    << "|episodes=" << cfg.demos.episodes << "|fraction=" << fmt_double(cfg.demos.filter_fraction)
    << "|seed=" << cfg.demos.seed << "|gamma=" << fmt_double(cfg.hp.gamma);
  if (cfg.demos.expert == "rl")
    s << "|budget=" << cfg.demos.expert_budget << '|' << hyper_key(expert_hyper(cfg));
  return hex64(fnv1a(s.str()));
}

std::string checkpoint_cache_key(const RunConfig& cfg, PretrainMethod method,
                                 const std::string& dataset_key) {
  PretrainParams p = pretrain_params(cfg, method);
  std::ostringstream s;
  s << "pretrain|method=" << pretrain_method_name(method) << "|dataset=" << dataset_key
    << "|steps=" << p.steps << "|batch=" << p.batch << "|critic_lr=" << fmt_double(p.critic_lr)
    << "|actor_lr=" << fmt_double(p.actor_lr) << "|bc_lr=" << fmt_double(p.bc_lr)
    << "|weight=" << fmt_double(p.cql_weight) << "|cand=" << p.cql_candidates
    << "|eps=" << fmt_double(p.mcq_epsilon) << "|gamma=" << fmt_double(p.gamma)
    << "|tau=" << fmt_double(p.tau) << "|alpha=" << fmt_double(p.alpha)
    << "|hidden=" << p.hidden << "|layers=" << p.layers << "|critics=" << p.num_critics
    << "|stochastic=" << (p.stochastic_actor ? 1 : 0) << "|seed=" << p.seed;
  return hex64(fnv1a(s.str()));
}

std::filesystem::path ensure_dataset(const RunConfig& cfg, const std::filesystem::path& cache) {
  const fs::path path = cache / "datasets" / (dataset_cache_key(cfg) + ".ds");
  if (fs::exists(path)) return path;
  TrajectoryDataset ds = generate_dataset(cfg);
  atomic_write_file(path, [&ds](const fs::path& tmp) { save_dataset(ds, tmp); });
  return path;
}

std::filesystem::path ensure_checkpoint(const RunConfig& cfg, PretrainMethod method,
                                        const std::filesystem::path& dataset_path,
                                        const std::filesystem::path& cache) {
  const std::string key = checkpoint_cache_key(cfg, method, dataset_cache_key(cfg));
  const fs::path dir = cache / "pretrain" / key;
  const fs::path stem = dir / "ckpt";
  if (fs::exists(stem.string() + ".meta")) return stem;
  TrajectoryDataset ds = load_dataset(dataset_path);
  PretrainParams params = pretrain_params(cfg, method);
  OfflineCheckpoint ckpt = pretrain(params, ds);
  ckpt.dataset_hash = hex64(fnv1a_file(dataset_path));
  const fs::path tmp_dir = dir.string() + ".tmp";
  fs::create_directories(tmp_dir);
  save_checkpoint(ckpt, tmp_dir / "ckpt");
  fs::remove_all(dir);
  fs::rename(tmp_dir, dir);
  return stem;
}

RunOutcome run_one(const RunConfig& cfg, const std::filesystem::path& out_root) {
  const fs::path cache = cache_root(out_root);

  ComposeInputs inputs;
  TrajectoryDataset ds;
  OfflineCheckpoint ckpt;
  if (cfg.agent.needs_dataset()) {
    ds = load_dataset(ensure_dataset(cfg, cache));
    inputs.dataset = &ds;
  }
  if (cfg.agent.init != InitMethod::None || cfg.agent.needs_reference_policy()) {
    const PretrainMethod method = method_for_init(cfg.agent.init);
    const fs::path dataset_path = cache / "datasets" / (dataset_cache_key(cfg) + ".ds");
    ckpt = load_checkpoint(ensure_checkpoint(cfg, method, dataset_path, cache));
    inputs.checkpoint = &ckpt;
  }

  Agent agent = compose(cfg.agent, cfg.hp, cfg.env_name, cfg.seed, inputs);
  auto env = make_env(cfg.env_name, Rng::derive(cfg.seed, 0x0E17));
  RunRecord rec = train_online(agent, *env, cfg.budget, snapshot(cfg));

  const fs::path run_dir =
      out_root / cfg.env_name / spec_string(cfg.agent) / ("seed" + std::to_string(cfg.seed));
  const fs::path tmp_dir = run_dir.string() + ".tmp";
  fs::remove_all(tmp_dir);
  fs::create_directories(tmp_dir);
  save_run_record(rec, tmp_dir / "record.txt");
  {
    std::ostringstream out;
    for (const auto& [k, v] : rec.config) out << k << " = " << v << '\n';
    write_text_file(tmp_dir / "config.txt", out.str());
  }
  save_mlp(agent.actor.net, tmp_dir / "actor.mlp");
  for (int i = 0; i < agent.critics.size(); ++i)
    save_mlp(agent.critics.online[i], tmp_dir / ("critic" + std::to_string(i) + ".mlp"));
  fs::remove_all(run_dir);
  fs::rename(tmp_dir, run_dir);
  return {run_dir, rec.status};
}

RunOutcome run_config_file(const std::filesystem::path& config_path,
                           const std::filesystem::path& out_root, int64_t seed_override,
                           int64_t budget_override) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  if (budget_override >= 0) cfg.budget = budget_override;
  return run_one(cfg, out_root);
}

SweepOutcome sweep(const std::filesystem::path& config_path,
                   const std::filesystem::path& out_root, int jobs) {
  SweepConfig sc = load_sweep_config(config_path);
  const fs::path cache = cache_root(out_root);

  struct Cell {
    RunConfig cfg;
    fs::path dir;
  };
  std::vector<Cell> cells;
  SweepOutcome outcome;
  for (const auto& env : sc.envs) {
    for (const auto& alg : sc.agents) {
      RunConfig cfg = sc.base;
      cfg.env_name = env;
      cfg.agent = parse_spec_string(alg);
      try {
        validate_spec(cfg.agent);
      } catch (const ConfigError& e) {
        std::cerr << "[sweep] skipping " << env << "/" << alg << ": " << e.what() << '\n';
        outcome.skipped += static_cast<int>(sc.seeds.size());
        outcome.total += static_cast<int>(sc.seeds.size());
        continue;
      }
      if (cfg.agent.init == InitMethod::Mcq)
        std::cerr << "[sweep] " << env << "/" << alg
                  << ": value init bundles a behavior-cloned actor\n";
      for (uint64_t seed : sc.seeds) {
        cfg.seed = seed;
        Cell cell;
        cell.cfg = cfg;
        cell.dir = out_root / env / spec_string(cfg.agent) / ("seed" + std::to_string(seed));
        cells.push_back(std::move(cell));
        outcome.total += 1;
      }
    }
  }

  // Resolve shared artifacts up front so parallel cells only read the cache.
  for (const auto& cell : cells) {
    const RunConfig& cfg = cell.cfg;
    if (!cfg.agent.needs_dataset()) continue;
    const fs::path ds_path = ensure_dataset(cfg, cache);
    if (cfg.agent.init != InitMethod::None || cfg.agent.needs_reference_policy())
      ensure_checkpoint(cfg, method_for_init(cfg.agent.init), ds_path, cache);
  }

  std::atomic<size_t> next{0};
  std::mutex mu;
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      const fs::path record = cell.dir / "record.txt";
      if (fs::exists(record)) {
        try {
          if (load_run_record(record).status == "ok") {
            std::lock_guard<std::mutex> lock(mu);
            outcome.skipped += 1;
            continue;
          }
        } catch (const std::exception&) {
          // unreadable record: retrain the cell
        }
      }
      try {
        RunOutcome res = run_one(cell.cfg, out_root);
        std::lock_guard<std::mutex> lock(mu);
        if (res.status == "ok")
          outcome.trained += 1;
        else {
          outcome.failed += 1;
          std::cerr << "[sweep] cell failed: " << res.dir.string() << ": " << res.status << '\n';
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        outcome.failed += 1;
        std::cerr << "[sweep] cell error: " << cell.dir.string() << ": " << e.what() << '\n';
      }
    }
  };

  jobs = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return outcome;
}

void report_tree(const std::filesystem::path& run_root, const std::filesystem::path& out_dir) {
  std::vector<RunEntry> runs;
  std::vector<fs::path> records;
  if (!fs::exists(run_root)) throw IoError("run root does not exist: " + run_root.string());
  for (const auto& env_dir : fs::directory_iterator(run_root)) {
    if (!env_dir.is_directory()) continue;
    for (const auto& alg_dir : fs::directory_iterator(env_dir)) {
      if (!alg_dir.is_directory()) continue;
      for (const auto& seed_dir : fs::directory_iterator(alg_dir)) {
        const fs::path rec = seed_dir.path() / "record.txt";
        if (fs::exists(rec)) records.push_back(rec);
      }
    }
  }
  std::sort(records.begin(), records.end());
  for (const auto& rec_path : records) {
    RunEntry entry;
    entry.setting = rec_path.parent_path().parent_path().parent_path().filename().string();
    entry.alg = rec_path.parent_path().parent_path().filename().string();
    const std::string seed_name = rec_path.parent_path().filename().string();
    entry.seed = seed_name.rfind("seed", 0) == 0
                     ? static_cast<uint64_t>(parse_int(seed_name.substr(4), "seed directory"))
                     : 0;
    entry.record = load_run_record(rec_path);
    if (entry.record.status != "ok") {
      std::cerr << "[report] skipping failed run " << rec_path.string() << '\n';
      continue;
    }
    runs.push_back(std::move(entry));
  }
  Report report = build_report(runs);
  for (const auto& w : report.warnings) std::cerr << "[report] " << w << '\n';
  write_report(report, out_dir);
}

std::filesystem::path make_demos_file(const std::filesystem::path& config_path,
                                      const std::filesystem::path& out_path) {
  RunConfig cfg = load_run_config(config_path);
  TrajectoryDataset ds = generate_dataset(cfg);
  fs::create_directories(fs::absolute(out_path).parent_path());
  save_dataset(ds, out_path);
  return out_path;
}

std::filesystem::path pretrain_file(const std::filesystem::path& config_path,
                                    const std::filesystem::path& out_stem) {
  RunConfig cfg = load_run_config(config_path);
  PretrainMethod method;
  if (!cfg.pretrain.method.empty())
    method = parse_pretrain_method(cfg.pretrain.method);
  else if (cfg.agent.init != InitMethod::None)
    method = method_for_init(cfg.agent.init);
  else
    throw ConfigError("pretrain.method: required when agent.init is none");

  TrajectoryDataset ds;
  std::string dataset_hash;
  if (!cfg.pretrain.dataset_path.empty()) {
    ds = load_dataset(cfg.pretrain.dataset_path);
    dataset_hash = hex64(fnv1a_file(cfg.pretrain.dataset_path));
  } else {
    ds = generate_dataset(cfg);
    dataset_hash = dataset_cache_key(cfg);
  }
  OfflineCheckpoint ckpt = pretrain(pretrain_params(cfg, method), ds);
  ckpt.dataset_hash = dataset_hash;
  fs::create_directories(fs::absolute(out_stem).parent_path());
  save_checkpoint(ckpt, out_stem);
  return out_stem;
}

}  // namespace darl
