// darl command-line front end. Talks to the core exclusively through the
// shared-library C API.
#include "darl.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

int fail(darl_status status) {
  std::fprintf(stderr, "error (%s): %s\n", darl_status_name(status), darl_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"darl — demonstration-augmented online RL experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(darl_version()));

  std::string config, out = "out", root, dataset_out, stem;
  int64_t seed = -1, budget = -1;
  int jobs = 1;

  CLI::App* run = app.add_subcommand("run", "execute one training run from a config");
  run->add_option("--config", config, "run config file")->required();
  run->add_option("--out", out, "output root directory");
  run->add_option("--seed", seed, "override run.seed");
  run->add_option("--budget", budget, "override run.budget (env steps)");

  CLI::App* sweep = app.add_subcommand("sweep", "run every (env, agent, seed) cell of a sweep");
  sweep->add_option("--config", config, "sweep config file")->required();
  sweep->add_option("--out", out, "output root directory");
  sweep->add_option("--jobs", jobs, "parallel cells");

  CLI::App* report = app.add_subcommand("report", "build report tables and plots from runs");
  report->add_option("root", root, "run root directory")->required();
  report->add_option("--out", out, "report output directory");

  CLI::App* demos = app.add_subcommand("make-demos", "generate a demo dataset file");
  demos->add_option("--config", config, "config file")->required();
  demos->add_option("--out", dataset_out, "dataset output path")->required();

  CLI::App* pre = app.add_subcommand("pretrain", "run offline pretraining to a checkpoint");
  pre->add_option("--config", config, "config file")->required();
  pre->add_option("--out", stem, "checkpoint output stem")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    char dir[4096] = {0};
    const darl_status st = darl_run(config.c_str(), out.c_str(), seed, budget, dir, sizeof(dir));
    if (st != DARL_OK) {
      if (dir[0]) std::fprintf(stderr, "partial run directory: %s\n", dir);
      return fail(st);
    }
    std::printf("%s\n", dir);
    return 0;
  }
  if (sweep->parsed()) {
    int32_t failed = 0;
    const darl_status st = darl_sweep(config.c_str(), out.c_str(), jobs, &failed);
    if (st != DARL_OK) return fail(st);
    std::printf("sweep complete\n");
    return 0;
  }
  if (report->parsed()) {
    const darl_status st = darl_report(root.c_str(), out.c_str());
    if (st != DARL_OK) return fail(st);
    std::printf("%s\n", out.c_str());
    return 0;
  }
  if (demos->parsed()) {
    const darl_status st = darl_make_demos(config.c_str(), dataset_out.c_str());
    if (st != DARL_OK) return fail(st);
    std::printf("%s\n", dataset_out.c_str());
    return 0;
  }
  if (pre->parsed()) {
    const darl_status st = darl_pretrain(config.c_str(), stem.c_str());
    if (st != DARL_OK) return fail(st);
    std::printf("%s\n", stem.c_str());
    return 0;
  }
  return 1;
}
