// Evaluation mathematics: success-rate AUC, baseline-relative improvement,
// sign-preserving normalization, the aggregate sample-efficiency score,
// paired per-component impact, and difficulty ranking.
#pragma once

#include "darl/rl.hpp"

#include <map>
#include <optional>

namespace darl {

// Trapezoidal integral of the success-rate curve over [0, budget], extended
// by last-value hold and normalized by the budget (result in [0, 1]).
double auc(const RunRecord& record, int64_t budget);

// (mean(alg) - mean(base)) / mean(base), seed-wise inputs.
double improvement(const std::vector<double>& alg_auc, const std::vector<double>& base_auc);

// Positive values scale by the largest positive, negative by the largest
// magnitude negative; zeros stay zero.
std::vector<double> normalize_signed(const std::vector<double>& values);

// One run loaded for reporting.
struct RunEntry {
  std::string setting;  // environment name
  std::string alg;      // canonical spec string
  uint64_t seed = 0;
  RunRecord record;
};

struct AlgResult {
  std::string alg;
  std::vector<double> seed_aucs;
  double auc_mean = 0.0;
  double improvement = 0.0;
  double normalized = 0.0;
};

struct SettingReport {
  std::string setting;
  std::string baseline_alg;
  double baseline_auc_mean = 0.0;
  std::vector<AlgResult> algs;  // sorted by algorithm name
};

struct ComponentImpact {
  std::string component;
  // setting -> raw / normalized impact; absent when the setting had no pairs.
  std::map<std::string, double> raw;
  std::map<std::string, double> normalized;
  int total_pairs = 0;
};

struct DifficultyEntry {
  std::string setting;
  int64_t steps_to_peak = 0;
  bool rankable = false;
};

struct Report {
  int64_t budget = 0;
  std::vector<SettingReport> settings;
  std::map<std::string, double> sei;  // algorithm -> score
  std::vector<std::string> warnings;
  std::vector<ComponentImpact> impacts;       // fixed component vocabulary order
  std::vector<DifficultyEntry> difficulty;    // sorted easiest first
};

// Component vocabulary used for paired impact analysis.
const std::vector<std::string>& impact_components();

// Presence predicate and matched-pair partner construction for one component.
bool component_present(const AgentSpec& spec, const std::string& component);
std::optional<AgentSpec> component_removed(const AgentSpec& spec, const std::string& component);

// Mean seed-mean AUC difference over all spec pairs differing solely by the
// component, per setting. Missing (no pairs) is reported as absent, not zero.
std::map<std::string, double> component_impact(const std::vector<RunEntry>& runs,
                                               const std::string& component, int64_t budget);

// First env step at which the seed-mean success curve reaches 99% of its
// maximum; settings sorted ascending. Flat-zero curves are unrankable.
std::vector<DifficultyEntry> difficulty_rank(const std::vector<RunEntry>& baseline_runs,
                                             int64_t budget);

// Full report over a set of persisted runs. budget <= 0 derives it from the
// latest evaluation point present.
Report build_report(const std::vector<RunEntry>& runs, int64_t budget = 0);

// sei.tsv, setting tables, impact tables, difficulty.tsv, summary.json, and
// SVG bar charts. Byte-stable for fixed inputs.
void write_report(const Report& report, const std::filesystem::path& out_dir);

}  // namespace darl
