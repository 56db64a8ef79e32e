#include "darl/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace darl {

double auc(const RunRecord& record, int64_t budget) {
  if (record.points.size() < 2) throw NotReadyError("auc needs at least 2 evaluation points");
  if (budget <= 0) throw ConfigError("auc needs a positive budget");
  std::vector<EvalPoint> pts = record.points;
  for (size_t i = 1; i < pts.size(); ++i)
    if (pts[i].env_step <= pts[i - 1].env_step)
      throw ConfigError("run record env steps must be strictly increasing");
  // Extend a curve that starts late back to 0 with its first value.
  if (pts.front().env_step > 0) {
    EvalPoint p0 = pts.front();
    p0.env_step = 0;
    pts.insert(pts.begin(), p0);
  }
  double area = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const double x0 = static_cast<double>(pts[i].env_step);
    double x1 = static_cast<double>(pts[i + 1].env_step);
    double y0 = pts[i].success_rate;
    double y1 = pts[i + 1].success_rate;
    if (x0 >= budget) break;
    if (x1 > budget) {  // clip the segment at the budget
      y1 = y0 + (y1 - y0) * (budget - x0) / (x1 - x0);
      x1 = static_cast<double>(budget);
    }
    area += 0.5 * (y0 + y1) * (x1 - x0);
  }
  const double last_x = static_cast<double>(pts.back().env_step);
  if (last_x < budget) area += pts.back().success_rate * (budget - last_x);
  return area / budget;
}

double improvement(const std::vector<double>& alg_auc, const std::vector<double>& base_auc) {
  if (alg_auc.empty() || base_auc.empty())
    throw NotReadyError("improvement needs at least one AUC per side");
  const double am = std::accumulate(alg_auc.begin(), alg_auc.end(), 0.0) / alg_auc.size();
  const double bm = std::accumulate(base_auc.begin(), base_auc.end(), 0.0) / base_auc.size();
  if (bm <= 0.0) throw DataError("undefined improvement: baseline AUC mean is not positive");
  return (am - bm) / bm;
}

std::vector<double> normalize_signed(const std::vector<double>& values) {
  double max_pos = 0.0, max_neg = 0.0;
  for (double v : values) {
    if (v > max_pos) max_pos = v;
    if (-v > max_neg) max_neg = -v;
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (v > 0.0)
      out.push_back(v / max_pos);
    else if (v < 0.0)
      out.push_back(v / max_neg);
    else
      out.push_back(0.0);
  }
  return out;
}

const std::vector<std::string>& impact_components() {
  static const std::vector<std::string> kComponents = {
      "demos", "rollouts", "prefill", "auxbc", "bc",    "mcq",
      "calql", "cqlrho",   "cqlh",    "resrl", "ibrl",  "cheq"};
  return kComponents;
}

bool component_present(const AgentSpec& spec, const std::string& c) {
  if (c == "demos") return spec.prefill == PrefillSource::Demos;
  if (c == "rollouts") return spec.prefill == PrefillSource::Rollouts;
  if (c == "prefill") return spec.prefill != PrefillSource::Off;
  if (c == "auxbc") return spec.auxbc;
  if (c == "bc") return spec.init == InitMethod::Bc;
  if (c == "mcq") return spec.init == InitMethod::Mcq;
  if (c == "calql") return spec.init == InitMethod::CalQl;
  if (c == "cqlrho") return spec.init == InitMethod::CqlRho;
  if (c == "cqlh") return spec.init == InitMethod::CqlH;
  if (c == "resrl") return spec.mixer == MixerKind::ResRl;
  if (c == "ibrl") return spec.mixer == MixerKind::Ibrl;
  if (c == "cheq") return spec.mixer == MixerKind::Cheq;
  throw ConfigError("unknown component '" + c + "'");
}

std::optional<AgentSpec> component_removed(const AgentSpec& spec, const std::string& c) {
  if (!component_present(spec, c)) return std::nullopt;
  AgentSpec out = spec;
  // The two data sources pair against each other; everything else pairs
  // against its absence.
  if (c == "demos")
    out.prefill = PrefillSource::Rollouts;
  else if (c == "rollouts")
    out.prefill = PrefillSource::Demos;
  else if (c == "prefill")
    out.prefill = PrefillSource::Off;
  else if (c == "auxbc")
    out.auxbc = false;
  else if (c == "bc" || c == "mcq" || c == "calql" || c == "cqlrho" || c == "cqlh")
    out.init = InitMethod::None;
  else
    out.mixer = MixerKind::None;
  try {
    validate_spec(out);
  } catch (const ConfigError&) {
    return std::nullopt;
  }
  return out;
}

namespace {

struct SettingAggregate {
  // alg -> seed -> auc (map keys give deterministic order)
  std::map<std::string, std::map<uint64_t, double>> aucs;
};

std::map<std::string, SettingAggregate> aggregate(const std::vector<RunEntry>& runs,
                                                  int64_t budget) {
  std::map<std::string, SettingAggregate> by_setting;
  for (const auto& run : runs)
    by_setting[run.setting].aucs[run.alg][run.seed] = auc(run.record, budget);
  return by_setting;
}

double seed_mean(const std::map<uint64_t, double>& m) {
  double s = 0.0;
  for (const auto& [seed, v] : m) s += v;
  return s / m.size();
}

int64_t derive_budget(const std::vector<RunEntry>& runs) {
  int64_t budget = 0;
  for (const auto& run : runs)
    for (const auto& p : run.record.points) budget = std::max(budget, p.env_step);
  if (budget <= 0) throw NotReadyError("cannot derive a budget from the run records");
  return budget;
}

}  // namespace

std::map<std::string, double> component_impact(const std::vector<RunEntry>& runs,
                                               const std::string& component, int64_t budget) {
  if (budget <= 0) budget = derive_budget(runs);
  auto by_setting = aggregate(runs, budget);
  std::map<std::string, double> out;
  for (const auto& [setting, agg] : by_setting) {
    double sum = 0.0;
    int pairs = 0;
    for (const auto& [alg, seeds] : agg.aucs) {
      AgentSpec spec;
      try {
        spec = parse_spec_string(alg);
      } catch (const ConfigError&) {
        continue;
      }
      auto partner = component_removed(spec, component);
      if (!partner) continue;
      const std::string partner_str = spec_string(*partner);
      auto it = agg.aucs.find(partner_str);
      if (it == agg.aucs.end()) continue;
      sum += seed_mean(seeds) - seed_mean(it->second);
      ++pairs;
    }
    if (pairs > 0) out[setting] = sum / pairs;
  }
  return out;
}

std::vector<DifficultyEntry> difficulty_rank(const std::vector<RunEntry>& baseline_runs,
                                             int64_t budget) {
  (void)budget;
  std::map<std::string, std::vector<const RunRecord*>> by_setting;
  for (const auto& run : baseline_runs) by_setting[run.setting].push_back(&run.record);
  std::vector<DifficultyEntry> out;
  for (const auto& [setting, records] : by_setting) {
    const size_t npts = records.front()->points.size();
    for (const auto* rec : records)
      if (rec->points.size() != npts)
        throw ConfigError("difficulty ranking needs a common evaluation grid in setting '" +
                          setting + "'");
    std::vector<double> mean(npts, 0.0);
    std::vector<int64_t> steps(npts, 0);
    for (size_t i = 0; i < npts; ++i) {
      steps[i] = records.front()->points[i].env_step;
      for (const auto* rec : records) {
        if (rec->points[i].env_step != steps[i])
          throw ConfigError("difficulty ranking needs a common evaluation grid in setting '" +
                            setting + "'");
        mean[i] += rec->points[i].success_rate;
      }
      mean[i] /= records.size();
    }
    const double peak = *std::max_element(mean.begin(), mean.end());
    DifficultyEntry entry;
    entry.setting = setting;
    if (peak <= 0.0) {
      entry.rankable = false;
    } else {
      entry.rankable = true;
      const double threshold = 0.99 * peak;
      for (size_t i = 0; i < npts; ++i)
        if (mean[i] >= threshold) {
          entry.steps_to_peak = steps[i];
          break;
        }
    }
    out.push_back(entry);
  }
  std::sort(out.begin(), out.end(), [](const DifficultyEntry& a, const DifficultyEntry& b) {
    if (a.rankable != b.rankable) return a.rankable;
    if (a.steps_to_peak != b.steps_to_peak) return a.steps_to_peak < b.steps_to_peak;
    return a.setting < b.setting;
  });
  return out;
}

Report build_report(const std::vector<RunEntry>& runs, int64_t budget) {
  if (runs.empty()) throw NotReadyError("no runs to report on");
  Report report;
  report.budget = budget > 0 ? budget : derive_budget(runs);
  auto by_setting = aggregate(runs, report.budget);

  std::vector<RunEntry> baseline_runs;

  for (const auto& [setting, agg] : by_setting) {
    SettingReport sr;
    sr.setting = setting;
    // Baseline: the component-free spec, preferring the stochastic base.
    for (const std::string cand : {"sac", "td3"}) {
      if (agg.aucs.count(cand)) {
        sr.baseline_alg = cand;
        break;
      }
    }
    if (sr.baseline_alg.empty())
      throw ConfigError("setting '" + setting + "' has no baseline run");
    const auto& base_seeds = agg.aucs.at(sr.baseline_alg);
    sr.baseline_auc_mean = seed_mean(base_seeds);
    std::vector<double> base_aucs;
    for (const auto& [seed, v] : base_seeds) base_aucs.push_back(v);

    std::vector<double> improvements;
    for (const auto& [alg, seeds] : agg.aucs) {
      AlgResult res;
      res.alg = alg;
      for (const auto& [seed, v] : seeds) res.seed_aucs.push_back(v);
      res.auc_mean = seed_mean(seeds);
      if (alg == sr.baseline_alg) {
        res.improvement = 0.0;
      } else {
        res.improvement = improvement(res.seed_aucs, base_aucs);
      }
      improvements.push_back(res.improvement);
      sr.algs.push_back(std::move(res));
    }
    std::vector<double> normalized = normalize_signed(improvements);
    for (size_t i = 0; i < sr.algs.size(); ++i) sr.algs[i].normalized = normalized[i];
    report.settings.push_back(std::move(sr));
  }

  // SEI: unweighted mean of normalized scores across settings, restricted to
  // algorithms present in every setting.
  std::map<std::string, int> presence;
  std::map<std::string, double> sums;
  for (const auto& sr : report.settings)
    for (const auto& res : sr.algs) {
      presence[res.alg] += 1;
      sums[res.alg] += res.normalized;
    }
  const int nsettings = static_cast<int>(report.settings.size());
  for (const auto& [alg, count] : presence) {
    if (count == nsettings)
      report.sei[alg] = sums[alg] / nsettings;
    else
      report.warnings.push_back("algorithm '" + alg + "' missing from " +
                                std::to_string(nsettings - count) +
                                " setting(s); excluded from the aggregate score");
  }

  // Paired per-component impact with per-setting sign-preserving
  // normalization across components.
  std::map<std::string, std::map<std::string, double>> raw_by_component;
  std::map<std::string, std::map<std::string, double>> norm_by_component;
  for (const auto& c : impact_components())
    raw_by_component[c] = component_impact(runs, c, report.budget);
  for (const auto& sr : report.settings) {
    std::vector<std::string> comps;
    std::vector<double> vals;
    for (const auto& c : impact_components()) {
      auto it = raw_by_component[c].find(sr.setting);
      if (it != raw_by_component[c].end()) {
        comps.push_back(c);
        vals.push_back(it->second);
      }
    }
    std::vector<double> norm = normalize_signed(vals);
    for (size_t i = 0; i < comps.size(); ++i) norm_by_component[comps[i]][sr.setting] = norm[i];
  }
  for (const auto& c : impact_components()) {
    ComponentImpact ci;
    ci.component = c;
    ci.raw = raw_by_component[c];
    ci.normalized = norm_by_component[c];
    ci.total_pairs = static_cast<int>(ci.raw.size());
    report.impacts.push_back(std::move(ci));
  }

  for (const auto& run : runs) {
    AgentSpec spec;
    try {
      spec = parse_spec_string(run.alg);
    } catch (const ConfigError&) {
      continue;
    }
    if (spec.is_baseline() && spec.base == BaseAlg::Sac) baseline_runs.push_back(run);
  }
  if (baseline_runs.empty())
    for (const auto& run : runs)
      if (run.alg == "td3") baseline_runs.push_back(run);
  if (!baseline_runs.empty()) report.difficulty = difficulty_rank(baseline_runs, report.budget);

  return report;
}

namespace {

std::string tsv_escape(const std::string& s) { return s; }

void write_svg_bars(const std::filesystem::path& path, const std::string& title,
                    const std::vector<std::pair<std::string, double>>& bars) {
  const int width = 720, bar_h = 18, gap = 6, label_w = 260, chart_w = width - label_w - 80;
  const int height = 40 + static_cast<int>(bars.size()) * (bar_h + gap);
  double max_abs = 1e-9;
  for (const auto& [name, v] : bars) max_abs = std::max(max_abs, std::fabs(v));
  const int zero_x = label_w + chart_w / 2;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n";
  svg << "<text x='10' y='20' font-family='monospace' font-size='14'>" << title << "</text>\n";
  svg << "<line x1='" << zero_x << "' y1='30' x2='" << zero_x << "' y2='" << height - 8
      << "' stroke='#888'/>\n";
  int y = 34;
  for (const auto& [name, v] : bars) {
    const double half = chart_w / 2.0;
    const double w = std::fabs(v) / max_abs * half;
    const double x = v >= 0.0 ? zero_x : zero_x - w;
    svg << "<text x='10' y='" << y + bar_h - 5 << "' font-family='monospace' font-size='12'>"
        << name << "</text>\n";
    svg << "<rect x='" << fmt_double(x) << "' y='" << y << "' width='" << fmt_double(std::max(w, 0.5))
        << "' height='" << bar_h << "' fill='" << (v >= 0.0 ? "#4878a8" : "#b04a4a") << "'/>\n";
    svg << "<text x='" << fmt_double(v >= 0.0 ? x + w + 4 : x - 4) << "' y='" << y + bar_h - 5
        << "' font-family='monospace' font-size='11' text-anchor='"
        << (v >= 0.0 ? "start" : "end") << "'>" << fmt_double(v) << "</text>\n";
    y += bar_h + gap;
  }
  svg << "</svg>\n";
  write_text_file(path, svg.str());
}

}  // namespace

void write_report(const Report& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  // Aggregate score table, best first.
  std::vector<std::pair<std::string, double>> sei_sorted(report.sei.begin(), report.sei.end());
  std::sort(sei_sorted.begin(), sei_sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  {
    std::ostringstream out;
    out << "algorithm";
    for (const auto& sr : report.settings) out << '\t' << sr.setting;
    out << "\tsei\n";
    for (const auto& [alg, score] : sei_sorted) {
      out << tsv_escape(alg);
      for (const auto& sr : report.settings) {
        double v = 0.0;
        for (const auto& res : sr.algs)
          if (res.alg == alg) v = res.normalized;
        out << '\t' << fmt_double(v);
      }
      out << '\t' << fmt_double(score) << '\n';
    }
    write_text_file(out_dir / "sei.tsv", out.str());
  }

  for (const auto& sr : report.settings) {
    std::ostringstream out;
    out << "algorithm\tauc_mean\timprovement\tnormalized\tseed_aucs\n";
    for (const auto& res : sr.algs) {
      out << tsv_escape(res.alg) << '\t' << fmt_double(res.auc_mean) << '\t'
          << fmt_double(res.improvement) << '\t' << fmt_double(res.normalized) << '\t';
      for (size_t i = 0; i < res.seed_aucs.size(); ++i)
        out << (i ? "," : "") << fmt_double(res.seed_aucs[i]);
      out << '\n';
    }
    write_text_file(out_dir / ("setting_" + sr.setting + ".tsv"), out.str());
  }

  {
    std::ostringstream out;
    out << "component";
    for (const auto& sr : report.settings) out << '\t' << sr.setting;
    out << "\tmean_normalized\n";
    for (const auto& ci : report.impacts) {
      out << ci.component;
      double sum = 0.0;
      int cnt = 0;
      for (const auto& sr : report.settings) {
        auto it = ci.normalized.find(sr.setting);
        if (it == ci.normalized.end()) {
          out << "\tmissing";
        } else {
          out << '\t' << fmt_double(it->second);
          sum += it->second;
          ++cnt;
        }
      }
      out << '\t' << (cnt ? fmt_double(sum / cnt) : "missing") << '\n';
    }
    write_text_file(out_dir / "impact.tsv", out.str());
  }

  {
    std::ostringstream out;
    out << "setting\tsteps_to_peak\trank\n";
    int rank = 1;
    for (const auto& d : report.difficulty) {
      out << d.setting << '\t' << (d.rankable ? std::to_string(d.steps_to_peak) : "unrankable")
          << '\t' << (d.rankable ? std::to_string(rank++) : std::string("-")) << '\n';
    }
    write_text_file(out_dir / "difficulty.tsv", out.str());
  }

  // Machine-readable structured summary.
  {
    nlohmann::json j;
    j["budget"] = report.budget;
    j["sei"] = nlohmann::json::object();
    for (const auto& [alg, v] : report.sei) j["sei"][alg] = v;
    j["settings"] = nlohmann::json::array();
    for (const auto& sr : report.settings) {
      nlohmann::json js;
      js["setting"] = sr.setting;
      js["baseline"] = sr.baseline_alg;
      js["baseline_auc_mean"] = sr.baseline_auc_mean;
      js["algorithms"] = nlohmann::json::array();
      for (const auto& res : sr.algs) {
        nlohmann::json ja;
        ja["algorithm"] = res.alg;
        ja["seed_aucs"] = res.seed_aucs;
        ja["auc_mean"] = res.auc_mean;
        ja["improvement"] = res.improvement;
        ja["normalized"] = res.normalized;
        js["algorithms"].push_back(ja);
      }
      j["settings"].push_back(js);
    }
    j["impacts"] = nlohmann::json::array();
    for (const auto& ci : report.impacts) {
      nlohmann::json jc;
      jc["component"] = ci.component;
      jc["raw"] = ci.raw;
      jc["normalized"] = ci.normalized;
      j["impacts"].push_back(jc);
    }
    j["difficulty"] = nlohmann::json::array();
    for (const auto& d : report.difficulty) {
      nlohmann::json jd;
      jd["setting"] = d.setting;
      jd["rankable"] = d.rankable;
      if (d.rankable) jd["steps_to_peak"] = d.steps_to_peak;
      j["difficulty"].push_back(jd);
    }
    j["warnings"] = report.warnings;
    write_text_file(out_dir / "summary.json", j.dump(2) + "\n");
  }

  write_svg_bars(out_dir / "sei.svg", "sample efficiency improvement", sei_sorted);
  {
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& ci : report.impacts) {
      if (ci.normalized.empty()) continue;
      double sum = 0.0;
      for (const auto& [s, v] : ci.normalized) sum += v;
      bars.emplace_back(ci.component, sum / ci.normalized.size());
    }
    write_svg_bars(out_dir / "impact.svg", "normalized component impact (mean over settings)",
                   bars);
  }
}

}  // namespace darl
