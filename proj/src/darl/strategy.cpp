#include "darl/strategy.hpp"

#include "darl/losses.hpp"

#include <cmath>

namespace darl {

const char* base_name(BaseAlg b) { return b == BaseAlg::Sac ? "sac" : "td3"; }

const char* prefill_name(PrefillSource p) {
  switch (p) {
    case PrefillSource::Off: return "off";
    case PrefillSource::Demos: return "demos";
    case PrefillSource::Rollouts: return "rollouts";
  }
  return "off";
}

const char* init_name(InitMethod i) {
  switch (i) {
    case InitMethod::None: return "none";
    case InitMethod::Bc: return "bc";
    case InitMethod::Mcq: return "mcq";
    case InitMethod::CalQl: return "calql";
    case InitMethod::CqlRho: return "cqlrho";
    case InitMethod::CqlH: return "cqlh";
  }
  return "none";
}

const char* mixer_name(MixerKind m) {
  switch (m) {
    case MixerKind::None: return "none";
    case MixerKind::Ibrl: return "ibrl";
    case MixerKind::Cheq: return "cheq";
    case MixerKind::ResRl: return "resrl";
  }
  return "none";
}

std::string spec_string(const AgentSpec& spec) {
  std::string s = base_name(spec.base);
  if (spec.prefill != PrefillSource::Off) {
    s += '-';
    s += prefill_name(spec.prefill);
    s += "-prefill";
  }
  if (spec.auxbc) s += "-auxbc";
  if (spec.init != InitMethod::None) {
    s += '-';
    s += init_name(spec.init);
  }
  if (spec.mixer != MixerKind::None) {
    s += '-';
    s += mixer_name(spec.mixer);
  }
  return s;
}

AgentSpec parse_spec_string(const std::string& text) {
  AgentSpec spec;
  bool saw_source = false;
  std::vector<std::string> tokens;
  size_t start = 0;
  while (start <= text.size()) {
    size_t pos = text.find('-', start);
    if (pos == std::string::npos) pos = text.size();
    if (pos > start) tokens.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  if (tokens.empty()) throw ConfigError("empty agent spec string");
  for (size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t == "sac" || t == "td3") {
      if (i != 0) throw ConfigError("agent spec: base algorithm must come first in '" + text + "'");
      spec.base = t == "sac" ? BaseAlg::Sac : BaseAlg::Td3;
    } else if (t == "demos" || t == "rollouts") {
      spec.prefill = t == "demos" ? PrefillSource::Demos : PrefillSource::Rollouts;
      saw_source = true;
    } else if (t == "prefill") {
      if (!saw_source) spec.prefill = PrefillSource::Demos;
    } else if (t == "auxbc") {
      spec.auxbc = true;
    } else if (t == "bc") {
      spec.init = InitMethod::Bc;
    } else if (t == "mcq") {
      spec.init = InitMethod::Mcq;
    } else if (t == "calql") {
      spec.init = InitMethod::CalQl;
    } else if (t == "cqlrho") {
      spec.init = InitMethod::CqlRho;
    } else if (t == "cqlh") {
      spec.init = InitMethod::CqlH;
    } else if (t == "resrl") {
      spec.mixer = MixerKind::ResRl;
    } else if (t == "ibrl") {
      spec.mixer = MixerKind::Ibrl;
    } else if (t == "cheq") {
      spec.mixer = MixerKind::Cheq;
    } else {
      throw ConfigError("agent spec: unknown component '" + t + "' in '" + text + "'");
    }
  }
  return spec;
}

void validate_spec(const AgentSpec& spec) {
  if (spec.prefill == PrefillSource::Rollouts && spec.init == InitMethod::None)
    throw ConfigError(
        "agent spec: rollouts prefill needs a pretrained policy (set a non-none init)");
}

std::vector<AgentSpec> enumerate_lattice(BaseAlg base) {
  std::vector<AgentSpec> out;
  for (PrefillSource pf : {PrefillSource::Off, PrefillSource::Demos, PrefillSource::Rollouts})
    for (bool aux : {false, true})
      for (InitMethod init : {InitMethod::None, InitMethod::Bc, InitMethod::Mcq, InitMethod::CalQl,
                              InitMethod::CqlRho, InitMethod::CqlH})
        for (MixerKind mix :
             {MixerKind::None, MixerKind::Ibrl, MixerKind::Cheq, MixerKind::ResRl}) {
          AgentSpec s{base, pf, aux, init, mix};
          if (pf == PrefillSource::Rollouts && init == InitMethod::None) continue;
          out.push_back(s);
        }
  return out;
}

VectorXd mix_ibrl(const std::vector<const Mlp*>& critics, const VectorXd& s,
                  const VectorXd& a_off, const VectorXd& a_on) {
  if (!a_off.allFinite() || !a_on.allFinite())
    throw NumericError("non-finite action proposal in value-based mixing");
  MatrixXd sa(s.size() + a_off.size(), 2);
  sa.col(0) << s, a_off;
  sa.col(1) << s, a_on;
  VectorXd q = min_q_values(critics, sa);
  return q(0) > q(1) ? a_off : a_on;
}

double cheq_lambda(double uncertainty, const CheqParams& p) {
  if (uncertainty <= p.u_min) return p.lambda_max;
  if (uncertainty >= p.u_max) return p.lambda_min;
  const double t = (uncertainty - p.u_min) / (p.u_max - p.u_min);
  return p.lambda_max + t * (p.lambda_min - p.lambda_max);
}

CheqMixResult mix_cheq(const std::vector<const Mlp*>& critics, const VectorXd& s_aug,
                       const VectorXd& a_off, const VectorXd& a_on, const CheqParams& p) {
  if (critics.size() < 2) throw ConfigError("uncertainty mixing needs an ensemble of >= 2 critics");
  MatrixXd sa(s_aug.size() + a_on.size(), 1);
  sa.col(0) << s_aug, a_on;
  double mean = 0.0, sq = 0.0;
  for (const Mlp* c : critics) {
    const double q = mlp_forward(*c, sa)(0, 0);
    mean += q;
    sq += q * q;
  }
  const double n = static_cast<double>(critics.size());
  mean /= n;
  const double var = std::max(0.0, sq / n - mean * mean);
  CheqMixResult res;
  res.uncertainty = std::sqrt(var);
  res.lambda = cheq_lambda(res.uncertainty, p);
  res.a_mix = (1.0 - res.lambda) * a_off + res.lambda * a_on;
  return res;
}

VectorXd mix_residual(const VectorXd& a_off, const VectorXd& a_res, double lo, double hi) {
  return (a_off + a_res).cwiseMax(lo).cwiseMin(hi);
}

}  // namespace darl
