// Strategy vocabulary: declarative agent composition descriptors and the pure
// reference-action mixing rules (value-based selection, uncertainty-weighted
// interpolation, residual correction).
#pragma once

#include "darl/nn.hpp"

namespace darl {

enum class BaseAlg { Sac, Td3 };
enum class PrefillSource { Off, Demos, Rollouts };
enum class InitMethod { None, Bc, Mcq, CalQl, CqlRho, CqlH };
enum class MixerKind { None, Ibrl, Cheq, ResRl };

// Declarative composition descriptor. Canonical component strings follow the
// fixed vocabulary: demos, rollouts, prefill, auxbc, bc, mcq, calql, cqlrho,
// cqlh, resrl, ibrl, cheq.
struct AgentSpec {
  BaseAlg base = BaseAlg::Sac;
  PrefillSource prefill = PrefillSource::Off;
  bool auxbc = false;
  InitMethod init = InitMethod::None;
  MixerKind mixer = MixerKind::None;

  bool operator==(const AgentSpec&) const = default;
  bool is_baseline() const {
    return prefill == PrefillSource::Off && !auxbc && init == InitMethod::None &&
           mixer == MixerKind::None;
  }
  bool needs_reference_policy() const {
    return mixer != MixerKind::None || prefill == PrefillSource::Rollouts;
  }
  bool needs_dataset() const {
    return prefill != PrefillSource::Off || auxbc || init != InitMethod::None ||
           mixer != MixerKind::None;
  }
};

const char* base_name(BaseAlg b);
const char* prefill_name(PrefillSource p);
const char* init_name(InitMethod i);
const char* mixer_name(MixerKind m);

// e.g. "sac", "sac-demos-prefill-auxbc-bc-ibrl". Round-trips with the parser.
std::string spec_string(const AgentSpec& spec);
AgentSpec parse_spec_string(const std::string& text);

// Throws ConfigError on contradictory component choices (rollouts prefill
// without a pretrained policy to roll out).
void validate_spec(const AgentSpec& spec);

// Every valid component combination for one base algorithm.
std::vector<AgentSpec> enumerate_lattice(BaseAlg base);

// --- Reference-action mixing -------------------------------------------------

// Value-based selection: the proposal with the higher min-over-ensemble Q wins;
// exact ties go to the online proposal.
VectorXd mix_ibrl(const std::vector<const Mlp*>& critics, const VectorXd& s,
                  const VectorXd& a_off, const VectorXd& a_on);

struct CheqParams {
  double u_min = 0.15, u_max = 0.275;
  double lambda_min = 0.2, lambda_max = 1.0;
};

// Maps ensemble uncertainty to the online-action weight: lambda_max at or
// below u_min, lambda_min at or above u_max, linear in between.
double cheq_lambda(double uncertainty, const CheqParams& p);

struct CheqMixResult {
  VectorXd a_mix;
  double lambda = 0.0;
  double uncertainty = 0.0;
};

// Uncertainty is the standard deviation of Q(s_aug, a_on) across the ensemble.
// s_aug already carries the previous mixing weight as its last coordinate.
CheqMixResult mix_cheq(const std::vector<const Mlp*>& critics, const VectorXd& s_aug,
                       const VectorXd& a_off, const VectorXd& a_on, const CheqParams& p);

// a_mix = clip(a_off + a_res, bounds).
VectorXd mix_residual(const VectorXd& a_off, const VectorXd& a_res, double lo = -1.0,
                      double hi = 1.0);

}  // namespace darl
