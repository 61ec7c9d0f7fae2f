#pragma once

#include <cmath>
#include <stdexcept>

#include "spinbus/analytic.hpp"
#include "spinbus/numeric.hpp"
#include "spinbus/params.hpp"

namespace spinbus {

// Scalar error inputs of the teleported-CNOT circuit around one Bell pair.
struct AncillaryErrors {
  double e_control = 0.0; // electron spin control
  double eta = 0.0;       // feedback weighting of control errors
  double e_init = 0.0;    // initialization
  double e_ro = 0.0;      // readout
  double e_cnot = 0.0;    // electron-nuclear CNOT
  double e_nuc = 0.0;     // nuclear bath dephasing
  double gamma_ratio = 1.0 / 2600.0; // gamma_N / gamma_e (13C default)
  double t_ro = 0.0;      // mechanical readout duration [s]
  double gamma1 = 0.0;    // spin relaxation rate Gamma_1 [1/s]
};

inline void validate(const AncillaryErrors& a) {
  auto in01 = [](double e) { return e >= 0.0 && e <= 1.0; };
  if (!in01(a.e_control) || !in01(a.e_init) || !in01(a.e_ro) || !in01(a.e_cnot) ||
      !in01(a.e_nuc))
    throw std::invalid_argument("AncillaryErrors: every error must lie in [0, 1]");
  if (!(a.eta >= 0.0)) throw std::invalid_argument("AncillaryErrors: eta must be >= 0");
}

/// Total teleported-gate error
/// E_T = E + 2((1+eta) E_C + E_init + E_RO + E_CNOT + E_nuc), clamped to [0,1].
inline double total_error(double e_bell, const AncillaryErrors& a) {
  validate(a);
  if (!(e_bell >= 0.0 && e_bell <= 1.0))
    throw std::invalid_argument("total_error: e_bell must lie in [0, 1]");
  const double t = e_bell + 2.0 * ((1.0 + a.eta) * a.e_control + a.e_init + a.e_ro +
                                   a.e_cnot + a.e_nuc);
  return clamp01(t);
}

/// Momentum displacement accumulated during a mechanical spin readout of
/// duration t_ro with relaxation Gamma_1:
/// <mu> = 2 sqrt2 lambda sigma_z / (pi (kappa/2 - Gamma_1)) (e^{-G1 t} - e^{-kappa t/2}),
/// continuous through the Gamma_1 = kappa/2 point.
inline double mech_readout_displacement(const SystemParams& p, double t_ro,
                                        double gamma1, int sigma_z = 1) {
  if (t_ro < 0.0) throw std::invalid_argument("mech_readout_displacement: t_ro must be >= 0");
  const double d = 0.5 * kappa(p) - gamma1;
  // (e^{-g1 t} - e^{-k t/2})/d = e^{-g1 t} t (1 - e^{-d t})/(d t)
  const double diff_over_d = std::exp(-gamma1 * t_ro) * t_ro * one_minus_exp_over(d * t_ro);
  return 2.0 * sqrt2 * p.lambda_coupling * static_cast<double>(sigma_z) * diff_over_d / pi;
}

/// Readout assignment error in the diffusion-dominated limit,
/// E_RO = 1/2 Erfc((lambda/pi) sqrt(4 t_ro / (kappa n_th))).
inline double mech_readout_error(const SystemParams& p, double t_ro) {
  if (t_ro < 0.0) throw std::invalid_argument("mech_readout_error: t_ro must be >= 0");
  const double kn = kappa(p) * thermal_occupation(p);
  if (kn <= 0.0) return 0.0;
  const double x = (p.lambda_coupling / pi) * std::sqrt(4.0 * t_ro / kn);
  return 0.5 * std::erfc(x);
}

/// Nuclear dephasing over the protocol wall time at rate Gamma gamma_N/gamma_e.
inline double nuclear_dephasing_error(const SystemParams& p, const AncillaryErrors& a,
                                      double wall_time) {
  if (wall_time < 0.0)
    throw std::invalid_argument("nuclear_dephasing_error: wall_time must be >= 0");
  return 0.5 * (-std::expm1(-p.gamma * a.gamma_ratio * wall_time));
}

/// Expected wall time of the repeat-until-success loop, t* / (r_p + r_f).
inline double expected_wall_time(double t_opt, double acceptance) {
  if (!(acceptance > 0.0))
    throw std::domain_error("expected_wall_time: acceptance probability must be > 0");
  return t_opt / acceptance;
}

struct GateBudgetPoint {
  double c;
  double e_bell;       // Bell preparation error (alpha -> 0 bound)
  double e_ro;         // mechanical readout at t_ro = readout_factor * t*
  double e_nuc;
  double e_total;
  double e_reference;  // deterministic hot gate + CNOT floor
};

/// Error-vs-cooperativity curve for the teleported gate: Bell error from the
/// closed-form bound, mechanical readout at readout_factor * t*, and the
/// remaining inputs as given.  Nuclear dephasing over the expected time to
/// success is reported either way but enters E_T only when include_nuclear
/// is set.  The coupling is swept at fixed (Gamma, kappa, n_th) so C alone
/// parameterizes the curve.
inline GateBudgetPoint gate_budget_point(const SystemParams& base, double c,
                                         const AncillaryErrors& anc,
                                         double readout_factor = 20.0,
                                         double heralding_alpha = 0.4,
                                         bool include_nuclear = false) {
  if (!(c > min_cooperativity))
    throw std::domain_error("gate_budget_point: requires C > pi^2/8");
  SystemParams p = base;
  const double kn = kappa(p) * thermal_occupation(p);
  p.lambda_coupling = std::sqrt(c * p.gamma * kn);

  GateBudgetPoint out{};
  out.c = c;
  out.e_bell = bound_error(c);
  const double t_opt = analytic_optimal_time(p);
  out.e_ro = mech_readout_error(p, readout_factor * t_opt);

  const double g = normalized_displacement_linearized(p, t_opt);
  const double acceptance = acceptance_rate(g, heralding_alpha);
  out.e_nuc = anc.e_nuc > 0.0
                  ? anc.e_nuc
                  : nuclear_dephasing_error(p, anc, expected_wall_time(t_opt, acceptance));

  AncillaryErrors a = anc;
  a.e_nuc = include_nuclear ? out.e_nuc : 0.0;
  a.e_ro = a.e_ro > 0.0 ? a.e_ro : out.e_ro;
  out.e_total = total_error(out.e_bell, a);
  out.e_reference = clamp01(hot_gate_error(c) + 2.0 * anc.e_cnot);
  return out;
}

} // namespace spinbus
