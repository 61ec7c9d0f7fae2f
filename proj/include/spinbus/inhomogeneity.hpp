#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "spinbus/analytic.hpp"
#include "spinbus/mech_sim.hpp"
#include "spinbus/params.hpp"
#include "spinbus/rng.hpp"
#include "spinbus/stats.hpp"

namespace spinbus {

namespace detail {

// f(u) = u + 12 e^{-u/4} + 4 e^{-3u/4} - 8 e^{-u/2} - e^{-u} - 7, the damped
// echo kernel integral; ~ u^3/48 as u -> 0.  The direct expression cancels
// ten significant digits at small u, so a series takes over below 0.05.
inline double echo_kernel_bracket(double u) {
  if (u < 0.05) {
    const double u3 = u * u * u;
    return u3 / 48.0 - u3 * u / 128.0 + (37.0 / 15360.0) * u3 * u * u;
  }
  return u + 12.0 * std::exp(-0.25 * u) + 4.0 * std::exp(-0.75 * u) -
         8.0 * std::exp(-0.5 * u) - std::exp(-u) - 7.0;
}

} // namespace detail

/// Variance of the echoed DFS phase accumulated from thermalization noise,
/// exact in kappa t.  Normalized to quadrature units consistent with mu and
/// sigma, so the kappa t << 1 limit is (16/3 pi^2) kappa n_th dl^2 t^3.
inline double sigma_dphi_sq_exact(const SystemParams& p, double delta_lambda, double t) {
  if (t < 0.0) throw std::invalid_argument("sigma_dphi_sq_exact: t must be >= 0");
  const double k = kappa(p);
  const double n = thermal_occupation(p);
  const double dl2 = delta_lambda * delta_lambda;
  const double u = k * t;
  if (u < 0.05) {
    // (n/k^2) * bracket expanded in-place; every term carries k^{>=1} so the
    // kappa -> 0 limit is exact.
    const double t3 = t * t * t;
    return (256.0 / (pi * pi)) * dl2 * n *
           (k * t3 / 48.0 - k * k * t3 * t / 128.0 +
            (37.0 / 15360.0) * k * k * k * t3 * t * t);
  }
  return (256.0 / (pi * pi)) * dl2 * (n / (k * k)) * detail::echo_kernel_bracket(u);
}

/// Lowest-order form (16 / 3 pi^2) kappa n_th dl^2 t^3.
inline double sigma_dphi_sq_expanded(const SystemParams& p, double delta_lambda, double t) {
  if (t < 0.0) throw std::invalid_argument("sigma_dphi_sq_expanded: t must be >= 0");
  const double dl2 = delta_lambda * delta_lambda;
  return (16.0 / (3.0 * pi * pi)) * kappa(p) * thermal_occupation(p) * dl2 * t * t * t;
}

/// Fidelity multiplier (1 + e^{-sigma^2/2}) / 2 from the residual random phase.
inline double dephasing_fidelity_factor(double sigma_dphi_sq) {
  if (!(sigma_dphi_sq >= 0.0))
    throw std::invalid_argument("dephasing_fidelity_factor: sigma^2 must be >= 0");
  return 0.5 * (1.0 + std::exp(-0.5 * sigma_dphi_sq));
}

struct ProjectionFactor {
  double exact;      // 1/2 + 1/2 e^{-sigma^2/2} e^{-dg^2/2}
  double expansion;  // 1 - dg^2/4 - sigma^2/4
  bool full_projection; // measurement fully resolves the DFS states
};

/// Fidelity multiplier from measurement back-projection onto |01>, |10>.
/// delta_g_meas is the differential displacement normalized by the combined
/// measurement uncertainty, dmu / dm_bar.
inline ProjectionFactor projection_fidelity_factor(double delta_g_meas,
                                                   double sigma_dphi_sq) {
  if (!(sigma_dphi_sq >= 0.0))
    throw std::invalid_argument("projection_fidelity_factor: sigma^2 must be >= 0");
  ProjectionFactor out;
  out.full_projection = !std::isfinite(delta_g_meas);
  const double overlap = out.full_projection
                             ? 0.0
                             : std::exp(-0.5 * delta_g_meas * delta_g_meas);
  out.exact = 0.5 + 0.5 * std::exp(-0.5 * sigma_dphi_sq) * overlap;
  out.expansion = 1.0 - 0.25 * delta_g_meas * delta_g_meas - 0.25 * sigma_dphi_sq;
  return out;
}

/// True-positive probability with a differential displacement dg = dmu/sigma:
/// r_p(dg) = 1/2 - 1/4 [Erfc((ag + dg)/sqrt2) + Erfc((ag - dg)/sqrt2)].
inline double shifted_true_positive(double g, double alpha, double delta_g) {
  if (!std::isfinite(g) || !std::isfinite(delta_g))
    throw std::invalid_argument("shifted_true_positive: non-finite input");
  const double a = alpha * g;
  return 0.5 - 0.25 * (std::erfc((a + delta_g) / sqrt2) +
                       std::erfc((a - delta_g) / sqrt2));
}

// Coupling-inhomogeneity budget at the measurement-free optimum.
struct InhomogeneityBudget {
  double delta_lambda;   // input dl [rad/s]
  double sigma_dphi_sq;  // at (dl, t_opt)
  double delta_g;        // dmu / sigma at t_opt
  double dl_max_phi;     // phonon-dephasing tolerance [rad/s]
  double dl_max_m;       // measurement-projection tolerance [rad/s]
  double dl_max_disp;    // displacement-shift tolerance [rad/s]
  double dl_max;         // min of the three
  double t_opt;          // optimum re-derived at dm = 0 [s]
  double error;          // preparation error at that optimum
};

/// Tolerances dl_max_{phi,m,disp} evaluated at the optimal point re-derived
/// with the measurement uncertainty set to zero (same cooperativity); the
/// projection channel keeps the physical dm through dm_bar^2 = 6 dm^2.
/// target_error <= 0 means "use the preparation error at that optimum".
inline InhomogeneityBudget tolerances(const SystemParams& p, const MeasurementParams& m,
                                      double alpha, double target_error = 0.0,
                                      double delta_lambda = 0.0) {
  validate(p);
  MeasurementParams ideal = m;
  ideal.delta_m_sq = 0.0;
  const Threshold th = Threshold::value(alpha);
  const auto peak = optimal_time(p, ideal, th);
  const double t0 = peak.t_opt;
  const double err = target_error > 0.0 ? target_error : 1.0 - peak.fidelity;
  if (!(err > 0.0 && err < 0.5))
    throw std::domain_error("tolerances: target error must lie in (0, 1/2)");

  const double g0 = normalized_displacement(p, ideal, t0);
  const double sigma0 = std::sqrt(difference_variance(p, ideal, t0));
  const double rp0 = true_positive_rate(g0, alpha);
  const double rf0 = false_positive_rate(g0, alpha);
  const double kn = kappa(p) * thermal_occupation(p);

  InhomogeneityBudget b{};
  b.t_opt = t0;
  b.error = err;
  b.delta_lambda = delta_lambda;
  b.sigma_dphi_sq = sigma_dphi_sq_exact(p, delta_lambda, t0);
  b.delta_g = 2.0 * sqrt2 * delta_lambda * t0 / (pi * sigma0);

  const double log_term = -2.0 * std::log1p(-2.0 * err); // ln 1/(1-2E)^2
  b.dl_max_phi = kn > 0.0
      ? std::sqrt(3.0 * pi * pi * log_term / (16.0 * kn * t0 * t0 * t0))
      : std::numeric_limits<double>::infinity();
  b.dl_max_m = (pi / t0) * std::sqrt(6.0 * m.delta_m_sq * err / 2.0);
  const double ag = alpha * g0;
  b.dl_max_disp = (pi * sigma0 * (rp0 + rf0) / (2.0 * sqrt2 * t0)) *
                  std::sqrt(2.0 * std::sqrt(two_pi) * err * std::exp(0.5 * ag * ag) / ag);
  b.dl_max = std::min(b.dl_max_phi, std::min(b.dl_max_m, b.dl_max_disp));
  return b;
}

// Echo-variant protocol run: intermediate measurement at t_I/2, an extra pi
// pulse flipping every drive sign for the second half, and the difference
// statistic Dm = M2 - 2 e^{-kappa t/4} M_int + e^{-kappa t/2} M1.
struct EchoOutcome {
  ProtocolOutcome base;
  double m_int;
  double dfs_phase; // accumulated differential phase (S_z = 0 runs only)
};

/// Expected |Dm| for the parallel sectors under the echo statistic;
/// sets the acceptance window just as mu(2, t) does for the standard run.
inline double echo_displacement_scale(const SystemParams& p, double t) {
  return std::abs(momentum_shift(p, 2, 0.5 * t)) *
         (1.0 + std::exp(-0.25 * kappa(p) * t));
}

inline EchoOutcome run_echo_protocol(const SystemParams& p, const MeasurementParams& m,
                                     const ProtocolConfig& cfg, double delta_lambda,
                                     Rng& rng, int n_substeps = 128) {
  validate(cfg);
  if (cfg.variant != ProtocolVariant::echo_three_measurement)
    throw std::invalid_argument("run_echo_protocol: config variant must be echo-three-measurement");
  const double t = cfg.t_interact;
  const double dm = std::sqrt(m.delta_m_sq);
  const double n = thermal_occupation(p);
  const double k = kappa(p);

  EchoOutcome out{};
  out.base.s_z_true = sample_spin_sector(rng);
  // DFS sub-sector: which of |01>, |10> carries the differential force.
  const double dfs_sign = (out.base.s_z_true == 0 && rng.uniform() < 0.5) ? -1.0 : 1.0;

  PhasePoint pt{rng.gaussian(0.0, std::sqrt(n)), rng.gaussian(0.0, std::sqrt(n))};
  out.base.m1 = pt.p + rng.gaussian(0.0, dm);

  const double h = 0.5 * t / static_cast<double>(n_substeps);
  const double phase_rate = 8.0 * delta_lambda / pi;
  double phi = 0.0;
  auto evolve_half = [&](double drive_sign) {
    for (int i = 0; i < n_substeps; ++i) {
      const double x_before = pt.x;
      if (out.base.s_z_true == 0) {
        pt = transition_sample(pt, p, 0, h, rng, cfg.pulse_phase);
        // differential force enters like a spin with coupling dl and the
        // echo-flipped sign
        const auto fd = detail::rotating_frame_force(delta_lambda,
                                                     dfs_sign * drive_sign,
                                                     cfg.pulse_phase);
        const double drive_integral = h * one_minus_exp_over(0.5 * k * h);
        pt.x += fd.fx * drive_integral;
        pt.p += fd.fp * drive_integral;
        phi += phase_rate * drive_sign * 0.5 * (x_before + pt.x) * h;
      } else {
        pt = transition_sample(pt, p, static_cast<int>(drive_sign) * out.base.s_z_true,
                               h, rng, cfg.pulse_phase);
      }
    }
  };

  evolve_half(+1.0);
  out.m_int = pt.p + rng.gaussian(0.0, dm);
  evolve_half(-1.0);
  out.base.m2 = pt.p + rng.gaussian(0.0, dm);
  out.base.x_final = pt.x;
  out.dfs_phase = phi;

  const double e_half = std::exp(-0.25 * k * t);
  out.base.delta_m_stat =
      out.base.m2 - 2.0 * e_half * out.m_int + e_half * e_half * out.base.m1;
  const double threshold = cfg.alpha * echo_displacement_scale(p, t) / 2.0;
  out.base.accepted = std::abs(out.base.delta_m_stat) < threshold;

  out.base.dephased = false;
  if (out.base.accepted && out.base.s_z_true == 0) {
    const double flip_prob = 0.5 * (-std::expm1(-2.0 * p.gamma * t));
    out.base.dephased = rng.uniform() < flip_prob;
  }
  return out;
}

inline MonteCarloSummary monte_carlo_echo(const SystemParams& p, const MeasurementParams& m,
                                          const ProtocolConfig& cfg, double delta_lambda,
                                          uint64_t n_runs, uint64_t seed,
                                          int n_substeps = 128) {
  if (n_runs < 1) throw std::invalid_argument("monte_carlo_echo: n_runs must be >= 1");
  OutcomeAccumulator acc;
  for (uint64_t i = 0; i < n_runs; ++i) {
    Rng rng = Rng::stream(seed, i);
    acc.add(run_echo_protocol(p, m, cfg, delta_lambda, rng, n_substeps).base);
  }
  return acc.summary();
}

/// Ensemble statistics of the echoed DFS phase integral alone.  x~ starts at
/// zero: the echo cancels the quasi-static initial offset, and the closed
/// form sigma_dphi_sq_exact counts only the noise injected during the
/// sequence.  thermal_start = true keeps the thermal initial offset instead.
inline RunningStats sample_echo_phase(const SystemParams& p, double delta_lambda,
                                      double t, uint64_t n_runs, uint64_t seed,
                                      int n_substeps = 256, bool thermal_start = false) {
  if (n_substeps % 2 != 0) ++n_substeps; // the sign flip needs an even grid
  const double k = kappa(p);
  const double n = thermal_occupation(p);
  const double h = t / static_cast<double>(n_substeps);
  const double decay = std::exp(-0.5 * k * h);
  const double kick_sd = std::sqrt(n * (-std::expm1(-k * h)));
  const double phase_rate = 8.0 * delta_lambda / pi;

  RunningStats stats;
  for (uint64_t run = 0; run < n_runs; ++run) {
    Rng rng = Rng::stream(seed, run);
    double x = thermal_start ? rng.gaussian(0.0, std::sqrt(n)) : 0.0;
    double phi = 0.0;
    for (int i = 0; i < n_substeps; ++i) {
      const double sign = (i < n_substeps / 2) ? 1.0 : -1.0;
      const double x_before = x;
      x = x * decay + rng.gaussian(0.0, kick_sd);
      phi += phase_rate * sign * 0.5 * (x_before + x) * h;
    }
    stats.add(phi);
  }
  return stats;
}

} // namespace spinbus
