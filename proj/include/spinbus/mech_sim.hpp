#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "spinbus/analytic.hpp"
#include "spinbus/params.hpp"
#include "spinbus/rng.hpp"
#include "spinbus/stats.hpp"

namespace spinbus {

// Rotating-frame resonator state in dimensionless quadrature units; the
// thermal state has mean (0, 0) and covariance n_th * I.
struct GaussianState {
  double mean_x = 0.0;
  double mean_p = 0.0;
  double cov_xx = 0.0;
  double cov_xp = 0.0;
  double cov_pp = 0.0;
};

inline GaussianState thermal_state(const SystemParams& p) {
  const double n = thermal_occupation(p);
  return {0.0, 0.0, n, 0.0, n};
}

namespace detail {

// Constant rotating-frame force on (x~, p~) for spin sector s_z and toggling
// phase phi.  phi = pi/2 puts the full drive on the momentum quadrature with
// the sign of mu(S_z, t); the lab-frame demodulation below uses the same
// convention.
struct DriveForce {
  double fx;
  double fp;
};

inline DriveForce rotating_frame_force(double lambda_coupling, double s_z, double phase) {
  const double f = 2.0 * sqrt2 * lambda_coupling * s_z / pi;
  return {f * std::cos(phase), -f * std::sin(phase)};
}

} // namespace detail

/// Exact Gaussian transition of the damped, driven rotating-frame mode over
/// dt: means decay by e^{-kappa dt/2} and pick up the drive integral, the
/// covariance relaxes toward n_th * I.  No discretization error.
inline GaussianState evolve_exact(const GaussianState& s, const SystemParams& p,
                                  int s_z, double dt, double phase = pi / 2.0) {
  if (dt < 0.0) throw std::invalid_argument("evolve_exact: dt must be >= 0");
  const double k = kappa(p);
  const double decay = std::exp(-0.5 * k * dt);
  const double drive_integral = dt * one_minus_exp_over(0.5 * k * dt);
  const auto f = detail::rotating_frame_force(p.lambda_coupling, s_z, phase);
  GaussianState out;
  out.mean_x = s.mean_x * decay + f.fx * drive_integral;
  out.mean_p = s.mean_p * decay + f.fp * drive_integral;
  const double relax = -std::expm1(-k * dt); // 1 - e^{-kappa dt}
  const double n = thermal_occupation(p);
  out.cov_xx = s.cov_xx * (1.0 - relax) + n * relax;
  out.cov_pp = s.cov_pp * (1.0 - relax) + n * relax;
  out.cov_xp = s.cov_xp * (1.0 - relax);
  return out;
}

struct PhasePoint {
  double x;
  double p;
};

/// One exact stochastic transition of a phase-space point (the Gaussian
/// kernel realized with a random kick), used by the protocol executor.
inline PhasePoint transition_sample(const PhasePoint& pt, const SystemParams& p,
                                    int s_z, double dt, Rng& rng,
                                    double phase = pi / 2.0) {
  const double k = kappa(p);
  const double decay = std::exp(-0.5 * k * dt);
  const double drive_integral = dt * one_minus_exp_over(0.5 * k * dt);
  const auto f = detail::rotating_frame_force(p.lambda_coupling, s_z, phase);
  const double kick_var = thermal_occupation(p) * (-std::expm1(-k * dt));
  const double kick_sd = std::sqrt(kick_var);
  return {pt.x * decay + f.fx * drive_integral + rng.gaussian(0.0, kick_sd),
          pt.p * decay + f.fp * drive_integral + rng.gaussian(0.0, kick_sd)};
}

struct TrajectoryRecord {
  std::vector<double> time;
  std::vector<double> x;
  std::vector<double> p;
  std::vector<int8_t> drive_sign;
};

/// Euler-Maruyama path of the rotating-frame Langevin equations with
/// per-step kicks of variance kappa n_th dt per quadrature.  Refuses grids
/// coarser than dt <= 0.01/kappa and dt <= t_I/100.
inline TrajectoryRecord sample_trajectory(const SystemParams& p, int s_z, double t_total,
                                          double dt, uint64_t seed,
                                          double phase = pi / 2.0) {
  if (!(t_total > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("sample_trajectory: t and dt must be > 0");
  const double k = kappa(p);
  if (k > 0.0 && dt > 0.01 / k)
    throw std::invalid_argument("sample_trajectory: dt too coarse (need dt <= 0.01/kappa)");
  if (dt > t_total / 100.0)
    throw std::invalid_argument("sample_trajectory: dt too coarse (need dt <= t/100)");

  const auto n_steps = static_cast<std::size_t>(std::ceil(t_total / dt - 1e-9));
  const double h = t_total / static_cast<double>(n_steps);
  const auto f = detail::rotating_frame_force(p.lambda_coupling, s_z, phase);
  const double kick_sd = std::sqrt(kappa(p) * thermal_occupation(p) * h);

  Rng rng = Rng::stream(seed, 0);
  TrajectoryRecord rec;
  rec.time.reserve(n_steps + 1);
  rec.x.reserve(n_steps + 1);
  rec.p.reserve(n_steps + 1);
  rec.drive_sign.reserve(n_steps + 1);

  double x = 0.0, pq = 0.0;
  rec.time.push_back(0.0);
  rec.x.push_back(x);
  rec.p.push_back(pq);
  rec.drive_sign.push_back(1);
  for (std::size_t i = 1; i <= n_steps; ++i) {
    x += (-0.5 * k * x + f.fx) * h + rng.gaussian(0.0, kick_sd);
    pq += (-0.5 * k * pq + f.fp) * h + rng.gaussian(0.0, kick_sd);
    rec.time.push_back(static_cast<double>(i) * h);
    rec.x.push_back(x);
    rec.p.push_back(pq);
    rec.drive_sign.push_back(1);
  }
  return rec;
}

/// Full lab-frame integration of the harmonic mode under the +-1 square-wave
/// spin drive (pi pulses every half period), demodulated back into the
/// rotating frame.  Validates the 2/pi rotating-wave reduction.
/// The oscillation is advanced by its exact rotation each step; damping,
/// force impulse and thermal kick are applied first order in dt.
inline TrajectoryRecord simulate_labframe_squarewave(const SystemParams& p, int s_z,
                                                     double t_total, double dt,
                                                     uint64_t seed, double phase) {
  if (!(t_total > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("simulate_labframe_squarewave: t and dt must be > 0");
  const double period = two_pi / p.omega_r;
  if (dt > 0.01 * period)
    throw std::invalid_argument(
        "simulate_labframe_squarewave: dt too coarse (need dt <= 0.01 * 2pi/omega_r)");

  const auto n_steps = static_cast<std::size_t>(std::ceil(t_total / dt - 1e-9));
  const double h = t_total / static_cast<double>(n_steps);
  const double w = p.omega_r;
  const double k = kappa(p);
  const double cw = std::cos(w * h), sw = std::sin(w * h);
  const double damp = std::exp(-k * h);
  const double kick_sd = std::sqrt(2.0 * k * thermal_occupation(p) * h);
  const double f0 = sqrt2 * p.lambda_coupling * static_cast<double>(s_z);

  Rng rng = Rng::stream(seed, 0);
  TrajectoryRecord rec;
  rec.time.reserve(n_steps + 1);
  rec.x.reserve(n_steps + 1);
  rec.p.reserve(n_steps + 1);
  rec.drive_sign.reserve(n_steps + 1);

  double x = 0.0, pq = 0.0; // lab frame
  auto record = [&](double t) {
    const double c = std::cos(w * t), s = std::sin(w * t);
    rec.time.push_back(t);
    rec.x.push_back(x * c - pq * s);
    rec.p.push_back(pq * c + x * s);
    const double sq = std::sin(w * (t + 0.5 * h) + phase);
    rec.drive_sign.push_back(sq >= 0.0 ? int8_t{1} : int8_t{-1});
  };
  record(0.0);
  for (std::size_t i = 1; i <= n_steps; ++i) {
    const double t_prev = static_cast<double>(i - 1) * h;
    const double t_mid = t_prev + 0.5 * h;
    const double sign = std::sin(w * t_mid + phase) >= 0.0 ? 1.0 : -1.0;
    // exact free rotation
    const double xn = x * cw + pq * sw;
    const double pn = pq * cw - x * sw;
    x = xn;
    pq = pn * damp - f0 * sign * h;
    if (kick_sd > 0.0) pq += rng.gaussian(0.0, kick_sd);
    record(static_cast<double>(i) * h);
  }
  return rec;
}

// One Monte-Carlo run of the M1 -> interaction -> M2 -> threshold protocol.
struct ProtocolOutcome {
  int s_z_true;        // sampled spin sector, prior weights (1/4, 1/2, 1/4)
  double m1;
  double m2;
  double delta_m_stat; // M2 - e^{-kappa t/2} M1
  bool accepted;
  bool dephased;       // coherence flip of an accepted S_z = 0 pair
  double x_final;      // rotating-frame x~ at t_I (diagnostic)
};

inline int sample_spin_sector(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.25) return -2;
  if (u < 0.75) return 0;
  return 2;
}

inline ProtocolOutcome run_protocol(const SystemParams& p, const MeasurementParams& m,
                                    const ProtocolConfig& cfg, Rng& rng) {
  validate(cfg);
  const double t = cfg.t_interact;
  const double dm = std::sqrt(m.delta_m_sq);
  const double n = thermal_occupation(p);
  const double sd0 = std::sqrt(n);

  ProtocolOutcome out{};
  out.s_z_true = sample_spin_sector(rng);

  PhasePoint pt{rng.gaussian(0.0, sd0), rng.gaussian(0.0, sd0)};
  out.m1 = pt.p + rng.gaussian(0.0, dm);
  pt = transition_sample(pt, p, out.s_z_true, t, rng, cfg.pulse_phase);
  out.m2 = pt.p + rng.gaussian(0.0, dm);
  out.x_final = pt.x;

  const double retention = std::exp(-0.5 * kappa(p) * t);
  out.delta_m_stat = out.m2 - retention * out.m1;
  const double threshold = cfg.alpha * std::abs(momentum_shift(p, 2, t)) / 2.0;
  out.accepted = std::abs(out.delta_m_stat) < threshold;

  out.dephased = false;
  if (out.accepted && out.s_z_true == 0) {
    const double flip_prob = 0.5 * (-std::expm1(-2.0 * p.gamma * t));
    out.dephased = rng.uniform() < flip_prob;
  }
  return out;
}

inline ProtocolOutcome run_protocol(const SystemParams& p, const MeasurementParams& m,
                                    const ProtocolConfig& cfg, uint64_t seed) {
  Rng rng = Rng::stream(seed, 0);
  return run_protocol(p, m, cfg, rng);
}

struct ProportionEstimate {
  double estimate;
  Interval ci99;
};

struct MonteCarloSummary {
  uint64_t n_runs = 0;
  uint64_t n_accepted = 0;
  uint64_t n_true_positive = 0;     // accepted with S_z = 0
  uint64_t n_false_positive = 0;    // accepted with S_z = +-2
  uint64_t n_dephased = 0;          // accepted true positives that flipped
  ProportionEstimate acceptance;
  ProportionEstimate rate_tp;
  ProportionEstimate rate_fp;
  ProportionEstimate fidelity;      // per accepted run; Psi+ overlap estimator
};

/// Order-independent aggregation, so outcomes may be produced in parallel.
class OutcomeAccumulator {
 public:
  void add(const ProtocolOutcome& o) {
    ++n_;
    if (!o.accepted) return;
    ++accepted_;
    if (o.s_z_true == 0) {
      ++tp_;
      if (o.dephased) ++dephased_;
    } else {
      ++fp_;
    }
  }

  MonteCarloSummary summary() const {
    MonteCarloSummary s;
    s.n_runs = n_;
    s.n_accepted = accepted_;
    s.n_true_positive = tp_;
    s.n_false_positive = fp_;
    s.n_dephased = dephased_;
    auto prop = [](uint64_t k, uint64_t n) {
      ProportionEstimate e;
      e.estimate = n == 0 ? std::nan("") : static_cast<double>(k) / static_cast<double>(n);
      e.ci99 = wilson_interval(k, n);
      return e;
    };
    s.acceptance = prop(accepted_, n_);
    s.rate_tp = prop(tp_, n_);
    s.rate_fp = prop(fp_, n_);
    // A dephased pair is projected onto the orthogonal Bell state, so only
    // unflipped true positives count toward the Psi+ population.
    s.fidelity = prop(tp_ - dephased_, accepted_);
    return s;
  }

 private:
  uint64_t n_ = 0, accepted_ = 0, tp_ = 0, fp_ = 0, dephased_ = 0;
};

/// n_runs independent protocol executions with per-run RNG streams derived
/// from (seed, run index); identical seeds give identical summaries.
inline MonteCarloSummary monte_carlo(const SystemParams& p, const MeasurementParams& m,
                                     const ProtocolConfig& cfg, uint64_t n_runs,
                                     uint64_t seed) {
  if (n_runs < 1) throw std::invalid_argument("monte_carlo: n_runs must be >= 1");
  OutcomeAccumulator acc;
  for (uint64_t i = 0; i < n_runs; ++i) {
    Rng rng = Rng::stream(seed, i);
    acc.add(run_protocol(p, m, cfg, rng));
  }
  return acc.summary();
}

} // namespace spinbus
