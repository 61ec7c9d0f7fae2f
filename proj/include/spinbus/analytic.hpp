#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "spinbus/numeric.hpp"
#include "spinbus/params.hpp"

namespace spinbus {

// Acceptance-threshold parameter. The alpha -> 0 limit is represented
// symbolically so the success probability never evaluates 0/0.
class Threshold {
 public:
  static Threshold value(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw std::invalid_argument("Threshold: alpha must be in (0, 1]");
    return Threshold(alpha);
  }
  static Threshold small_alpha_limit() { return Threshold(); }

  bool is_limit() const { return !alpha_.has_value(); }
  double alpha() const {
    if (is_limit()) throw std::logic_error("Threshold: alpha -> 0 has no numeric value");
    return *alpha_;
  }

 private:
  Threshold() = default;
  explicit Threshold(double a) : alpha_(a) {}
  std::optional<double> alpha_;
};

struct UndefinedAcceptanceError : std::domain_error {
  UndefinedAcceptanceError()
      : std::domain_error("acceptance probability is zero; success undefined") {}
};

/// Spin-conditional momentum shift mu(S_z, t) = -4 sqrt2 lambda S_z
/// (1 - e^{-kappa t/2}) / (pi kappa), in rotating-frame quadrature units.
inline double momentum_shift(const SystemParams& p, int s_z, double t) {
  if (t < 0.0) throw std::invalid_argument("momentum_shift: t must be >= 0");
  const double k = kappa(p);
  // (1 - e^{-kt/2})/k = (t/2) * one_minus_exp_over(kt/2), finite for k -> 0.
  const double decay_integral = 0.5 * t * one_minus_exp_over(0.5 * k * t);
  return -2.0 * sqrt2 * p.lambda_coupling * static_cast<double>(s_z) * 2.0 *
         decay_integral / pi;
}

/// Variance of the measurement-difference statistic,
/// sigma(t)^2 = dm^2 (1 + e^{-kappa t}) + n_th (1 - e^{-kappa t}).
inline double difference_variance(const SystemParams& p, const MeasurementParams& m,
                                  double t) {
  if (t < 0.0) throw std::invalid_argument("difference_variance: t must be >= 0");
  const double u = kappa(p) * t;
  return m.delta_m_sq * (1.0 + std::exp(-u)) +
         thermal_occupation(p) * (-std::expm1(-u));
}

/// Normalized displacement g(t) = |mu(2, t)| / (2 sigma(t)).
inline double normalized_displacement(const SystemParams& p,
                                      const MeasurementParams& m, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("normalized_displacement: t must be > 0");
  return std::abs(momentum_shift(p, 2, t)) /
         (2.0 * std::sqrt(difference_variance(p, m, t)));
}

/// Linearized form g^2 = (8/pi^2) C Gamma t (valid for kappa t << 1 and
/// dm^2 << kappa n_th t).
inline double normalized_displacement_linearized(const SystemParams& p, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("normalized_displacement_linearized: t must be > 0");
  const double g_sq = (8.0 / (pi * pi)) * cooperativity(p) * p.gamma * t;
  return std::sqrt(g_sq);
}

namespace detail {

// Integral of the two S_z = +-2 Gaussians over the acceptance window,
// r_f = 1/4 [Erfc((2-a)g/sqrt2) - Erfc((2+a)g/sqrt2)].  The difference is
// evaluated through erf when both arguments are small, where erfc would
// cancel catastrophically.
inline double erfc_difference(double lo, double hi) {
  if (lo < 0.7 && hi < 0.7) return std::erf(hi) - std::erf(lo);
  return std::erfc(lo) - std::erfc(hi);
}

} // namespace detail

/// False-positive probability per attempt.
inline double false_positive_rate(double g, double alpha) {
  if (!(g >= 0.0)) throw std::invalid_argument("false_positive_rate: g must be >= 0");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("false_positive_rate: alpha must be in (0, 1]");
  const double lo = (2.0 - alpha) * g / sqrt2;
  const double hi = (2.0 + alpha) * g / sqrt2;
  return 0.25 * detail::erfc_difference(lo, hi);
}

/// Upper bound r_f <= 1/4 e^{-(2-alpha)^2 g^2 / 2}.
inline double false_positive_bound(double g, double alpha) {
  const double x = (2.0 - alpha) * g;
  return 0.25 * std::exp(-0.5 * x * x);
}

/// True-positive probability per attempt, r_p = 1/2 Erf(alpha g / sqrt2).
inline double true_positive_rate(double g, double alpha) {
  if (!(g >= 0.0)) throw std::invalid_argument("true_positive_rate: g must be >= 0");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("true_positive_rate: alpha must be in (0, 1]");
  return 0.5 * std::erf(alpha * g / sqrt2);
}

/// Total acceptance probability per attempt.
inline double acceptance_rate(double g, double alpha) {
  return true_positive_rate(g, alpha) + false_positive_rate(g, alpha);
}

/// Success probability S = r_p / (r_p + r_f); in the alpha -> 0 limit
/// S = 1 / (1 + e^{-2 g^2}) exactly.
inline double success_probability(double g, const Threshold& th) {
  if (!(g >= 0.0)) throw std::invalid_argument("success_probability: g must be >= 0");
  if (th.is_limit()) return 1.0 / (1.0 + std::exp(-2.0 * g * g));
  const double rp = true_positive_rate(g, th.alpha());
  const double rf = false_positive_rate(g, th.alpha());
  if (rp + rf <= 0.0) throw UndefinedAcceptanceError();
  return rp / (rp + rf);
}

/// Coherence factor (1 + e^{-2 Gamma t}) / 2 of the heralded pair.
inline double coherence_factor(const SystemParams& p, double t) {
  return 0.5 * (1.0 + std::exp(-2.0 * p.gamma * t));
}

/// Entanglement fidelity F = coherence * S(alpha, g(t)).  `linearized g`
/// selects the (8/pi^2) C Gamma t form instead of the exact g.
inline double fidelity(const SystemParams& p, const MeasurementParams& m,
                       double t, const Threshold& th, bool linearized_g = false) {
  const double g = linearized_g ? normalized_displacement_linearized(p, t)
                                : normalized_displacement(p, m, t);
  return coherence_factor(p, t) * success_probability(g, th);
}

inline constexpr double min_cooperativity = 9.8696044010893586188 / 8.0; // pi^2/8

/// Analytic optimal-time approximation
/// Gamma t* = (pi^2 / 16 C) ln(16 C / pi^2 - 1); requires C > pi^2/8.
inline double analytic_optimal_time(const SystemParams& p) {
  const double c = cooperativity(p);
  if (!(c > min_cooperativity))
    throw std::domain_error("analytic_optimal_time: no entanglement possible for C <= pi^2/8");
  const double a = 16.0 * c / (pi * pi);
  return std::log(a - 1.0) / (a * p.gamma);
}

struct OptimalTime {
  double t_opt;     // argmax of F(t) [s]
  double fidelity;  // F(t_opt)
  bool entangling;  // fidelity > 1/2
};

/// Bounded numeric maximization of F(t) over t in (0, min(10/Gamma, 1/kappa)]
/// by golden-section search (relative tolerance 1e-6).  When the analytic
/// approximation is defined it seeds a tighter bracket around itself.
inline OptimalTime optimal_time(const SystemParams& p, const MeasurementParams& m,
                                const Threshold& th, bool linearized_g = false) {
  const double t_hi_window = std::min(10.0 / p.gamma, 1.0 / kappa(p));
  double lo = 1e-12 * t_hi_window;
  double hi = t_hi_window;
  if (cooperativity(p) > min_cooperativity) {
    const double seed = analytic_optimal_time(p);
    lo = std::max(lo, seed / 50.0);
    hi = std::min(hi, seed * 50.0);
    if (!(lo < hi)) { lo = 1e-12 * t_hi_window; hi = t_hi_window; }
  }
  auto objective = [&](double t) { return fidelity(p, m, t, th, linearized_g); };
  const auto peak = golden_section_max(objective, lo, hi, 1e-6);
  return {peak.x, peak.value, peak.value > 0.5};
}

/// Lower bound on the achievable fidelity as a function of C alone
/// (alpha -> 0, dm = 0).  Valid for C > pi^2/8; monotone increasing.
inline double fidelity_lower_bound(double c) {
  if (!(c > min_cooperativity))
    throw std::domain_error("fidelity_lower_bound: requires C > pi^2/8");
  const double b = 16.0 * c / (pi * pi) - 1.0; // in (1, inf) on this domain
  const double p_exp = pi * pi / (8.0 * c);
  // rearranged form of 1/2 (1 + b^{-p}) / (1 + 1/b)
  return 0.5 * (b + std::pow(b, 1.0 - p_exp)) / (b + 1.0);
}

/// Error of the bound, E = 1 - F_bound(C).
inline double bound_error(double c) { return 1.0 - fidelity_lower_bound(c); }

/// Local scaling exponent p(C) = d ln E / d ln C of the bound error,
/// evaluated as the exact closed-form derivative of fidelity_lower_bound;
/// tends to -1 (from above, as -1 + O(1/ln C)) for C -> infinity.
inline double scaling_exponent(double c) {
  if (!(c > min_cooperativity))
    throw std::domain_error("scaling_exponent: requires C > pi^2/8");
  const double a = 8.0 * c / (pi * pi);
  const double b = 2.0 * a - 1.0;
  const double log_b = std::log(b);
  const double u = std::exp(-log_b / a); // b^{-1/a}
  const double v = 1.0 / b;
  const double du = u * (log_b / a - 2.0 / b);  // du / d ln C
  const double dv = -2.0 * a / (b * b);         // dv / d ln C
  const double df = 0.5 * (du * (1.0 + v) - (1.0 + u) * dv) / ((1.0 + v) * (1.0 + v));
  const double err = 1.0 - 0.5 * (1.0 + u) / (1.0 + v);
  return -df / err;
}

/// Two-term large-C asymptote of the preparation error,
/// E ~ (pi^2/16) ln C / C + (pi^2 (1 + ln(16/pi^2)) / 16) / C.
inline double asymptotic_error(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("asymptotic_error: C must be > 0");
  const double lead = (pi * pi / 16.0) * std::log(c) / c;
  const double sub = (pi * pi * (1.0 + std::log(16.0 / (pi * pi))) / 16.0) / c;
  return lead + sub;
}

struct HotGateReference {
  double error;          // ~ 1.2 / sqrt(C)
  double omega_r_opt;    // optimal resonator frequency [rad/s]
};

/// Deterministic hot-gate comparison curve: error 1.2/sqrt(C) at the optimal
/// frequency omega_opt = lambda sqrt((kappa n_th / Gamma)(alpha_k/alpha_T))
/// with alpha_k = 4, alpha_T = 0.1.
inline HotGateReference hot_gate_reference(const SystemParams& p) {
  const double c = cooperativity(p);
  if (!(c > 0.0)) throw std::invalid_argument("hot_gate_reference: C must be > 0");
  constexpr double alpha_k = 4.0;
  constexpr double alpha_t = 0.1;
  const double omega_opt = p.lambda_coupling *
      std::sqrt(kappa(p) * thermal_occupation(p) / p.gamma * (alpha_k / alpha_t));
  return {1.2 / std::sqrt(c), omega_opt};
}

inline double hot_gate_error(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("hot_gate_error: C must be > 0");
  return 1.2 / std::sqrt(c);
}

// All closed-form outputs for one parameter set at the optimal time.
struct AnalyticReport {
  double c;
  double t_opt;
  double fidelity;
  double error;
  double rate_tp;
  double rate_fp;
  double g_value;
  double sigma_sq;
};

inline AnalyticReport analytic_report(const SystemParams& p, const MeasurementParams& m,
                                      const Threshold& th) {
  AnalyticReport r;
  r.c = cooperativity(p);
  const auto peak = optimal_time(p, m, th);
  r.t_opt = peak.t_opt;
  r.fidelity = peak.fidelity;
  r.error = 1.0 - r.fidelity;
  r.g_value = normalized_displacement(p, m, r.t_opt);
  r.sigma_sq = difference_variance(p, m, r.t_opt);
  if (th.is_limit()) {
    // Limit forms: r_p -> 0 per attempt while S stays finite.
    r.rate_tp = 0.0;
    r.rate_fp = 0.0;
  } else {
    r.rate_tp = true_positive_rate(r.g_value, th.alpha());
    r.rate_fp = false_positive_rate(r.g_value, th.alpha());
  }
  return r;
}

} // namespace spinbus
