#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "spinbus/params.hpp"
#include "spinbus/rng.hpp"

namespace spinbus {

// Continuous-time model of the interferometrically monitored resonator in
// momentum-scaled lab-frame coordinates X = (m omega_r x, p):
//   dX = F X dt + L w dt,   <w w'> = q_c delta,   z = H X + n,  <n n'> = r delta.
// phonon_unit converts covariance entries to phonon-number units (the
// convention in which the closed-form dm^2 below is exact).
struct FilterModel {
  Eigen::Matrix2d F;
  Eigen::Vector2d L;
  double q_c;                 // process noise intensity, 2 D
  Eigen::RowVector2d H;
  double r_noise;             // measurement noise intensity (photon flux)
  double phonon_unit;         // hbar m omega_r / 2
};

inline FilterModel make_filter_model(const SystemParams& p, const MeasurementParams& m) {
  validate(p);
  validate(m);
  FilterModel f;
  const double k = kappa(p);
  f.F << 0.0, p.omega_r, -p.omega_r, -k;
  f.L << 0.0, 1.0;
  f.q_c = 2.0 * diffusion_constant(p);
  f.H << 0.0, two_pi * m.photon_flux / (p.mass * p.omega_r * m.laser_wavelength);
  // zero flux means no measurement channel at all; the update is skipped on
  // an all-zero H, so r_noise only needs to stay positive
  f.r_noise = m.photon_flux > 0.0 ? m.photon_flux : 1.0;
  f.phonon_unit = 0.5 * hbar * p.mass * p.omega_r;
  return f;
}

/// Same model with the measurement switched off (H = 0); the Riccati solution
/// then reduces to the thermal Lyapunov fixed point.
inline FilterModel without_measurement(FilterModel f) {
  f.H.setZero();
  return f;
}

namespace detail {

inline Eigen::Matrix2d symmetrize(const Eigen::Matrix2d& a) {
  return 0.5 * (a + a.transpose());
}

inline double care_residual(const FilterModel& f, const Eigen::Matrix2d& p) {
  const Eigen::Matrix2d n = f.L * f.q_c * f.L.transpose();
  const Eigen::Matrix2d m = f.H.transpose() * f.H / f.r_noise;
  const Eigen::Matrix2d r =
      f.F * p + p * f.F.transpose() + n - p * m * p;
  return r.norm();
}

// Size of the individual equation terms; the residual tolerance scales with
// this (the terms cancel to machine precision, which can be many orders
// below ||P|| itself).
inline double care_term_scale(const FilterModel& f, const Eigen::Matrix2d& p) {
  const Eigen::Matrix2d n = f.L * f.q_c * f.L.transpose();
  const Eigen::Matrix2d m = f.H.transpose() * f.H / f.r_noise;
  return 2.0 * (f.F * p).norm() + n.norm() + (p * m * p).norm();
}

// Direct algebraic solution for the model family used here:
// F = [[0, w], [-w, -k]], process noise on the momentum row only and a
// momentum-only measurement.  The three scalar equations collapse to
//   P12 = 0,  P11 = P22,  m22 P22^2 + 2 k P22 - q = 0.
inline bool care_structured(const FilterModel& f, Eigen::Matrix2d& out) {
  const double w = f.F(0, 1);
  const double k = -f.F(1, 1);
  const bool structure_ok = f.F(0, 0) == 0.0 && f.F(1, 0) == -w &&
                            f.L(0) == 0.0 && f.L(1) == 1.0 &&
                            f.H(0) == 0.0 && w != 0.0 && k >= 0.0;
  if (!structure_ok) return false;
  const double q = f.q_c;
  const double m22 = f.H(1) * f.H(1) / f.r_noise;
  double p22;
  if (m22 > 0.0) {
    p22 = q / (k + std::sqrt(k * k + m22 * q)); // stable root of the quadratic
  } else {
    if (!(k > 0.0)) return false;
    p22 = 0.5 * q / k;
  }
  out << p22, 0.0, 0.0, p22;
  return true;
}

// Matrix-sign (Newton doubling) iteration on the 4x4 Hamiltonian; generic
// fallback when the structured elimination does not apply.
inline bool care_sign_iteration(const FilterModel& f, Eigen::Matrix2d& out) {
  using Mat4 = Eigen::Matrix4d;
  const Eigen::Matrix2d n = f.L * f.q_c * f.L.transpose();
  const Eigen::Matrix2d m = f.H.transpose() * f.H / f.r_noise;
  Mat4 z;
  z.topLeftCorner<2, 2>() = f.F.transpose();
  z.topRightCorner<2, 2>() = -m;
  z.bottomLeftCorner<2, 2>() = -n;
  z.bottomRightCorner<2, 2>() = -f.F;
  for (int it = 0; it < 100; ++it) {
    const double d = std::abs(z.determinant());
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double scale = std::pow(d, -0.25);
    const Mat4 zs = scale * z;
    const Mat4 next = 0.5 * (zs + zs.inverse());
    if ((next - z).norm() <= 1e-14 * next.norm()) {
      z = next;
      break;
    }
    z = next;
  }
  // Stable subspace [I; P]: (S11 + I) + S12 P = 0.
  const Eigen::Matrix2d s11 = z.topLeftCorner<2, 2>();
  const Eigen::Matrix2d s12 = z.topRightCorner<2, 2>();
  const Eigen::Matrix2d rhs = -(s11 + Eigen::Matrix2d::Identity());
  const Eigen::FullPivLU<Eigen::Matrix2d> lu(s12);
  if (!lu.isInvertible()) return false;
  out = symmetrize(lu.solve(rhs));
  return true;
}

} // namespace detail

/// Steady-state filter covariance: the PSD solution of
/// 0 = F P + P F' + L q_c L' - P H' r^{-1} H P, with residual checked to
/// 1e-10 of the equation-term scale.  Lab-frame momentum-scaled units;
/// divide by phonon_unit for phonon-number units.
inline Eigen::Matrix2d riccati_steady_state(const FilterModel& f) {
  Eigen::Matrix2d p;
  const double tol = 1e-10;
  if (detail::care_structured(f, p) &&
      detail::care_residual(f, p) <= tol * detail::care_term_scale(f, p))
    return p;
  if (detail::care_sign_iteration(f, p) &&
      detail::care_residual(f, p) <= tol * detail::care_term_scale(f, p) &&
      p(0, 0) >= 0.0 && p.determinant() >= -tol * p.norm() * p.norm()) {
    return p;
  }
  char msg[128];
  std::snprintf(msg, sizeof(msg),
                "riccati_steady_state: no solution within tolerance "
                "(residual %.3e, scale %.3e)",
                detail::care_residual(f, p), detail::care_term_scale(f, p));
  throw std::runtime_error(msg);
}

/// Exact unexpanded root for the steady-state measurement variance in
/// phonon units.
inline double delta_m_sq_exact(const SystemParams& p, const MeasurementParams& m) {
  const double k = kappa(p);
  const double n = classical_occupation(p);
  const double r = m.photon_flux;
  const double scale = m.laser_wavelength / (two_pi * p.zp);
  const double b = 4.0 * r * k * n / (scale * scale);
  return scale * scale / r * (std::sqrt(k * k + b) - k);
}

/// n_th-dominant expansion dm^2 ~ 2 (lambda_l / 2 pi z_p) sqrt(kappa n_th / R).
inline double delta_m_sq_closed_form(const SystemParams& p, const MeasurementParams& m) {
  const double scale = m.laser_wavelength / (two_pi * p.zp);
  return 2.0 * scale * std::sqrt(kappa(p) * classical_occupation(p) / m.photon_flux);
}

struct FilterState {
  double t;
  Eigen::Vector2d x_hat;
  Eigen::Matrix2d p_cov;
};

namespace detail {

struct Discretization {
  Eigen::Matrix2d f_d; // state transition over dt
  Eigen::Matrix2d q_d; // accumulated process noise over dt
};

// Van Loan construction: exact discrete (F_d, Q_d) from the continuous pair,
// immune to the omega_r stiffness a naive Euler discretization would have.
inline Discretization discretize(const FilterModel& f, double dt) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  const Eigen::Matrix2d q = f.L * f.q_c * f.L.transpose();
  m.topLeftCorner<2, 2>() = -f.F * dt;
  m.topRightCorner<2, 2>() = q * dt;
  m.bottomRightCorner<2, 2>() = f.F.transpose() * dt;
  const Eigen::Matrix4d e = m.exp();
  Discretization d;
  d.f_d = e.bottomRightCorner<2, 2>().transpose();
  d.q_d = symmetrize(d.f_d * e.topRightCorner<2, 2>());
  return d;
}

} // namespace detail

/// Discretized continuous Kalman filter run incrementally: exact
/// matrix-exponential prediction per step, measurement update with
/// R_d = r_noise / dt (Joseph form).  Throws on covariance blow-up.
class KalmanFilter {
 public:
  KalmanFilter(const FilterModel& model, double dt, const Eigen::Vector2d& x0,
               const Eigen::Matrix2d& p0)
      : h_(model.H), r_d_(model.r_noise / dt), dt_(dt), x_(x0), p_(p0),
        blowup_(1e12 * (p0.trace() + 1.0)) {
    if (!(dt > 0.0)) throw std::invalid_argument("KalmanFilter: dt must be > 0");
    const auto d = detail::discretize(model, dt);
    f_d_ = d.f_d;
    q_d_ = d.q_d;
  }

  void step(double z) {
    x_ = f_d_ * x_;
    p_ = detail::symmetrize(f_d_ * p_ * f_d_.transpose() + q_d_);
    if (!h_.isZero(0.0)) {
      const double s = (h_ * p_ * h_.transpose())(0) + r_d_;
      const Eigen::Vector2d k_gain = p_ * h_.transpose() / s;
      x_ += k_gain * (z - (h_ * x_)(0));
      const Eigen::Matrix2d ikh = Eigen::Matrix2d::Identity() - k_gain * h_;
      p_ = detail::symmetrize(ikh * p_ * ikh.transpose() +
                              k_gain * r_d_ * k_gain.transpose());
    }
    t_ += dt_;
    if (!p_.allFinite() || p_.trace() > blowup_)
      throw std::runtime_error("KalmanFilter: covariance diverged at t = " +
                               std::to_string(t_));
  }

  double time() const { return t_; }
  const Eigen::Vector2d& state() const { return x_; }
  const Eigen::Matrix2d& covariance() const { return p_; }

 private:
  Eigen::Matrix2d f_d_, q_d_;
  Eigen::RowVector2d h_;
  double r_d_;
  double dt_;
  double t_ = 0.0;
  Eigen::Vector2d x_;
  Eigen::Matrix2d p_;
  double blowup_;
};

inline std::vector<FilterState> run_filter(const FilterModel& model,
                                           const std::vector<double>& record,
                                           double dt,
                                           const Eigen::Vector2d& x0,
                                           const Eigen::Matrix2d& p0) {
  KalmanFilter filter(model, dt, x0, p0);
  std::vector<FilterState> states;
  states.reserve(record.size());
  for (const double z : record) {
    filter.step(z);
    states.push_back({filter.time(), filter.state(), filter.covariance()});
  }
  return states;
}

/// Exact sampling of the truth process X_{k+1} = F_d X_k + w_k plus the
/// matching discrete shot-noise measurements; used to exercise the filter.
class TruthSimulator {
 public:
  struct Sample {
    Eigen::Vector2d x;
    double z;
  };

  TruthSimulator(const FilterModel& model, double dt, const Eigen::Vector2d& x0)
      : h_(model.H), meas_sd_(std::sqrt(model.r_noise / dt)), x_(x0) {
    const auto d = detail::discretize(model, dt);
    f_d_ = d.f_d;
    const Eigen::LLT<Eigen::Matrix2d> llt(d.q_d +
                                          1e-300 * Eigen::Matrix2d::Identity());
    chol_ = llt.matrixL();
  }

  Sample step(Rng& rng) {
    const Eigen::Vector2d w(rng.gaussian(), rng.gaussian());
    x_ = f_d_ * x_ + chol_ * w;
    return {x_, (h_ * x_)(0) + rng.gaussian(0.0, meas_sd_)};
  }

  const Eigen::Vector2d& state() const { return x_; }

 private:
  Eigen::Matrix2d f_d_, chol_;
  Eigen::RowVector2d h_;
  double meas_sd_;
  Eigen::Vector2d x_;
};

struct TruthRecord {
  std::vector<double> t;
  std::vector<Eigen::Vector2d> x;
  std::vector<double> z;
};

inline TruthRecord simulate_truth(const FilterModel& model, std::size_t n_steps,
                                  double dt, const Eigen::Vector2d& x0, Rng& rng) {
  TruthSimulator sim(model, dt, x0);
  TruthRecord rec;
  rec.t.reserve(n_steps);
  rec.x.reserve(n_steps);
  rec.z.reserve(n_steps);
  for (std::size_t i = 1; i <= n_steps; ++i) {
    const auto s = sim.step(rng);
    rec.t.push_back(static_cast<double>(i) * dt);
    rec.x.push_back(s.x);
    rec.z.push_back(s.z);
  }
  return rec;
}

/// Relaxation rate of the steady-state filter (its error correlation decays
/// at roughly this rate); from a thermal start the covariance needs a few
/// of these times to localize.
inline double filter_localization_rate(const FilterModel& model) {
  const Eigen::Matrix2d pss = riccati_steady_state(model);
  const double m22 = (model.H * model.H.transpose())(0) / model.r_noise;
  return m22 * pss(1, 1);
}

// Shot-noise budget of a finite-duration position measurement.
struct ShotNoiseBudget {
  double dm_imp_sq;  // imprecision term
  double dm_th_sq;   // thermal diffusion term
  double dm_tot_sq;
  double tau_opt;    // duration minimizing the total
  double dm_opt_sq;  // total at tau_opt
};

inline ShotNoiseBudget shot_noise_budget(const SystemParams& p, const MeasurementParams& m,
                                         double tau_m) {
  if (!(tau_m > 0.0)) throw std::invalid_argument("shot_noise_budget: tau_m must be > 0");
  const double scale = m.laser_wavelength / (two_pi * p.zp);
  const double kn = kappa(p) * classical_occupation(p);
  ShotNoiseBudget b;
  b.dm_imp_sq = scale * scale / (m.photon_flux * tau_m);
  b.dm_th_sq = kn * tau_m;
  b.dm_tot_sq = b.dm_imp_sq + b.dm_th_sq;
  b.tau_opt = scale / std::sqrt(m.photon_flux * classical_occupation(p) * kappa(p));
  b.dm_opt_sq = 2.0 * scale * std::sqrt(kn / m.photon_flux);
  return b;
}

/// Shortest interaction time for which diffusion dominates the measurement
/// uncertainty; callers should stay a factor ~10 above it.
inline double min_interaction_time(const SystemParams& p, const MeasurementParams& m) {
  const double scale = m.laser_wavelength / (pi * p.zp);
  return scale / std::sqrt(kappa(p) * m.photon_flux * classical_occupation(p));
}

/// True when the no-backaction treatment is self-consistent (dm^2 >> 1).
inline bool backaction_negligible(double delta_m_sq) { return delta_m_sq >= 1.0; }

} // namespace spinbus
