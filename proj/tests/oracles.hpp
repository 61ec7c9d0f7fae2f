#pragma once

// Test-only reference implementations, independent of the library code paths
// they check: Gaussian window integrals by adaptive quadrature instead of
// erf/erfc, and a discrete double-sum for the echoed Ornstein-Uhlenbeck
// phase variance.

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracles {

inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb,
                                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  if (depth <= 0) return left + right;
  if (std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-10) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = simpson(a, b, fa, fm, fb);
  const double tol = std::max(std::abs(whole) * rel_tol, 1e-300);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

inline double gauss_pdf(double z, double mean, double sd) {
  const double u = (z - mean) / sd;
  return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * 3.14159265358979323846));
}

struct WindowRates {
  double rp; // 1/2 * integral of the centered density over the window
  double rf; // 1/4 * integral of the two displaced densities over the window
};

/// Acceptance-window integrals in normalized units (unit variance, centers at
/// 0 and +-2g, window half-width alpha*g), computed by quadrature alone.
inline WindowRates window_rates(double g, double alpha, double rel_tol = 1e-10) {
  const double w = alpha * g;
  const auto p0 = [](double z) { return gauss_pdf(z, 0.0, 1.0); };
  const auto pp = [g](double z) { return gauss_pdf(z, 2.0 * g, 1.0); };
  const auto pm = [g](double z) { return gauss_pdf(z, -2.0 * g, 1.0); };
  WindowRates out;
  out.rp = 0.5 * integrate(p0, -w, w, rel_tol);
  out.rf = 0.25 * (integrate(pp, -w, w, rel_tol) + integrate(pm, -w, w, rel_tol));
  return out;
}

/// Conditional acceptance probabilities given the spin sector.
inline double accept_given_dfs(double g, double alpha) {
  const double w = alpha * g;
  return integrate([](double z) { return gauss_pdf(z, 0.0, 1.0); }, -w, w);
}

inline double accept_given_parallel(double g, double alpha) {
  const double w = alpha * g;
  return integrate([g](double z) { return gauss_pdf(z, 2.0 * g, 1.0); }, -w, w);
}

/// Variance of the echoed integral of a zero-start Ornstein-Uhlenbeck path,
/// Var[ int_0^T s(t) x(t) dt ] with damping kappa/2 on x, per-quadrature
/// diffusion rate kappa*n_th, and s = +1 on [0, T/2), -1 on [T/2, T].
/// Evaluated as a Riemann double sum over the covariance kernel.
inline double ou_echo_integral_variance(double kappa, double n_th, double t_total,
                                        int n_grid = 4000) {
  const double h = t_total / n_grid;
  double acc = 0.0;
  for (int i = 0; i < n_grid; ++i) {
    const double t1 = (i + 0.5) * h;
    const double s1 = t1 < 0.5 * t_total ? 1.0 : -1.0;
    for (int j = 0; j < n_grid; ++j) {
      const double t2 = (j + 0.5) * h;
      const double s2 = t2 < 0.5 * t_total ? 1.0 : -1.0;
      const double cov = n_th * (std::exp(-0.5 * kappa * std::abs(t1 - t2)) -
                                 std::exp(-0.5 * kappa * (t1 + t2)));
      acc += s1 * s2 * cov;
    }
  }
  return acc * h * h;
}

/// Central finite difference of f on a logarithmic axis.
inline double log_slope(const std::function<double(double)>& f, double x,
                        double h = 1e-3) {
  return (std::log(f(x * std::exp(h))) - std::log(f(x * std::exp(-h)))) / (2.0 * h);
}

} // namespace oracles
