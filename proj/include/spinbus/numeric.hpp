#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace spinbus {

/// (1 - e^{-u}) / u, stable for u -> 0 (limit 1) and exact for u = 0.
inline double one_minus_exp_over(double u) {
  if (u == 0.0) return 1.0;
  return -std::expm1(-u) / u;
}

inline double clamp01(double x) {
  if (x < 0.0) return 0.0;
  if (x > 1.0) return 1.0;
  return x;
}

struct ScalarMaximum {
  double x;
  double value;
};

/// Golden-section search for the maximum of a unimodal function on [lo, hi].
/// Terminates when the bracket has shrunk below rel_tol * |x| (plus a tiny
/// absolute floor so lo == 0 cannot stall the loop).
inline ScalarMaximum golden_section_max(const std::function<double(double)>& f,
                                        double lo, double hi,
                                        double rel_tol = 1e-6) {
  if (!(lo < hi)) throw std::invalid_argument("golden_section_max: empty bracket");
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  const double abs_floor = rel_tol * (hi - lo) * 1e-6;
  while ((b - a) > rel_tol * (std::abs(a) + std::abs(b)) * 0.5 + abs_floor) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  const double xm = 0.5 * (a + b);
  return {xm, f(xm)};
}

} // namespace spinbus
