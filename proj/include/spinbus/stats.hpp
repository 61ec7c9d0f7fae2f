#pragma once

#include <cmath>
#include <cstdint>

namespace spinbus {

struct Interval {
  double lo;
  double hi;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

inline constexpr double z_99 = 2.5758293035489004; // two-sided 99% normal quantile

/// Wilson score interval for k successes out of n trials; degenerate [0, 1]
/// for n <= 1 (a single trial carries no interval information).
inline Interval wilson_interval(uint64_t k, uint64_t n, double z = z_99) {
  if (n <= 1) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  double lo = center - half, hi = center + half;
  if (lo < 0.0 || k == 0) lo = 0.0;
  if (hi > 1.0 || k == n) hi = 1.0;
  return {lo, hi};
}

/// Streaming mean/variance accumulator (Welford).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  /// Standard error of the mean.
  double sem() const { return n_ > 0 ? stddev() / std::sqrt(static_cast<double>(n_)) : 0.0; }
  /// Standard error of the sample variance (normal approximation).
  double variance_sem() const {
    return n_ > 1 ? variance() * std::sqrt(2.0 / static_cast<double>(n_ - 1)) : 0.0;
  }

 private:
  uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

} // namespace spinbus
