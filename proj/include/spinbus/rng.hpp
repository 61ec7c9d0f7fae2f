#pragma once

#include <cmath>
#include <cstdint>

namespace spinbus {

// Deterministic, stream-splittable random source.  Every trajectory gets its
// own stream derived from (seed, stream index), so ensembles are reproducible
// regardless of execution order.  Gaussians come from a polar Box-Muller on
// top of splitmix64 output rather than std::normal_distribution, whose
// algorithm is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Decorrelate trivially related seeds.
    next_u64();
    next_u64();
  }

  static Rng stream(uint64_t seed, uint64_t index) {
    uint64_t s = seed;
    s = splitmix(s + 0x9e3779b97f4a7c15ULL * (index + 1));
    s = splitmix(s ^ (index * 0xbf58476d1ce4e5b9ULL));
    return Rng(s);
  }

  uint64_t next_u64() {
    state_ = splitmix_advance(state_);
    return splitmix_output(state_);
  }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal deviate (polar method, spare cached).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

 private:
  static uint64_t splitmix_advance(uint64_t x) { return x + 0x9e3779b97f4a7c15ULL; }
  static uint64_t splitmix_output(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static uint64_t splitmix(uint64_t x) { return splitmix_output(splitmix_advance(x)); }

  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace spinbus
