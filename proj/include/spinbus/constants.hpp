#pragma once

// Physical constants pinned to CODATA 2018 exact values so that derived
// quantities are reproducible bit-for-bit across builds.

namespace spinbus {

inline constexpr double hbar = 1.054571817e-34;       // [J s]
inline constexpr double k_boltzmann = 1.380649e-23;   // [J/K]
inline constexpr double planck_h = 6.62607015e-34;    // [J s]
inline constexpr double speed_of_light = 299792458.0; // [m/s]

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double sqrt2 = 1.414213562373095048801688724209698079;

} // namespace spinbus
