#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinbus/constants.hpp"

namespace spinbus {

// Physical hardware parameters of the spin–resonator system.
//
// Conventions: config files and presets specify lambda/2pi and omega_r/2pi
// in Hz (the human convention); internally everything is angular [rad/s].
struct SystemParams {
  double gamma;           // spin dephasing rate Gamma [1/s]
  double q_factor;        // mechanical quality factor
  double lambda_coupling; // spin-phonon coupling lambda [rad/s]
  double temperature;     // bath temperature [K]
  double omega_r;         // resonator angular frequency [rad/s]
  double omega_s;         // spin transition angular frequency [rad/s]
  double zp;              // zero-point motion [m] (estimator only)
  double mass;            // effective resonator mass [kg] (estimator only)
};

struct MeasurementParams {
  double delta_m_sq;       // measurement variance [phonon units]
  double laser_wavelength; // [m]
  double photon_flux;      // collected scattered photons [1/s]
  double eta_det = 1.0;    // detection efficiency
  double eta_geo = 1.0;    // geometric collection factor
};

enum class ProtocolVariant { standard_two_measurement, echo_three_measurement };

struct ProtocolConfig {
  double alpha;       // acceptance threshold parameter, in (0, 1]
  double t_interact;  // interaction time t_I [s]
  double pulse_phase = pi / 2.0; // toggling-frame phase phi [rad]
  ProtocolVariant variant = ProtocolVariant::standard_two_measurement;
};

/// Resonator energy decay rate kappa = omega_r / Q  [1/s].
inline double kappa(const SystemParams& p) { return p.omega_r / p.q_factor; }

/// Thermal occupation from the exact Bose formula; 0 at T = 0.
inline double thermal_occupation(const SystemParams& p) {
  if (p.temperature <= 0.0) return 0.0;
  const double x = hbar * p.omega_r / (k_boltzmann * p.temperature);
  return 1.0 / std::expm1(x);
}

/// High-temperature (equipartition) occupation k_B T / (hbar omega_r); the
/// estimator closed forms use it so they stay algebraically consistent with
/// the classical diffusion constant D = kappa k_B T m.
inline double classical_occupation(const SystemParams& p) {
  if (p.temperature <= 0.0) return 0.0;
  return k_boltzmann * p.temperature / (hbar * p.omega_r);
}

/// Cooperativity C = lambda^2 / (Gamma kappa n_th).
inline double cooperativity(const SystemParams& p) {
  const double l = p.lambda_coupling;
  return l * l / (p.gamma * kappa(p) * thermal_occupation(p));
}

/// Diffusion constant D = kappa k_B T m of the damped resonator [kg^2 m^2/s^3].
inline double diffusion_constant(const SystemParams& p) {
  return kappa(p) * k_boltzmann * p.temperature * p.mass;
}

inline void validate(const SystemParams& p) {
  if (!(p.gamma > 0.0)) throw std::invalid_argument("SystemParams: gamma must be > 0");
  if (!(p.q_factor >= 10.0)) throw std::invalid_argument("SystemParams: Q must be >= 10");
  if (!(p.lambda_coupling > 0.0)) throw std::invalid_argument("SystemParams: lambda must be > 0");
  if (!(p.temperature > 0.0)) throw std::invalid_argument("SystemParams: temperature must be > 0");
  if (!(p.omega_r > 0.0)) throw std::invalid_argument("SystemParams: omega_r must be > 0");
  if (!(p.omega_s > 0.0)) throw std::invalid_argument("SystemParams: omega_s must be > 0");
  if (!(p.zp > 0.0)) throw std::invalid_argument("SystemParams: zp must be > 0");
  if (!(p.mass > 0.0)) throw std::invalid_argument("SystemParams: mass must be > 0");
}

/// Hierarchy lambda << omega_r << omega_s with factor-100 margins.
/// A violation degrades the effective-interaction picture but is not an
/// input error, so it is a flag rather than an exception.
inline bool regime_ok(const SystemParams& p) {
  return 100.0 * p.lambda_coupling <= p.omega_r && 100.0 * p.omega_r <= p.omega_s;
}

inline void validate(const MeasurementParams& m) {
  if (!(m.delta_m_sq >= 0.0)) throw std::invalid_argument("MeasurementParams: delta_m_sq must be >= 0");
  if (!(m.photon_flux >= 0.0)) throw std::invalid_argument("MeasurementParams: photon_flux must be >= 0");
  if (!(m.laser_wavelength > 0.0)) throw std::invalid_argument("MeasurementParams: laser_wavelength must be > 0");
}

inline void validate(const ProtocolConfig& c) {
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw std::invalid_argument("ProtocolConfig: alpha must be in (0, 1]");
  if (!(c.t_interact > 0.0)) throw std::invalid_argument("ProtocolConfig: t_interact must be > 0");
}

/// Collected photon flux R = eta_geo eta_det P / (hbar c k) for scattered
/// power P [W] at wavelength lambda_l.
inline double photon_flux_from_power(double power, double laser_wavelength,
                                     double eta_geo = 1.0, double eta_det = 1.0) {
  const double photon_energy = planck_h * speed_of_light / laser_wavelength;
  return eta_geo * eta_det * power / photon_energy;
}

/// Effective mass consistent with z_p = sqrt(hbar / (2 m omega_r)).
inline double mass_from_zp(double zp, double omega_r) {
  return hbar / (2.0 * zp * zp * omega_r);
}

struct ParameterSet {
  std::string label;
  SystemParams system;
  MeasurementParams measurement;
  double alpha = 0.4;
};

namespace detail {

inline SystemParams make_system(double gamma_inv_s, double q, double lambda_hz,
                                double temperature_k,
                                double omega_r_hz = 1.0e6,
                                double omega_s_hz = 2.87e9,
                                double zp = 1.0e-14) {
  SystemParams p;
  p.gamma = 1.0 / gamma_inv_s;
  p.q_factor = q;
  p.lambda_coupling = two_pi * lambda_hz;
  p.temperature = temperature_k;
  p.omega_r = two_pi * omega_r_hz;
  p.omega_s = two_pi * omega_s_hz;
  p.zp = zp;
  p.mass = mass_from_zp(zp, p.omega_r);
  return p;
}

inline MeasurementParams make_measurement(double delta_m_sq,
                                          double laser_wavelength = 1550e-9,
                                          double power = 1e-3) {
  MeasurementParams m;
  m.delta_m_sq = delta_m_sq;
  m.laser_wavelength = laser_wavelength;
  m.photon_flux = photon_flux_from_power(power, laser_wavelength);
  return m;
}

} // namespace detail

/// The six shipped presets table1-row1 .. table1-row6.
inline std::vector<ParameterSet> builtin_presets() {
  std::vector<ParameterSet> out;
  auto add = [&](const std::string& label, double gamma_inv_s, double q,
                 double lambda_hz, double temperature_k, double delta_m_sq) {
    ParameterSet s;
    s.label = label;
    s.system = detail::make_system(gamma_inv_s, q, lambda_hz, temperature_k);
    s.measurement = detail::make_measurement(delta_m_sq);
    s.alpha = 0.4;
    out.push_back(s);
  };
  add("table1-row1", 10e-3, 1e7, 450.0, 4.0, 24.0);
  add("table1-row2", 1.6, 1e9, 100.0, 4.0, 8.0);
  add("table1-row3", 0.6, 1e9, 1000.0, 77.0, 10.0);
  add("table1-row4", 10e-3, 1e9, 400.0, 293.0, 20.0);
  add("table1-row5", 10e-3, 1e9, 880.0, 293.0, 27.0);
  add("table1-row6", 10e-3, 1e10, 2000.0, 293.0, 0.06);
  return out;
}

inline ParameterSet preset(const std::string& name) {
  for (const auto& s : builtin_presets())
    if (s.label == name) return s;
  throw std::invalid_argument("unknown preset: " + name);
}

// -- plain-text key/value configuration ------------------------------------
//
// Schema (one "key = value" pair per line, '#' starts a comment):
//   gamma_inv_s, q_factor, lambda_over_2pi_hz, temperature_k,
//   omega_r_over_2pi_hz, delta_m_sq, alpha
// Optional keys: omega_s_over_2pi_hz, zp_m, mass_kg, laser_wavelength_m,
//   photon_flux_per_s, laser_power_w, label.

inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    std::string stripped;
    for (char c : line)
      if (!is_space(c)) stripped.push_back(c);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= stripped.size())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    kv[stripped.substr(0, eq)] = stripped.substr(eq + 1);
  }
  return kv;
}

inline ParameterSet parameter_set_from_config(std::istream& in,
                                              const std::string& source_label = "config") {
  const auto kv = parse_key_values(in);
  auto need = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw std::invalid_argument("config: missing required key '" + key + "'");
    return std::stod(it->second);
  };
  auto opt = [&](const std::string& key, double fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
  };

  ParameterSet s;
  s.label = kv.count("label") ? kv.at("label") : source_label;
  const double omega_r_hz = opt("omega_r_over_2pi_hz", 1.0e6);
  const double zp = opt("zp_m", 1.0e-14);
  s.system = detail::make_system(need("gamma_inv_s"), need("q_factor"),
                                 need("lambda_over_2pi_hz"), need("temperature_k"),
                                 omega_r_hz, opt("omega_s_over_2pi_hz", 2.87e9), zp);
  s.system.mass = opt("mass_kg", s.system.mass);
  const double wavelength = opt("laser_wavelength_m", 1550e-9);
  const double flux_default =
      photon_flux_from_power(opt("laser_power_w", 1e-3), wavelength);
  s.measurement = detail::make_measurement(need("delta_m_sq"), wavelength);
  s.measurement.photon_flux = opt("photon_flux_per_s", flux_default);
  s.alpha = opt("alpha", 0.4);
  validate(s.system);
  validate(s.measurement);
  if (!(s.alpha > 0.0 && s.alpha <= 1.0))
    throw std::invalid_argument("config: alpha must be in (0, 1]");
  return s;
}

inline ParameterSet parameter_set_from_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  return parameter_set_from_config(in, path);
}

} // namespace spinbus
