#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "spinbus/params.hpp"

using namespace spinbus;
using Catch::Approx;

TEST_CASE("kappa is omega_r over Q", "[params]") {
  SystemParams p = preset("table1-row5").system;
  CHECK(kappa(p) == Approx(6.283185307e-3).epsilon(1e-9));

  p.q_factor = 1e7;
  CHECK(kappa(p) == Approx(0.6283185307).epsilon(1e-9));

  p.q_factor = 1e18;
  CHECK(kappa(p) < 1e-11);
}

TEST_CASE("thermal occupation follows the exact Bose formula", "[params]") {
  SystemParams p = preset("table1-row5").system;

  SECTION("hbar omega / kT = ln 2 gives exactly one phonon") {
    p.temperature = hbar * p.omega_r / (k_boltzmann * std::log(2.0));
    CHECK(thermal_occupation(p) == Approx(1.0).epsilon(1e-12));
  }
  SECTION("room temperature at 1 MHz") {
    CHECK(thermal_occupation(p) == Approx(6.105129e6).epsilon(1e-5));
  }
  SECTION("T -> 0 freezes the mode out") {
    p.temperature = 1e-9;
    CHECK(thermal_occupation(p) < 1e-10);
    p.temperature = 0.0;
    CHECK(thermal_occupation(p) == 0.0);
  }
}

TEST_CASE("cooperativity reproduces the published parameter sets", "[params]") {
  CHECK(cooperativity(preset("table1-row5").system) == Approx(8.0).epsilon(0.05));
  CHECK(cooperativity(preset("table1-row1").system) == Approx(1.5).epsilon(0.05));
  CHECK(cooperativity(preset("table1-row2").system) == Approx(1206.0).epsilon(0.05));
}

TEST_CASE("cooperativity is insensitive to omega_r in the high-T limit", "[params]") {
  SystemParams p = preset("table1-row5").system;
  const double c_ref = cooperativity(p);
  for (double f_hz : {0.1e6, 0.3e6, 1e6, 3e6, 10e6}) {
    p.omega_r = two_pi * f_hz;
    CHECK(k_boltzmann * p.temperature / (hbar * p.omega_r) > 1e3);
    CHECK(cooperativity(p) == Approx(c_ref).epsilon(1e-3));
  }
}

TEST_CASE("derived quantities are pure functions", "[params]") {
  const SystemParams p = preset("table1-row3").system;
  CHECK(cooperativity(p) == cooperativity(p));
  CHECK(thermal_occupation(p) == thermal_occupation(p));
  CHECK(kappa(p) == kappa(p));
}

TEST_CASE("validation enforces the stated preconditions", "[params]") {
  SystemParams p = preset("table1-row5").system;
  CHECK_NOTHROW(validate(p));

  SECTION("Q >> 1 enforced as Q >= 10") {
    p.q_factor = 9.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
  }
  SECTION("rates strictly positive") {
    p.gamma = 0.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
  }
  SECTION("regime hierarchy is a flag, not an error") {
    CHECK(regime_ok(p));
    p.lambda_coupling = two_pi * 2e4; // only x50 below omega_r
    CHECK_NOTHROW(validate(p));
    CHECK_FALSE(regime_ok(p));
  }
  SECTION("protocol config ranges") {
    CHECK_THROWS_AS(validate(ProtocolConfig{1.5, 1e-3}), std::invalid_argument);
    CHECK_THROWS_AS(validate(ProtocolConfig{0.4, 0.0}), std::invalid_argument);
    CHECK_NOTHROW(validate(ProtocolConfig{1.0, 1e-3}));
  }
  SECTION("measurement params") {
    MeasurementParams m = preset("table1-row5").measurement;
    m.delta_m_sq = -1.0;
    CHECK_THROWS_AS(validate(m), std::invalid_argument);
  }
}

TEST_CASE("presets expose the six published rows", "[params]") {
  const auto all = builtin_presets();
  REQUIRE(all.size() == 6);
  CHECK(all.front().label == "table1-row1");
  CHECK(all.back().label == "table1-row6");
  for (const auto& s : all) {
    CHECK(s.alpha == 0.4);
    CHECK(s.system.omega_r == Approx(two_pi * 1e6));
    CHECK_NOTHROW(validate(s.system));
  }
  CHECK_THROWS_AS(preset("table1-row7"), std::invalid_argument);
}

TEST_CASE("key/value config files load parameter sets", "[params]") {
  std::istringstream cfg(
      "# example configuration\n"
      "gamma_inv_s = 10e-3\n"
      "q_factor = 1e9\n"
      "lambda_over_2pi_hz = 880\n"
      "temperature_k = 293\n"
      "omega_r_over_2pi_hz = 1e6\n"
      "delta_m_sq = 27\n"
      "alpha = 0.4\n");
  const auto set = parameter_set_from_config(cfg, "inline");
  const auto ref = preset("table1-row5");
  CHECK(set.system.lambda_coupling == Approx(ref.system.lambda_coupling));
  CHECK(set.system.gamma == Approx(ref.system.gamma));
  CHECK(set.measurement.delta_m_sq == 27.0);
  CHECK(set.alpha == 0.4);
  CHECK(cooperativity(set.system) == Approx(cooperativity(ref.system)));

  std::istringstream missing("q_factor = 1e9\n");
  CHECK_THROWS_AS(parameter_set_from_config(missing, "inline"), std::invalid_argument);

  std::istringstream garbled("gamma_inv_s\n");
  CHECK_THROWS_AS(parameter_set_from_config(garbled, "inline"), std::invalid_argument);
}

TEST_CASE("photon flux from scattered power", "[params]") {
  // 1 mW at 1550 nm: each photon carries hc/lambda ~ 1.28e-19 J.
  const double r = photon_flux_from_power(1e-3, 1550e-9);
  CHECK(r == Approx(7.8029e15).epsilon(1e-3));
  CHECK(photon_flux_from_power(1e-3, 1550e-9, 0.5, 0.5) == Approx(0.25 * r));
}
