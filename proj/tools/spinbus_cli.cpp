// spinbus: closed-form predictions, Monte-Carlo runs and estimator demos for
// the mechanically mediated spin-entanglement protocol.  Data-only output
// (CSV/JSON); plotting happens elsewhere.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spinbus/analytic.hpp"
#include "spinbus/estimator.hpp"
#include "spinbus/gate_budget.hpp"
#include "spinbus/inhomogeneity.hpp"
#include "spinbus/io.hpp"
#include "spinbus/mech_sim.hpp"
#include "spinbus/params.hpp"

namespace {

using namespace spinbus;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

struct OutputSink {
  std::string path;  // empty = stdout
  void deliver(const std::string& content, RunManifest manifest) const {
    if (path.empty()) {
      std::cout << content;
      return;
    }
    write_text_file(path, content);
    manifest.outputs = {path};
    manifest.timestamp = iso_timestamp();
    write_manifest(manifest, path);
  }
};

struct ParamSource {
  std::string preset_name;
  std::string config_path;

  ParameterSet resolve() const {
    ParameterSet set = !config_path.empty()
                           ? parameter_set_from_config_file(config_path)
                           : preset(preset_name.empty() ? "table1-row5" : preset_name);
    if (!regime_ok(set.system))
      std::cerr << "warning: " << set.label
                << " violates lambda << omega_r << omega_s (factor-100 margins); "
                   "the effective-interaction picture may be inaccurate\n";
    return set;
  }
  std::string label() const {
    return !config_path.empty() ? config_path
                                : (preset_name.empty() ? "table1-row5" : preset_name);
  }
};

std::vector<double> parse_alpha_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw CLI::ValidationError("--alpha", "expected at least one value");
  return out;
}

Threshold threshold_from(double alpha) {
  return alpha == 0.0 ? Threshold::small_alpha_limit() : Threshold::value(alpha);
}

// --- table ------------------------------------------------------------------

int cmd_table(const std::string& presets_arg, const OutputSink& sink,
              const std::string& format) {
  std::vector<ParameterSet> sets;
  if (presets_arg == "all") {
    sets = builtin_presets();
  } else {
    std::istringstream ss(presets_arg);
    std::string name;
    while (std::getline(ss, name, ','))
      if (!name.empty()) sets.push_back(preset(name));
  }

  const std::vector<std::string> header = {
      "label",      "gamma_inv_s", "q_factor", "lambda_over_2pi_hz",
      "temperature_k", "c",        "delta_m_sq", "t_opt_ms",
      "error_pct",  "rate_tp",     "dl_max_over_lambda_pct"};

  json rows = json::array();
  std::string csv = csv_row(header);
  for (const auto& s : sets) {
    const auto rep = analytic_report(s.system, s.measurement, Threshold::value(s.alpha));
    const auto budget = tolerances(s.system, s.measurement, s.alpha);
    json row = {{"label", s.label},
                {"gamma_inv_s", 1.0 / s.system.gamma},
                {"q_factor", s.system.q_factor},
                {"lambda_over_2pi_hz", s.system.lambda_coupling / two_pi},
                {"temperature_k", s.system.temperature},
                {"c", rep.c},
                {"delta_m_sq", s.measurement.delta_m_sq},
                {"t_opt_ms", rep.t_opt * 1e3},
                {"error_pct", rep.error * 1e2},
                {"rate_tp", rep.rate_tp},
                {"dl_max_over_lambda_pct",
                 budget.dl_max / s.system.lambda_coupling * 1e2}};
    rows.push_back(row);
    std::vector<std::string> cells;
    cells.push_back(s.label);
    for (const char* key : {"gamma_inv_s", "q_factor", "lambda_over_2pi_hz",
                            "temperature_k", "c", "delta_m_sq", "t_opt_ms",
                            "error_pct", "rate_tp", "dl_max_over_lambda_pct"})
      cells.push_back(format_double(row[key].get<double>()));
    csv += csv_row(cells);
  }

  RunManifest manifest;
  manifest.command = "table";
  manifest.parameter_source = presets_arg;
  if (format == "json") {
    json doc = {{"schema_version", schema_version}, {"rows", rows}};
    sink.deliver(doc.dump(2) + "\n", manifest);
  } else {
    sink.deliver(csv, manifest);
  }
  return 0;
}

// --- sweep ------------------------------------------------------------------

std::vector<double> make_grid(double lo, double hi, int points, bool log_axis) {
  if (points < 1) throw CLI::ValidationError("--points", "must be >= 1");
  if (points == 1) return {lo};
  std::vector<double> g(points);
  if (log_axis) {
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < points; ++i)
      g[i] = std::exp(llo + (lhi - llo) * i / (points - 1));
  } else {
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
  }
  return g;
}

int cmd_sweep(const std::string& axis, double lo, double hi, int points, bool log_axis,
              const std::string& alphas_arg, const ParamSource& source,
              double delta_m_sq_override, const OutputSink& sink) {
  const auto alphas = parse_alpha_list(alphas_arg);
  ParameterSet base = source.resolve();
  if (delta_m_sq_override >= 0.0) base.measurement.delta_m_sq = delta_m_sq_override;
  const auto grid = make_grid(lo, hi, points, log_axis);

  std::string csv;
  const double kn = kappa(base.system) * thermal_occupation(base.system);

  if (axis == "c") {
    csv = csv_row({"c", "alpha", "gamma_t_opt", "fidelity", "error", "rate_tp",
                   "rate_fp", "rate_tp_per_gamma"});
    for (const double c : grid) {
      SystemParams p = base.system;
      p.lambda_coupling = std::sqrt(c * p.gamma * kn);
      for (const double a : alphas) {
        const Threshold th = threshold_from(a);
        const auto rep = analytic_report(p, base.measurement, th);
        const double per_gamma =
            rep.rate_tp > 0.0 ? rep.rate_tp / (p.gamma * rep.t_opt) : 0.0;
        csv += csv_row({format_double(c), format_double(a),
                        format_double(p.gamma * rep.t_opt), format_double(rep.fidelity),
                        format_double(rep.error), format_double(rep.rate_tp),
                        format_double(rep.rate_fp), format_double(per_gamma)});
      }
    }
  } else if (axis == "t") {
    csv = csv_row({"gamma_t", "alpha", "c", "fidelity", "error", "g"});
    const double c = cooperativity(base.system);
    for (const double gt : grid) {
      const double t = gt / base.system.gamma;
      for (const double a : alphas) {
        const Threshold th = threshold_from(a);
        const double f = fidelity(base.system, base.measurement, t, th);
        const double g = normalized_displacement(base.system, base.measurement, t);
        csv += csv_row({format_double(gt), format_double(a), format_double(c),
                        format_double(f), format_double(1.0 - f), format_double(g)});
      }
    }
  } else if (axis == "alpha") {
    csv = csv_row({"alpha", "c", "gamma_t_opt", "fidelity", "error", "rate_tp",
                   "rate_fp", "rate_tp_per_gamma"});
    const double c = cooperativity(base.system);
    for (const double a : grid) {
      const Threshold th = threshold_from(a);
      const auto rep = analytic_report(base.system, base.measurement, th);
      const double per_gamma =
          rep.rate_tp > 0.0 ? rep.rate_tp / (base.system.gamma * rep.t_opt) : 0.0;
      csv += csv_row({format_double(a), format_double(c),
                      format_double(base.system.gamma * rep.t_opt),
                      format_double(rep.fidelity), format_double(rep.error),
                      format_double(rep.rate_tp), format_double(rep.rate_fp),
                      format_double(per_gamma)});
    }
  } else {
    throw CLI::ValidationError("--axis", "must be one of c, alpha, t");
  }

  RunManifest manifest;
  manifest.command = "sweep --axis " + axis;
  manifest.parameter_source = source.label();
  sink.deliver(csv, manifest);
  return 0;
}

// --- mc ---------------------------------------------------------------------

int cmd_mc(const ParamSource& source, uint64_t runs, uint64_t seed,
           const std::string& variant, double delta_lambda, double t_override,
           double alpha_override, const OutputSink& sink, const std::string& format,
           const std::string& dump_trajectory) {
  const ParameterSet set = source.resolve();
  const double alpha = alpha_override > 0.0 ? alpha_override : set.alpha;
  const Threshold th = Threshold::value(alpha);
  const auto rep = analytic_report(set.system, set.measurement, th);

  ProtocolConfig cfg;
  cfg.alpha = alpha;
  cfg.t_interact = t_override > 0.0 ? t_override : rep.t_opt;
  cfg.variant = variant == "echo" ? ProtocolVariant::echo_three_measurement
                                  : ProtocolVariant::standard_two_measurement;

  if (!dump_trajectory.empty()) {
    // one realized interaction-interval path of the driven sector, for plots
    const auto rec =
        sample_trajectory(set.system, 2, cfg.t_interact, cfg.t_interact / 400.0, seed);
    write_text_file(dump_trajectory, trajectory_csv(rec));
  }

  const MonteCarloSummary summary =
      cfg.variant == ProtocolVariant::echo_three_measurement
          ? monte_carlo_echo(set.system, set.measurement, cfg, delta_lambda, runs, seed)
          : monte_carlo(set.system, set.measurement, cfg, runs, seed);

  const double g = normalized_displacement(set.system, set.measurement, cfg.t_interact);
  json doc = {{"schema_version", schema_version},
              {"preset", source.label()},
              {"variant", variant},
              {"alpha", alpha},
              {"t_interact", cfg.t_interact},
              {"delta_lambda", delta_lambda},
              {"seed", seed},
              {"summary", to_json(summary)},
              {"analytic",
               {{"fidelity", fidelity(set.system, set.measurement, cfg.t_interact, th)},
                {"acceptance", acceptance_rate(g, alpha)},
                {"rate_tp", true_positive_rate(g, alpha)},
                {"rate_fp", false_positive_rate(g, alpha)},
                {"error", 1.0 - fidelity(set.system, set.measurement, cfg.t_interact, th)}}}};

  RunManifest manifest;
  manifest.command = "mc";
  manifest.parameter_source = source.label();
  manifest.seed = seed;
  manifest.n_runs = runs;

  if (format == "csv") {
    std::string csv = csv_row({"n_runs", "acceptance", "rate_tp", "rate_fp",
                               "fidelity", "fidelity_lo99", "fidelity_hi99"});
    csv += csv_row({std::to_string(summary.n_runs),
                    format_double(summary.acceptance.estimate),
                    format_double(summary.rate_tp.estimate),
                    format_double(summary.rate_fp.estimate),
                    format_double(summary.fidelity.estimate),
                    format_double(summary.fidelity.ci99.lo),
                    format_double(summary.fidelity.ci99.hi)});
    sink.deliver(csv, manifest);
  } else {
    sink.deliver(doc.dump(2) + "\n", manifest);
  }
  return 0;
}

// --- kalman-demo ------------------------------------------------------------

int cmd_kalman_demo(const ParamSource& source, double periods, int steps_per_period,
                    uint64_t seed, const std::string& records_path,
                    const std::string& dump_records, const OutputSink& sink) {
  const ParameterSet set = source.resolve();
  const auto model = make_filter_model(set.system, set.measurement);
  const double period = two_pi / set.system.omega_r;
  const double thermal_var = set.system.mass * k_boltzmann * set.system.temperature;
  const Eigen::Matrix2d p0 = thermal_var * Eigen::Matrix2d::Identity();

  double dt = period / steps_per_period;
  std::vector<double> record;
  std::size_t n_steps = 0;
  if (!records_path.empty()) {
    // ingest an external measurement record (CSV columns t, z)
    std::ifstream in(records_path);
    if (!in) throw std::invalid_argument("cannot open records file: " + records_path);
    const auto rows = read_measurement_csv(in);
    if (rows.size() < 2)
      throw std::invalid_argument("records file needs at least two samples");
    dt = rows[1].first - rows[0].first;
    if (!(dt > 0.0)) throw std::invalid_argument("records file: non-increasing time");
    record.reserve(rows.size());
    for (const auto& [t, z] : rows) record.push_back(z);
    n_steps = record.size();
  } else {
    n_steps = static_cast<std::size_t>(periods * steps_per_period);
    Rng rng = Rng::stream(seed, 0);
    const Eigen::Vector2d x0(rng.gaussian(0.0, std::sqrt(thermal_var)),
                             rng.gaussian(0.0, std::sqrt(thermal_var)));
    const auto truth = simulate_truth(model, n_steps, dt, x0, rng);
    record = truth.z;
    if (!dump_records.empty()) {
      std::string csv = "t,z\n";
      for (std::size_t i = 0; i < truth.t.size(); ++i)
        csv += csv_row({format_double(truth.t[i]), format_double(truth.z[i])});
      write_text_file(dump_records, csv);
    }
  }

  const auto states = run_filter(model, record, dt, Eigen::Vector2d::Zero(), p0);
  const Eigen::Matrix2d pss = riccati_steady_state(model);

  RunManifest manifest;
  manifest.command = "kalman-demo";
  manifest.parameter_source = source.label();
  manifest.seed = seed;
  manifest.n_runs = n_steps;
  sink.deliver(filter_trace_csv(states), manifest);

  const double unit = model.phonon_unit;
  json info = {{"schema_version", schema_version},
               {"p_ss_phonon", {{"p11", pss(0, 0) / unit}, {"p22", pss(1, 1) / unit},
                                {"p12", pss(0, 1) / unit}}},
               {"delta_m_sq_closed_form", delta_m_sq_closed_form(set.system, set.measurement)},
               {"delta_m_sq_exact", delta_m_sq_exact(set.system, set.measurement)},
               {"final_trace_over_pss",
                states.empty() ? 0.0 : states.back().p_cov.trace() / pss.trace()}};
  std::cerr << info.dump(2) << "\n";
  return 0;
}

// --- budget -----------------------------------------------------------------

int cmd_budget(const ParamSource& source, double c_min, double c_max, int points,
               double e_cnot, double readout_factor, double alpha,
               bool include_nuclear, bool report, const OutputSink& sink) {
  const ParameterSet set = source.resolve();
  AncillaryErrors anc;
  anc.e_cnot = e_cnot;

  RunManifest manifest;
  manifest.command = "budget";
  manifest.parameter_source = source.label();

  if (report) {
    // single-point budget at the parameter set's own cooperativity
    const auto pt = gate_budget_point(set.system, cooperativity(set.system), anc,
                                      readout_factor, alpha, include_nuclear);
    json doc = to_json(pt);
    doc["schema_version"] = schema_version;
    doc["preset"] = source.label();
    sink.deliver(doc.dump(2) + "\n", manifest);
    return 0;
  }

  std::string csv =
      csv_row({"c", "e_bell", "e_ro", "e_nuc", "e_total", "e_reference"});
  for (const double c : make_grid(c_min, c_max, points, true)) {
    const auto pt = gate_budget_point(set.system, c, anc, readout_factor, alpha,
                                      include_nuclear);
    csv += csv_row({format_double(pt.c), format_double(pt.e_bell),
                    format_double(pt.e_ro), format_double(pt.e_nuc),
                    format_double(pt.e_total), format_double(pt.e_reference)});
  }
  sink.deliver(csv, manifest);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"spin-resonator entanglement protocol toolkit"};
  app.require_subcommand(1);

  // table
  auto* table = app.add_subcommand("table", "closed-form summary of the shipped presets");
  std::string table_presets = "all";
  OutputSink table_sink;
  std::string table_format = "csv";
  table->add_option("--presets", table_presets, "comma-separated preset names, or 'all'");
  table->add_option("--out", table_sink.path, "output path (default stdout)");
  table->add_option("--format", table_format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));

  // sweep
  auto* sweep = app.add_subcommand("sweep", "grid evaluation of the closed forms");
  std::string sweep_axis;
  double sweep_min = 0, sweep_max = 0;
  int sweep_points = 1;
  bool sweep_log = false;
  std::string sweep_alphas = "0";
  ParamSource sweep_source;
  double sweep_dm = -1.0;
  OutputSink sweep_sink;
  sweep->add_option("--axis", sweep_axis, "c|alpha|t")->required();
  sweep->add_option("--min", sweep_min)->required();
  sweep->add_option("--max", sweep_max)->required();
  sweep->add_option("--points", sweep_points)->required();
  sweep->add_flag("--log", sweep_log, "logarithmic grid");
  sweep->add_option("--alpha", sweep_alphas, "comma-separated thresholds; 0 = small-alpha limit");
  sweep->add_option("--preset", sweep_source.preset_name, "base parameter preset");
  sweep->add_option("--config", sweep_source.config_path, "base parameter config file");
  sweep->add_option("--delta-m-sq", sweep_dm, "override measurement variance (>= 0)");
  sweep->add_option("--out", sweep_sink.path, "output path (default stdout)");

  // mc
  auto* mc = app.add_subcommand("mc", "Monte-Carlo execution of the protocol");
  ParamSource mc_source;
  uint64_t mc_runs = 0, mc_seed = 1;
  std::string mc_variant = "standard";
  double mc_dl = 0.0, mc_t = 0.0, mc_alpha = 0.0;
  OutputSink mc_sink;
  std::string mc_format = "json";
  mc->add_option("--preset", mc_source.preset_name);
  mc->add_option("--config", mc_source.config_path);
  mc->add_option("--runs", mc_runs, "number of protocol attempts")
      ->required()
      ->check(CLI::PositiveNumber);
  mc->add_option("--seed", mc_seed);
  mc->add_option("--variant", mc_variant, "standard|echo")
      ->check(CLI::IsMember({"standard", "echo"}));
  mc->add_option("--delta-lambda", mc_dl, "coupling inhomogeneity [rad/s] (echo)")
      ->check(CLI::NonNegativeNumber);
  mc->add_option("--t-interact", mc_t, "interaction time [s] (default: optimal)")
      ->check(CLI::NonNegativeNumber);
  mc->add_option("--alpha", mc_alpha, "threshold override (0 = preset value)")
      ->check(CLI::NonNegativeNumber);
  mc->add_option("--out", mc_sink.path);
  mc->add_option("--format", mc_format)->check(CLI::IsMember({"csv", "json"}));
  std::string mc_dump;
  mc->add_option("--dump-trajectory", mc_dump,
                 "also write one realized (t, x, p) path as CSV");

  // kalman-demo
  auto* kd = app.add_subcommand("kalman-demo", "filter trace on synthetic interferometer data");
  ParamSource kd_source;
  double kd_periods = 50.0;
  int kd_spp = 200;
  uint64_t kd_seed = 1;
  OutputSink kd_sink;
  kd->add_option("--preset", kd_source.preset_name);
  kd->add_option("--config", kd_source.config_path);
  kd->add_option("--periods", kd_periods, "mechanical periods to simulate");
  kd->add_option("--steps-per-period", kd_spp)->check(CLI::PositiveNumber);
  kd->add_option("--seed", kd_seed);
  kd->add_option("--out", kd_sink.path);
  std::string kd_records, kd_dump_records;
  kd->add_option("--records", kd_records, "measurement record CSV (t,z) to filter");
  kd->add_option("--dump-records", kd_dump_records,
                 "write the synthetic measurement record as CSV");

  // budget
  auto* budget = app.add_subcommand("budget", "teleported-CNOT error budget vs cooperativity");
  ParamSource budget_source;
  double b_cmin = 10.0, b_cmax = 1e4, b_ecnot = 1e-4, b_rof = 20.0, b_alpha = 0.4;
  int b_points = 41;
  bool b_nuc = false;
  OutputSink budget_sink;
  budget->add_option("--preset", budget_source.preset_name);
  budget->add_option("--config", budget_source.config_path);
  budget->add_option("--c-min", b_cmin);
  budget->add_option("--c-max", b_cmax);
  budget->add_option("--points", b_points)->check(CLI::PositiveNumber);
  budget->add_option("--e-cnot", b_ecnot);
  budget->add_option("--readout-factor", b_rof, "mechanical readout duration in units of t*");
  budget->add_option("--alpha", b_alpha);
  budget->add_flag("--include-nuclear", b_nuc, "add nuclear dephasing to the total");
  bool b_report = false;
  budget->add_flag("--report", b_report,
                   "single-point JSON budget at the parameter set's cooperativity");
  budget->add_option("--out", budget_sink.path);

  try {
    app.parse(argc, argv);
    if (table->parsed()) return cmd_table(table_presets, table_sink, table_format);
    if (sweep->parsed())
      return cmd_sweep(sweep_axis, sweep_min, sweep_max, sweep_points, sweep_log,
                       sweep_alphas, sweep_source, sweep_dm, sweep_sink);
    if (mc->parsed())
      return cmd_mc(mc_source, mc_runs, mc_seed, mc_variant, mc_dl, mc_t, mc_alpha,
                    mc_sink, mc_format, mc_dump);
    if (kd->parsed())
      return cmd_kalman_demo(kd_source, kd_periods, kd_spp, kd_seed, kd_records,
                             kd_dump_records, kd_sink);
    if (budget->parsed())
      return cmd_budget(budget_source, b_cmin, b_cmax, b_points, b_ecnot, b_rof,
                        b_alpha, b_nuc, b_report, budget_sink);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2; // usage/config errors map to exit 2
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  }
}
