#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinbus/analytic.hpp"
#include "spinbus/estimator.hpp"
#include "spinbus/gate_budget.hpp"
#include "spinbus/inhomogeneity.hpp"
#include "spinbus/mech_sim.hpp"

namespace spinbus {

inline constexpr int schema_version = 1;
inline constexpr const char* tool_version = "0.1.0";

/// Shortest round-trip decimal form, locale-independent ('.' separator).
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out.push_back(',');
    out += cells[i];
  }
  out.push_back('\n');
  return out;
}

using json = nlohmann::json;

inline json to_json(const AnalyticReport& r) {
  return json{{"c", r.c},
              {"t_opt", r.t_opt},
              {"fidelity", r.fidelity},
              {"error", r.error},
              {"rate_tp", r.rate_tp},
              {"rate_fp", r.rate_fp},
              {"g_value", r.g_value},
              {"sigma_sq", r.sigma_sq}};
}

inline json to_json(const ProportionEstimate& e) {
  return json{{"estimate", e.estimate}, {"ci99", {e.ci99.lo, e.ci99.hi}}};
}

inline json to_json(const MonteCarloSummary& s) {
  return json{{"n_runs", s.n_runs},
              {"n_accepted", s.n_accepted},
              {"n_true_positive", s.n_true_positive},
              {"n_false_positive", s.n_false_positive},
              {"n_dephased", s.n_dephased},
              {"acceptance", to_json(s.acceptance)},
              {"rate_tp", to_json(s.rate_tp)},
              {"rate_fp", to_json(s.rate_fp)},
              {"fidelity", to_json(s.fidelity)}};
}

inline json to_json(const InhomogeneityBudget& b) {
  return json{{"delta_lambda", b.delta_lambda},
              {"sigma_dphi_sq", b.sigma_dphi_sq},
              {"delta_g", b.delta_g},
              {"dl_max_phi", b.dl_max_phi},
              {"dl_max_m", b.dl_max_m},
              {"dl_max_disp", b.dl_max_disp},
              {"dl_max", b.dl_max},
              {"t_opt", b.t_opt},
              {"error", b.error}};
}

inline json to_json(const GateBudgetPoint& g) {
  return json{{"c", g.c},           {"e_bell", g.e_bell},
              {"e_ro", g.e_ro},     {"e_nuc", g.e_nuc},
              {"e_total", g.e_total}, {"e_reference", g.e_reference}};
}

inline json to_json(const ShotNoiseBudget& b) {
  return json{{"dm_imp_sq", b.dm_imp_sq},
              {"dm_th_sq", b.dm_th_sq},
              {"dm_tot_sq", b.dm_tot_sq},
              {"tau_opt", b.tau_opt},
              {"dm_opt_sq", b.dm_opt_sq}};
}

// Provenance stamp serialized next to every file output; identical manifest
// content (command, source, seed, runs) implies byte-identical data files.
struct RunManifest {
  std::string command;
  std::string parameter_source;
  uint64_t seed = 0;
  uint64_t n_runs = 0;
  std::vector<std::string> outputs;
  std::string timestamp;
};

inline json to_json(const RunManifest& m) {
  return json{{"schema_version", schema_version},
              {"tool_version", tool_version},
              {"command", m.command},
              {"parameter_source", m.parameter_source},
              {"seed", m.seed},
              {"n_runs", m.n_runs},
              {"outputs", m.outputs},
              {"timestamp", m.timestamp}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

inline void write_manifest(const RunManifest& m, const std::string& data_path) {
  write_text_file(data_path + ".manifest.json", to_json(m).dump(2) + "\n");
}

/// Measurement records as CSV with header "t,z".
inline std::vector<std::pair<double, double>> read_measurement_csv(std::istream& in) {
  std::vector<std::pair<double, double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.find("t") == 0) { first = false; continue; }
    first = false;
    std::istringstream ls(line);
    std::string a, b;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ','))
      throw std::invalid_argument("measurement CSV: expected two columns t,z");
    rows.emplace_back(std::stod(a), std::stod(b));
  }
  return rows;
}

inline std::string filter_trace_csv(const std::vector<FilterState>& states) {
  std::string out = "t,x_hat,p_hat,p11,p22,p12\n";
  for (const auto& s : states) {
    out += csv_row({format_double(s.t), format_double(s.x_hat(0)),
                    format_double(s.x_hat(1)), format_double(s.p_cov(0, 0)),
                    format_double(s.p_cov(1, 1)), format_double(s.p_cov(0, 1))});
  }
  return out;
}

inline std::string trajectory_csv(const TrajectoryRecord& rec) {
  std::string out = "t,x,p\n";
  for (std::size_t i = 0; i < rec.time.size(); ++i)
    out += csv_row({format_double(rec.time[i]), format_double(rec.x[i]),
                    format_double(rec.p[i])});
  return out;
}

} // namespace spinbus
