#pragma once

// Text formats: CSV dumps with 17 significant digits and JSON problem configs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracsmp/lq.hpp"

namespace fracsmp::io {

using Json = nlohmann::ordered_json;

/// Shortest round-trip-safe text with 17 significant digits.
std::string format_double(double v);

void ensure_directory(const std::filesystem::path& dir);
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// `n,k,value`, one row per nonzero entry in row-major order.
std::string matrix_csv(const MatrixX<double>& m);

/// Dense rows of comma-separated numbers, or the `n,k,value` triplet form.
MatrixX<double> parse_matrix_csv(const std::string& text);

/// `path_index,stage,eta,xi,probability` for every path and stage.
std::string lattice_paths_csv(const Lattice& lat);

/// `stage,node_index,value,probability`.
std::string process_csv(const std::vector<Adapted>& stages, const Lattice& lat);

/// Reads `stage,node_index,value[,probability]` into a control on `lat`.
ControlProcess parse_control_csv(const std::string& text, const Lattice& lat, int horizon);

/// `stage,node_index,Y,Z,R_mean_check,R_eta_check`.
std::string bsde_csv(const BsdeSolution& sol, const Lattice& lat);

/// `stage,node_index,rho,u_star,classification,violation`.
std::string stationarity_csv(const StationarityReport& rep);

/// `iter,J,step,worst_residual`.
std::string trace_csv(const std::vector<TraceRow>& trace);

/// Parses JSON; syntax errors become ConfigError with line and column.
Json parse_json(const std::string& text, const std::string& source);

struct RunSettings {
  double hurst = 0.5;
  int quadrature_order = 3;
  std::uint64_t seed = 0;
};

/// Dynamics config: horizon, initial_state, model, control_set, hurst,
/// quadrature_order, plus optional optimizer keys tolerance/max_iter/seed.
struct ModelConfig {
  ModelSpec model;
  std::optional<LqSpec> lq;
  RunSettings run;
  OptimizeOptions optimizer;
};
ModelConfig parse_model_config(const Json& j);

/// LqSpec JSON (horizon, A, B, C, D, Q, R, G, x) plus optional hurst,
/// quadrature_order, seed, damping, tolerance, max_iter, trials, starts.
struct LqConfig {
  LqSpec spec;
  RunSettings run;
  LqOptions options;
  int trials = 50;
  int starts = 2;
};
LqConfig parse_lq_config(const Json& j);

/// Linear BSDE: f(n,y,z) = y[n-1] y + z[n-1] z + const[n-1] for n = 1..N (same for g);
/// terminal = constant + sum xi[k] xi_k + sum eta[k] eta_k + sum xi_sq[k] xi_k^2.
struct LinearCoefficients {
  std::vector<double> y, z, c;
  bool zero_at(int n) const;
};
struct BsdeConfig {
  int horizon = 0;
  RunSettings run;
  double constant = 0.0;
  std::vector<double> xi, eta, xi_sq;
  LinearCoefficients f, g;
};
BsdeConfig parse_bsde_config(const Json& j);

/// Lattice of the depth the config needs (N, or N+1 with terminal noise).
Lattice bsde_lattice(const BsdeConfig& cfg);
DriverSpec make_driver(const BsdeConfig& cfg, const Lattice& lat);

}  // namespace fracsmp::io
