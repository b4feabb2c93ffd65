#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "fracsmp/io.hpp"
#include "fracsmp/selftest.hpp"

namespace fs = std::filesystem;
using namespace fracsmp;
using io::Json;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4, kNotConverged = 5 };

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::NotPositiveDefinite:
    case Errc::NonFiniteValue:
    case Errc::DualityMismatch:
      return kNumeric;
    case Errc::IoError:
      return kIo;
    case Errc::NotConverged:
    case Errc::NoDescent:
      return kNotConverged;
    default:
      return kConfig;
  }
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<int> quadrature_order;
  std::string out;
};

void apply_globals(const Globals& g, io::RunSettings& run) {
  if (g.seed) run.seed = *g.seed;
  if (g.quadrature_order) run.quadrature_order = *g.quadrature_order;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw Error(Errc::ConfigError, "--out <dir> is required");
  io::ensure_directory(g.out);
  return fs::path(g.out);
}

Json load_config(const std::string& path) { return io::parse_json(io::read_file(path), path); }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Lattice model_lattice(int horizon, const io::RunSettings& run) {
  const auto basis = whiten(fgn_covariance(HurstParameter(run.hurst), horizon + 1));
  return Lattice(horizon, gauss_hermite(run.quadrature_order), basis);
}

int cmd_whiten(const Globals& g, std::optional<double> hurst, std::optional<int> steps, const std::string& cov_file) {
  if (hurst.has_value() == !cov_file.empty()) {
    throw Error(Errc::ConfigError, "give exactly one of --hurst or --cov-file");
  }
  CovarianceSpec<double> cov;
  if (hurst) {
    if (!steps) throw Error(Errc::ConfigError, "--steps is required with --hurst");
    if (*steps < 1) throw Error(Errc::ConfigError, "--steps must be >= 1");
    cov = fgn_covariance(HurstParameter(*hurst), *steps);
  } else {
    const MatrixX<double> m = io::parse_matrix_csv(io::read_file(cov_file));
    if (steps && *steps != m.rows()) throw Error(Errc::ConfigError, "--steps does not match the covariance file");
    cov = custom_covariance(m);
  }
  const fs::path out = require_out(g);
  const auto basis = whiten(cov);
  io::write_file(out / "sigma.csv", io::matrix_csv(cov.sigma));
  io::write_file(out / "b.csv", io::matrix_csv(basis.b));
  io::write_file(out / "a.csv", io::matrix_csv(basis.a));
  io::write_file(out / "c.csv", io::matrix_csv(basis.c));
  Json checks;
  checks["steps"] = cov.size();
  checks["max_bbT_minus_sigma"] = reconstruction_error(cov, basis);
  checks["max_ab_minus_I"] = inverse_error(basis);
  io::write_file(out / "checks.json", dump(checks));
  return kOk;
}

int cmd_solve_bsde(const Globals& g, const std::string& config) {
  io::BsdeConfig cfg = io::parse_bsde_config(load_config(config));
  apply_globals(g, cfg.run);
  const fs::path out = require_out(g);
  const Lattice lat = io::bsde_lattice(cfg);
  const BsdeSolution sol = solve_bsde(io::make_driver(cfg, lat), lat);
  const OrthogonalityReport orth = orthogonality(sol, lat);
  const bool pass = orth.worst() <= 1e-10;
  io::write_file(out / "bsde.csv", io::bsde_csv(sol, lat));
  Json rep;
  rep["horizon"] = cfg.horizon;
  rep["lattice_depth"] = lat.depth();
  rep["quadrature_order"] = lat.order();
  rep["Y0"] = sol.Y[0][0];
  rep["Z0"] = sol.Z.empty() ? 0.0 : sol.Z[0][0];
  rep["max_mean_check"] = orth.mean_check;
  rep["max_eta_check"] = orth.eta_check;
  rep["tolerance"] = 1e-10;
  rep["pass"] = pass;
  io::write_file(out / "orthogonality.json", dump(rep));
  return pass ? kOk : kNumeric;
}

std::string adjoint_csv(const BsdeSolution& adj, const Lattice& lat) {
  std::string csv = "stage,node_index,p,q,probability\n";
  for (std::size_t n = 0; n < adj.Y.size(); ++n) {
    const auto& prob = lat.probabilities(int(n));
    for (Eigen::Index i = 0; i < adj.Y[n].size(); ++i) {
      const double q = n < adj.Z.size() ? adj.Z[n][i] : 0.0;
      csv += std::to_string(n) + "," + std::to_string(i) + "," + io::format_double(adj.Y[n][i]) + "," +
             io::format_double(q) + "," + io::format_double(prob(i)) + "\n";
    }
  }
  return csv;
}

int cmd_lq(const Globals& g, const std::string& config, std::optional<double> damping) {
  io::LqConfig cfg = io::parse_lq_config(load_config(config));
  apply_globals(g, cfg.run);
  if (damping) cfg.options.damping = *damping;
  const fs::path out = require_out(g);
  const Lattice lat = model_lattice(cfg.spec.horizon, cfg.run);

  LqSolution sol;
  try {
    sol = lq_fixed_point(cfg.spec, lat, cfg.options);
  } catch (const Error& e) {
    if (e.code() == Errc::NotConverged) {
      Json rep;
      rep["converged"] = false;
      rep["message"] = e.what();
      io::write_file(out / "report.json", dump(rep));
    }
    throw;
  }
  const ModelSpec model = lq_model(cfg.spec);
  const SmpResidual res = smp_residual(model, sol.control, sol.state, sol.adjoint, lat);
  const StationarityReport stat = check_stationarity(res, sol.control, model.control_set, 1e-8);
  const SufficiencyReport suff = verify_sufficiency(cfg.spec, sol.control, lat, cfg.trials, cfg.run.seed);
  const UniquenessReport uniq = verify_uniqueness(cfg.spec, lat, cfg.starts, cfg.run.seed ^ 0x756e69ULL, cfg.options);

  io::write_file(out / "u_star.csv", io::process_csv(sol.control.stages, lat));
  io::write_file(out / "adjoint.csv", adjoint_csv(sol.adjoint, lat));
  std::string iters = "iter,J,residual\n";
  for (std::size_t i = 0; i < sol.cost_history.size(); ++i) {
    iters += std::to_string(i) + "," + io::format_double(sol.cost_history[i]) + "," +
             io::format_double(sol.residual_history[i]) + "\n";
  }
  io::write_file(out / "iterations.csv", iters);
  io::write_file(out / "stationarity.csv", io::stationarity_csv(stat));

  const bool pass = stat.pass && suff.pass && uniq.pass;
  Json rep;
  rep["converged"] = true;
  rep["J"] = sol.cost;
  rep["iterations"] = sol.iterations;
  rep["final_damping"] = sol.damping;
  rep["fixed_point_residual"] = sol.residual;
  rep["stationarity"] = {{"worst_residual", stat.worst_violation}, {"tolerance", 1e-8}, {"pass", stat.pass}};
  rep["sufficiency"] = {{"trials", cfg.trials},
                        {"min_gain", suff.min_gain},
                        {"worst_quadratic_gap", suff.worst_quadratic_gap},
                        {"pass", suff.pass}};
  rep["uniqueness"] = {{"starts", cfg.starts},
                       {"max_spread", uniq.max_spread},
                       {"worst_parallelogram_slack", uniq.worst_parallelogram_slack},
                       {"pass", uniq.pass}};
  rep["pass"] = pass;
  io::write_file(out / "report.json", dump(rep));
  return pass ? kOk : kNumeric;
}

Json stationarity_json(const StationarityReport& stat, double tol, double J) {
  Json rep;
  rep["J"] = J;
  rep["worst_violation"] = stat.worst_violation;
  rep["worst_stage"] = stat.worst_stage;
  rep["worst_node"] = stat.worst_node;
  rep["tolerance"] = tol;
  rep["pass"] = stat.pass;
  return rep;
}

int cmd_smp_check(const Globals& g, const std::string& config, const std::string& control) {
  io::ModelConfig cfg = io::parse_model_config(load_config(config));
  apply_globals(g, cfg.run);
  validate_model(cfg.model);
  const Lattice lat = model_lattice(cfg.model.horizon, cfg.run);
  const ControlProcess u = io::parse_control_csv(io::read_file(control), lat, cfg.model.horizon);
  for (int n = 0; n < u.horizon(); ++n)
    for (Eigen::Index i = 0; i < u.stages[n].size(); ++i)
      if (!cfg.model.control_set.contains(u.stages[n][i])) {
        throw Error(Errc::OutOfControlSet, "control at stage " + std::to_string(n) + ", node " + std::to_string(i) +
                                               " lies outside the control set");
      }
  const fs::path out = require_out(g);
  const StateProcess x = forward(cfg.model, u, lat);
  const BsdeSolution adj = solve_adjoint(cfg.model, u, x, lat);
  const SmpResidual res = smp_residual(cfg.model, u, x, adj, lat);
  const StationarityReport stat = check_stationarity(res, u, cfg.model.control_set, cfg.optimizer.tolerance);
  io::write_file(out / "stationarity.csv", io::stationarity_csv(stat));
  io::write_file(out / "adjoint.csv", adjoint_csv(adj, lat));
  io::write_file(out / "report.json", dump(stationarity_json(stat, cfg.optimizer.tolerance, cost(cfg.model, u, x, lat))));
  return stat.pass ? kOk : kNumeric;
}

int cmd_optimize(const Globals& g, const std::string& config) {
  io::ModelConfig cfg = io::parse_model_config(load_config(config));
  apply_globals(g, cfg.run);
  validate_model(cfg.model);
  const fs::path out = require_out(g);
  const Lattice lat = model_lattice(cfg.model.horizon, cfg.run);
  const ControlProcess u0 = ControlProcess::constant(lat, cfg.model.horizon, cfg.model.control_set.project(0.0));
  const OptimizeResult res = optimize(cfg.model, u0, lat, cfg.optimizer);
  io::write_file(out / "u_star.csv", io::process_csv(res.control.stages, lat));
  io::write_file(out / "trace.csv", io::trace_csv(res.trace));
  io::write_file(out / "stationarity.csv", io::stationarity_csv(res.stationarity));
  Json rep = stationarity_json(res.stationarity, cfg.optimizer.tolerance, res.cost);
  rep["iterations"] = res.iterations;
  rep["converged"] = res.converged;
  io::write_file(out / "report.json", dump(rep));
  if (!res.converged) {
    std::cerr << "error: NotConverged: optimizer stopped after " << res.iterations << " iterations with worst residual "
              << io::format_double(res.stationarity.worst_violation) << "\n";
    return kNotConverged;
  }
  return kOk;
}

int cmd_selftest(const Globals& g) {
  const auto report = selftest::run_acceptance(g.seed.value_or(0));
  for (const auto& c : report.criteria) std::cout << selftest::format_line(c) << "\n";
  if (!g.out.empty()) selftest::write_report(report, g.out);
  std::cout << (report.pass() ? "all criteria passed" : "some criteria FAILED") << std::endl;
  return report.pass() ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-time optimal control under fractional Gaussian noise"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed (u64)");
  app.add_option("--quadrature-order", g.quadrature_order, "Gauss-Hermite nodes per stage")->check(CLI::Range(1, 16));
  app.add_option("--out", g.out, "Output directory");

  std::optional<double> hurst;
  std::optional<int> steps;
  std::string cov_file;
  auto* whiten_cmd = app.add_subcommand("whiten", "Whitening coefficients of a noise covariance");
  whiten_cmd->add_option("--hurst", hurst, "Hurst parameter in (0,1)");
  whiten_cmd->add_option("--steps", steps, "Number of noise increments");
  whiten_cmd->add_option("--cov-file", cov_file, "Covariance matrix CSV (dense or n,k,value)");

  std::string config, control;
  std::optional<double> damping;
  auto* bsde_cmd = app.add_subcommand("solve-bsde", "Solve a linear BSDE on the lattice");
  bsde_cmd->add_option("--config", config, "JSON config")->required();
  auto* lq_cmd = app.add_subcommand("lq", "Solve and certify an LQ problem");
  lq_cmd->add_option("--config", config, "JSON LqSpec")->required();
  lq_cmd->add_option("--damping", damping, "Initial fixed-point damping in (0,1]");
  auto* smp_cmd = app.add_subcommand("smp-check", "Maximum-principle residual of a given control");
  smp_cmd->add_option("--config", config, "JSON model config")->required();
  smp_cmd->add_option("--control", control, "Control CSV (stage,node_index,value)")->required();
  auto* opt_cmd = app.add_subcommand("optimize", "Projected-gradient search for a stationary control");
  opt_cmd->add_option("--config", config, "JSON model config")->required();
  auto* self_cmd = app.add_subcommand("selftest", "Run the acceptance suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*whiten_cmd) return cmd_whiten(g, hurst, steps, cov_file);
    if (*bsde_cmd) return cmd_solve_bsde(g, config);
    if (*lq_cmd) return cmd_lq(g, config, damping);
    if (*smp_cmd) return cmd_smp_check(g, config, control);
    if (*opt_cmd) return cmd_optimize(g, config);
    if (*self_cmd) return cmd_selftest(g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kConfig;
}
