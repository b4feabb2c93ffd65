#include "fracsmp/smp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fracsmp {

Adapted noise_prediction(const Lattice& lat, int n) {
  const auto& basis = lat.basis();
  Adapted out = lat.constant(0.0, n);
  for (int k = 0; k < n; ++k) out = out + basis.c(n, k) * lat.noise_value(k);
  return out;
}

SmpResidual smp_residual(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                         const BsdeSolution& adjoint, const Lattice& lat) {
  const int N = model.horizon;
  if (u_star.horizon() != N || static_cast<int>(adjoint.Z.size()) != N || lat.depth() < N) {
    throw Error(Errc::DepthMismatch, "control, adjoint and lattice must share the model horizon");
  }
  SmpResidual res;
  res.stages.reserve(N);
  for (int n = 0; n < N; ++n) {
    const Adapted& x = x_star.stages[n];
    const Adapted& u = u_star.stages[n];
    const Adapted bu = evaluate(model.drift_u, n, x, u);
    const Adapted su = evaluate(model.diffusion_u, n, x, u);
    const Adapted lu = evaluate(model.running_cost_u, n, x, u);
    const Adapted& p = adjoint.Y[n];
    const Adapted& q = adjoint.Z[n];
    res.stages.push_back(bu * p + su * p * noise_prediction(lat, n) + lat.basis().b(n, n) * su * q + lu);
  }
  return res;
}

DualityTerms duality_terms(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                           const BsdeSolution& adjoint, const VariationProcess& var, const ControlProcess& v,
                           const Lattice& lat) {
  const int N = model.horizon;
  DualityTerms t;
  t.terminal = expectation(lat, map(x_star.stages[N], [&](double x) { return model.terminal_cost_x(x); }) *
                                    var.stages[N]);
  for (int n = 0; n < N; ++n) {
    const Adapted& x = x_star.stages[n];
    const Adapted& u = u_star.stages[n];
    const Adapted& p = adjoint.Y[n];
    const Adapted& q = adjoint.Z[n];
    const Adapted& xi = lat.noise_value(n);
    const Adapted& eta = lat.white_value(n);
    const Adapted su_v = evaluate(model.diffusion_u, n, x, u) * v.stages[n];
    t.running_x += expectation(lat, evaluate(model.running_cost_x, n, x, u) * var.stages[n]);
    t.drift_u += expectation(lat, evaluate(model.drift_u, n, x, u) * p * v.stages[n]);
    t.diffusion_p += expectation(lat, su_v * p * xi);
    t.diffusion_q += expectation(lat, su_v * q * eta * xi);
  }
  return t;
}

DirectionalDerivative directional_derivative(const ModelSpec& model, const ControlProcess& u_star,
                                             const ControlProcess& v, const Lattice& lat) {
  const int N = model.horizon;
  const StateProcess x_star = forward(model, u_star, lat);
  const VariationProcess var = variation(model, u_star, x_star, v, lat);
  const BsdeSolution adjoint = solve_adjoint(model, u_star, x_star, lat);
  const SmpResidual res = smp_residual(model, u_star, x_star, adjoint, lat);

  DirectionalDerivative d;
  for (int n = 0; n < N; ++n) {
    const Adapted& x = x_star.stages[n];
    const Adapted& u = u_star.stages[n];
    const Adapted& vn = v.stages[n];
    const Adapted lu = evaluate(model.running_cost_u, n, x, u);
    d.via_variation += expectation(lat, evaluate(model.running_cost_x, n, x, u) * var.stages[n] + lu * vn);

    const Adapted& p = adjoint.Y[n];
    const Adapted& q = adjoint.Z[n];
    const Adapted& xi = lat.noise_value(n);
    const Adapted su = evaluate(model.diffusion_u, n, x, u);
    const Adapted integrand =
        evaluate(model.drift_u, n, x, u) * p + su * p * xi + su * q * lat.white_value(n) * xi + lu;
    d.via_adjoint += expectation(lat, integrand * vn);
    d.via_residual += expectation(lat, res.stages[n] * vn);
  }
  d.via_variation +=
      expectation(lat, map(x_star.stages[N], [&](double x) { return model.terminal_cost_x(x); }) * var.stages[N]);

  if (!(std::abs(d.via_variation - d.via_adjoint) <= kDualityTolerance)) {
    std::ostringstream os;
    os.precision(17);
    os << "variation route gives " << d.via_variation << ", adjoint route gives " << d.via_adjoint;
    throw Error(Errc::DualityMismatch, os.str());
  }
  return d;
}

StationarityReport check_stationarity(const SmpResidual& res, const ControlProcess& u_star,
                                      const ControlSet& control_set, double tol) {
  if (!(tol > 0.0)) throw Error(Errc::InvalidArgument, "stationarity tolerance must be positive");
  if (res.stages.size() != u_star.stages.size()) throw Error(Errc::DepthMismatch, "residual/control horizon mismatch");
  StationarityReport rep;
  for (int n = 0; n < static_cast<int>(res.stages.size()); ++n) {
    const Adapted& rho = res.stages[n];
    const Adapted u = u_star.stages[n].lifted(rho.level());
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
      StationarityEntry e;
      e.stage = n;
      e.node = std::size_t(i);
      e.rho = rho[i];
      e.control = u[i];
      const bool at_lower = control_set.is_box() && e.control - control_set.lower() <= kBoundaryTolerance;
      const bool at_upper = control_set.is_box() && control_set.upper() - e.control <= kBoundaryTolerance;
      if (at_lower && at_upper) {
        e.violation = 0.0;
      } else if (at_lower) {
        e.violation = std::max(0.0, -e.rho);
      } else if (at_upper) {
        e.violation = std::max(0.0, e.rho);
      } else {
        e.violation = std::abs(e.rho);
      }
      if (std::isnan(e.rho)) e.violation = std::numeric_limits<double>::infinity();
      e.pass = e.violation <= tol;
      rep.pass = rep.pass && e.pass;
      if (rep.worst_stage < 0 || e.violation > rep.worst_violation) {
        rep.worst_violation = e.violation;
        rep.worst_stage = n;
        rep.worst_node = e.node;
      }
      rep.entries.push_back(e);
    }
  }
  return rep;
}

namespace {

constexpr double kApproximateWolfe = 0.8;
constexpr double kResolvableDecrease = 100.0;

struct Iterate {
  ControlProcess u;
  double cost = 0.0;
  SmpResidual rho;
  StationarityReport report;
};

Iterate evaluate_iterate(const ModelSpec& model, ControlProcess u, const Lattice& lat, double tol) {
  Iterate it;
  const StateProcess x = forward(model, u, lat);
  it.cost = cost(model, u, x, lat);
  const BsdeSolution adjoint = solve_adjoint(model, u, x, lat);
  it.rho = smp_residual(model, u, x, adjoint, lat);
  it.report = check_stationarity(it.rho, u, model.control_set, tol);
  it.u = std::move(u);
  return it;
}

ControlProcess projected_step(const ControlProcess& u, const SmpResidual& rho, double step, const ControlSet& set) {
  ControlProcess out;
  out.stages.reserve(u.stages.size());
  for (std::size_t n = 0; n < u.stages.size(); ++n) {
    out.stages.push_back(map(u.stages[n], rho.stages[n], [&](double uv, double g) { return set.project(uv - step * g); }));
  }
  return out;
}

}  // namespace

OptimizeResult optimize(const ModelSpec& model, const ControlProcess& u_init, const Lattice& lat,
                        const OptimizeOptions& options) {
  for (int n = 0; n < u_init.horizon(); ++n) {
    const auto& vals = u_init.stages[n].values();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      if (!model.control_set.contains(vals(i))) {
        std::ostringstream os;
        os << "initial control " << vals(i) << " at stage " << n << " is outside the control set";
        throw Error(Errc::OutOfControlSet, os.str());
      }
    }
  }

  Iterate current = evaluate_iterate(model, u_init, lat, options.tolerance);
  OptimizeResult result;
  result.trace.push_back({0, current.cost, 0.0, current.report.worst_violation});

  double step = options.initial_step;
  int iter = 0;
  while (!current.report.pass && iter < options.max_iter) {
    ++iter;
    double trial = iter == 1 ? options.initial_step : 2.0 * step;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, trial *= 0.5) {
      ControlProcess candidate = projected_step(current.u, current.rho, trial, model.control_set);
      double slope = 0.0;
      for (std::size_t n = 0; n < candidate.stages.size(); ++n) {
        slope += expectation(lat, current.rho.stages[n] * (candidate.stages[n] - current.u.stages[n]));
      }
      const double candidate_cost = cost(model, candidate, lat);
      // Close to a stationary point the predicted decrease drops below the
      // rounding error of J, and the cost alone can no longer rank a trial.
      // There the trial must stay within a few ulps of J and the slope along
      // the step, taken at the trial point, must show that it did not overshoot
      // the one-dimensional minimizer (approximate Wolfe condition of Hager and
      // Zhang).
      const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(current.cost);
      if (-slope > kResolvableDecrease * slack) {
        if (candidate_cost <= current.cost + options.armijo * slope) {
          current = evaluate_iterate(model, std::move(candidate), lat, options.tolerance);
          step = trial;
          accepted = true;
          break;
        }
        continue;
      }
      if (slope < 0.0 && candidate_cost <= current.cost + slack) {
        Iterate next = evaluate_iterate(model, std::move(candidate), lat, options.tolerance);
        double slope_next = 0.0;
        for (std::size_t n = 0; n < next.u.stages.size(); ++n) {
          slope_next += expectation(lat, next.rho.stages[n] * (next.u.stages[n] - current.u.stages[n]));
        }
        if (slope_next <= -kApproximateWolfe * slope) {
          current = std::move(next);
          step = trial;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "backtracking exhausted " << options.max_halvings << " halvings at iteration " << iter
         << " (worst residual " << current.report.worst_violation << ")";
      throw Error(Errc::NoDescent, os.str());
    }
    result.trace.push_back({iter, current.cost, step, current.report.worst_violation});
  }

  result.iterations = iter;
  result.converged = current.report.pass;
  result.cost = current.cost;
  result.stationarity = std::move(current.report);
  result.control = std::move(current.u);
  return result;
}

}  // namespace fracsmp
