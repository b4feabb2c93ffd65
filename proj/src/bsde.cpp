#include "fracsmp/bsde.hpp"

#include <memory>
#include <sstream>

namespace fracsmp {

namespace {

// y and z are both at level m.
Adapted evaluate_coefficient(const DriverSpec::Coefficient& c, int m, const Adapted& y, const Adapted& z) {
  VectorX<double> out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = c(m, std::size_t(i), y[i], z[i]);
  return Adapted(y.order(), m, std::move(out));
}

}  // namespace

BsdeSolution solve_bsde(const DriverSpec& driver, const Lattice& lat) {
  const int N = driver.horizon;
  if (N < 1) throw Error(Errc::InvalidArgument, "BSDE horizon must be >= 1");
  const int needed = driver.terminal_noise_free ? N : N + 1;
  if (lat.depth() < needed) {
    std::ostringstream os;
    os << "BSDE with horizon " << N << (driver.terminal_noise_free ? "" : " and terminal noise")
       << " needs lattice depth " << needed << ", got " << lat.depth();
    throw Error(Errc::DepthMismatch, os.str());
  }
  if (driver.terminal.level() > N || driver.terminal.order() != lat.order()) {
    throw Error(Errc::LevelMismatch, "terminal value must be F_N-measurable on this lattice");
  }
  if (!driver.terminal.all_finite()) throw Error(Errc::NonFiniteValue, "terminal value is not finite");

  BsdeSolution sol;
  sol.Y.resize(N + 1);
  sol.Z.resize(N);
  sol.R.resize(N);
  sol.Y[N] = driver.terminal.lifted(N);

  for (int n = N - 1; n >= 0; --n) {
    const int m = n + 1;
    const Adapted& y = sol.Y[m];
    const Adapted z = m == N ? lat.constant(0.0, N) : sol.Z[m];

    Adapted rhs = y;
    if (driver.f) rhs = rhs + evaluate_coefficient(driver.f, m, y, z);
    if (driver.g && !(m == N && driver.terminal_noise_free)) {
      rhs = rhs + evaluate_coefficient(driver.g, m, y, z) * lat.noise_value(m);
    }
    if (!rhs.all_finite()) {
      std::ostringstream os;
      os << "right-hand side of step " << n << " is not finite";
      throw Error(Errc::NonFiniteValue, os.str());
    }

    const Adapted& eta = lat.white_value(n);
    sol.Y[n] = condexp(lat, rhs, n);
    sol.Z[n] = condexp(lat, eta * rhs, n);
    sol.R[n] = rhs - sol.Y[n] - sol.Z[n] * eta;
  }
  return sol;
}

ResidualChecks residual_checks(const BsdeSolution& sol, int n, const Lattice& lat) {
  const Adapted& r = sol.R.at(n);
  return {condexp(lat, r, n), condexp(lat, lat.white_value(n) * r, n)};
}

OrthogonalityReport orthogonality(const BsdeSolution& sol, const Lattice& lat) {
  OrthogonalityReport rep;
  for (int n = 0; n < static_cast<int>(sol.R.size()); ++n) {
    const auto checks = residual_checks(sol, n, lat);
    rep.mean_check = std::max(rep.mean_check, checks.mean.values().cwiseAbs().maxCoeff());
    rep.eta_check = std::max(rep.eta_check, checks.eta.values().cwiseAbs().maxCoeff());
  }
  return rep;
}

DriverSpec adjoint_driver(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                          const WhiteningBasis<double>& basis) {
  const int N = model.horizon;
  if (u_star.horizon() != N || static_cast<int>(x_star.stages.size()) != N + 1) {
    throw Error(Errc::DepthMismatch, "control/state horizon does not match the model");
  }
  if (basis.size() < N) throw Error(Errc::DepthMismatch, "whitening basis is smaller than the horizon");
  check_terminal_condition(model);

  struct Coefficients {
    std::vector<Adapted> bx, sx, lx;
    std::vector<double> diag;
  };
  auto coeffs = std::make_shared<Coefficients>();
  coeffs->bx.resize(N);
  coeffs->sx.resize(N);
  coeffs->lx.resize(N);
  coeffs->diag.resize(N);
  for (int m = 1; m < N; ++m) {
    const Adapted& x = x_star.stages[m];
    const Adapted& u = u_star.stages[m];
    coeffs->bx[m] = evaluate(model.drift_x, m, x, u);
    coeffs->sx[m] = evaluate(model.diffusion_x, m, x, u);
    coeffs->lx[m] = evaluate(model.running_cost_x, m, x, u);
    coeffs->diag[m] = basis.b(m, m);
  }

  DriverSpec d;
  d.horizon = N;
  d.terminal = map(x_star.stages[N], [&](double x) { return model.terminal_cost_x(x); });
  d.terminal_noise_free = true;
  d.f = [coeffs, N](int m, std::size_t node, double p, double q) {
    if (m >= N) return 0.0;
    const auto i = Eigen::Index(node);
    return coeffs->bx[m][i] * p + coeffs->diag[m] * coeffs->sx[m][i] * q + coeffs->lx[m][i];
  };
  d.g = [coeffs, N](int m, std::size_t node, double p, double) {
    if (m >= N) return 0.0;
    return coeffs->sx[m][Eigen::Index(node)] * p;
  };
  return d;
}

BsdeSolution solve_adjoint(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                           const Lattice& lat) {
  return solve_bsde(adjoint_driver(model, u_star, x_star, lat.basis()), lat);
}

}  // namespace fracsmp
