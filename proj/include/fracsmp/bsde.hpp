#pragma once

// Backward stochastic difference equations
//
//   Y_n + Z_n eta_n = Y_{n+1} + f(n+1, Y_{n+1}, Z_{n+1}) + g(n+1, Y_{n+1}, Z_{n+1}) xi_{n+1},
//   Y_N = y,  Z_N = 0,
//
// solved by projection: with RHS_n the right-hand side,
//
//   Y_n = E[RHS_n | F_n],  Z_n = E[eta_n RHS_n | F_n],  R_n = RHS_n - Y_n - Z_n eta_n.
//
// R_n need not vanish on a discrete filtration; it satisfies
// E[R_n | F_n] = E[eta_n R_n | F_n] = 0, which is all the duality argument uses.

#include <cstddef>
#include <functional>
#include <vector>

#include "fracsmp/dynamics.hpp"

namespace fracsmp {

struct DriverSpec {
  /// Coefficient at stage n evaluated at the level-n node `node`.
  using Coefficient = std::function<double(int n, std::size_t node, double y, double z)>;

  int horizon = 0;
  Adapted terminal;  // F_N-measurable
  Coefficient f;     // empty means zero
  Coefficient g;     // empty means zero
  // When false, g(N, .) multiplies xi_N and the lattice needs depth N+1.
  bool terminal_noise_free = true;
};

struct BsdeSolution {
  std::vector<Adapted> Y;  // Y_n at level n, n in [0, N]
  std::vector<Adapted> Z;  // Z_n at level n, n in [0, N-1]
  std::vector<Adapted> R;  // orthogonal residual of step n
};

BsdeSolution solve_bsde(const DriverSpec& driver, const Lattice& lat);

/// E[R_n | F_n] and E[eta_n R_n | F_n] for one stage.
struct ResidualChecks {
  Adapted mean;
  Adapted eta;
};
ResidualChecks residual_checks(const BsdeSolution& sol, int n, const Lattice& lat);

/// Largest nodewise |E[R_n|F_n]| and |E[eta_n R_n|F_n]| over all stages.
struct OrthogonalityReport {
  double mean_check = 0.0;
  double eta_check = 0.0;
  double worst() const noexcept { return std::max(mean_check, eta_check); }
};
OrthogonalityReport orthogonality(const BsdeSolution& sol, const Lattice& lat);

/// Adjoint equation for (u*, X*): terminal Phi_x(X*_N) and, for m = n+1 < N,
///   f(m, p, q) = b_x*(m) p + b(m,m) sigma_x*(m) q + l_x*(m),   g(m, p, q) = sigma_x*(m) p.
/// Stage-N coefficients vanish; throws TerminalConditionViolated when the model
/// does not satisfy that.
DriverSpec adjoint_driver(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                          const WhiteningBasis<double>& basis);

/// adjoint_driver + solve_bsde.
BsdeSolution solve_adjoint(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                           const Lattice& lat);

}  // namespace fracsmp
