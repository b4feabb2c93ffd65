#pragma once

#include <cstddef>
#include <vector>

#include "fracsmp/bsde.hpp"

namespace fracsmp {

/// rho_n = b_u*(n) p_n + sigma_u*(n) p_n sum_{k<n} c(n,k) xi_k + b(n,n) sigma_u*(n) q_n + l_u*(n),
/// the F_n-conditional mean of the integrand multiplying v_n in dJ(u*; v).
struct SmpResidual {
  std::vector<Adapted> stages;  // rho_n at level n
};

/// sum_{k<n} c(n,k) xi_k = E[xi_n | F_n], at level n.
Adapted noise_prediction(const Lattice& lat, int n);

SmpResidual smp_residual(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                         const BsdeSolution& adjoint, const Lattice& lat);

/// The two sides of the duality identity
///   E[Phi_x(X*_N) V_N] = -E sum l_x* V + E sum b_u* p v + E sum sigma_u* p v xi + E sum sigma_u* q v eta xi.
struct DualityTerms {
  double terminal = 0.0;       // E[Phi_x(X*_N) V_N]
  double running_x = 0.0;      // E sum l_x* V
  double drift_u = 0.0;        // E sum b_u* p v
  double diffusion_p = 0.0;    // E sum sigma_u* p v xi
  double diffusion_q = 0.0;    // E sum sigma_u* q v eta xi

  double rhs() const noexcept { return -running_x + drift_u + diffusion_p + diffusion_q; }
  double gap() const noexcept { return terminal - rhs(); }
};

DualityTerms duality_terms(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                           const BsdeSolution& adjoint, const VariationProcess& var, const ControlProcess& v,
                           const Lattice& lat);

inline constexpr double kDualityTolerance = 1e-9;

struct DirectionalDerivative {
  double via_variation = 0.0;  // E[sum (l_x V + l_u v) + Phi_x V_N]
  double via_adjoint = 0.0;    // E sum [b_u p + sigma_u p xi + sigma_u q eta xi + l_u] v
  double via_residual = 0.0;   // E sum rho v
};

/// dJ(u* + eps v)/d eps at 0 by the variation route and by the adjoint route.
/// Throws DualityMismatch when they differ by more than 1e-9.
DirectionalDerivative directional_derivative(const ModelSpec& model, const ControlProcess& u_star,
                                             const ControlProcess& v, const Lattice& lat);

/// Nodes closer than this to a bound count as sitting on it.
inline constexpr double kBoundaryTolerance = 1e-9;

struct StationarityEntry {
  int stage = 0;
  std::size_t node = 0;
  double rho = 0.0;
  double control = 0.0;
  bool pass = true;
  double violation = 0.0;
};

struct StationarityReport {
  bool pass = true;
  double worst_violation = 0.0;
  int worst_stage = -1;
  std::size_t worst_node = 0;
  std::vector<StationarityEntry> entries;
};

/// Interior nodes need |rho| <= tol; at the lower bound rho >= -tol; at the
/// upper bound rho <= tol.
StationarityReport check_stationarity(const SmpResidual& res, const ControlProcess& u_star,
                                      const ControlSet& control_set, double tol);

struct OptimizeOptions {
  double tolerance = 1e-8;
  int max_iter = 5000;
  double armijo = 1e-4;
  int max_halvings = 40;
  double initial_step = 1.0;
};

struct TraceRow {
  int iter = 0;
  double cost = 0.0;
  double step = 0.0;
  double worst_residual = 0.0;
};

struct OptimizeResult {
  ControlProcess control;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  StationarityReport stationarity;
  std::vector<TraceRow> trace;
};

/// Projected gradient descent on J with the residual rho as gradient and
/// Armijo backtracking. Stops once check_stationarity passes at the tolerance
/// or after max_iter iterations (converged = false). Throws NoDescent when
/// backtracking runs out of halvings.
OptimizeResult optimize(const ModelSpec& model, const ControlProcess& u_init, const Lattice& lat,
                        const OptimizeOptions& options = {});

}  // namespace fracsmp
