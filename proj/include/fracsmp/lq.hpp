#pragma once

// Linear-quadratic problem
//   X_{n+1} = X_n + A_n X_n + B_n u_n + (C_n X_n + D_n u_n) xi_n,   X_0 = x,
//   J(u) = 1/2 E[ sum_n (Q_n X_n^2 + R_n u_n^2) + G X_N^2 ],
// solved through the explicit control law
//   u_n = -R_n^{-1} [ B_n p_n + D_n p_n sum_{k<n} c(n,k) xi_k + b(n,n) D_n q_n ]
// with (p, q) the adjoint of the current iterate.

#include <cstdint>
#include <vector>

#include "fracsmp/smp.hpp"

namespace fracsmp {

struct LqSpec {
  int horizon = 0;
  std::vector<double> A, B, C, D, Q, R;  // stages 0..N-1
  double G = 0.0;
  double x = 0.0;

  /// Throws InvalidSpec unless sizes match, Q_n >= 0, R_n > 0 and G >= 0.
  void validate() const;
  double min_control_weight() const;
};

/// The LQ problem as a general model (coefficients vanish at stage N).
ModelSpec lq_model(const LqSpec& spec);

/// Lattice of depth N over a whitening basis of size N+1.
Lattice lq_lattice(const LqSpec& spec, const WhiteningBasis<double>& basis, const QuadratureRule<double>& rule);

struct LqOptions {
  double damping = 0.5;
  double tolerance = 1e-10;
  int max_iter = 500;
  // Halve the damping whenever the R-weighted L2 norm of u - u_candidate grows.
  bool adaptive_damping = true;
};

struct LqSolution {
  ControlProcess control;
  StateProcess state;
  BsdeSolution adjoint;
  double cost = 0.0;
  int iterations = 0;
  double residual = 0.0;  // final max nodewise |u - u_candidate|
  double damping = 0.0;   // damping in effect at termination
  std::vector<double> residual_history;  // per iteration, starting with the initial control
  std::vector<double> cost_history;
};

/// Right-hand side of the control law for a given state and adjoint.
ControlProcess lq_candidate(const LqSpec& spec, const BsdeSolution& adjoint, const Lattice& lat);

/// Damped fixed-point iteration u <- (1-d) u + d u_candidate. Throws
/// NotConverged after max_iter iterations.
LqSolution lq_fixed_point(const LqSpec& spec, const Lattice& lat, const LqOptions& options = {});
LqSolution lq_fixed_point(const LqSpec& spec, const Lattice& lat, const ControlProcess& start,
                          const LqOptions& options = {});

/// u_0* = -G[(1+A_0)B_0 + C_0 D_0] x / (R_0 + G(B_0^2 + D_0^2)); throws WrongHorizon unless N = 1.
double one_step_closed_form(const LqSpec& spec);

struct SufficiencyTrial {
  int trial = 0;
  double eps = 0.0;
  double cost = 0.0;
  double gain = 0.0;        // J(u) - J(u*)
  double quadratic = 0.0;   // 1/2 E sum R_n (u_n - u*_n)^2
  bool pass = true;
};

struct SufficiencyReport {
  bool pass = true;
  double optimal_cost = 0.0;
  double min_gain = 0.0;
  double worst_quadratic_gap = 0.0;  // min over trials of gain - quadratic
  std::vector<SufficiencyTrial> trials;
};

/// J(u* + eps v) >= J(u*) - 1e-10 and J(u) - J(u*) >= 1/2 E sum R (du)^2 - 1e-9
/// for `trials` random adapted directions v and eps in {1, 0.1, 0.01}.
SufficiencyReport verify_sufficiency(const LqSpec& spec, const ControlProcess& u_star, const Lattice& lat,
                                     int trials, std::uint64_t seed);

struct UniquenessReport {
  bool pass = true;
  double max_spread = 0.0;             // nodewise max distance between fixed points
  double worst_parallelogram_slack = 0.0;
  std::vector<int> iterations;
  std::vector<double> costs;
};

/// Runs the fixed point from every start, requires agreement to 1e-6, and
/// checks J(u1) + J(u2) >= 2 J((u1+u2)/2) + (min R / 4) E sum (u1-u2)^2 - 1e-9
/// on every pair of starts.
UniquenessReport verify_uniqueness(const LqSpec& spec, const Lattice& lat, const std::vector<ControlProcess>& starts,
                                   const LqOptions& options = {});

/// Starts: u = 0 followed by `starts - 1` random controls drawn from `seed`.
UniquenessReport verify_uniqueness(const LqSpec& spec, const Lattice& lat, int starts, std::uint64_t seed,
                                   const LqOptions& options = {});

}  // namespace fracsmp
