#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fracsmp/lattice.hpp"

namespace fracsmp {

/// Closed convex control set: the whole line or an interval.
class ControlSet {
 public:
  static ControlSet unconstrained() { return ControlSet(); }
  static ControlSet box(double lo, double hi);

  bool is_box() const noexcept { return box_; }
  double lower() const noexcept { return lo_; }
  double upper() const noexcept { return hi_; }

  bool contains(double u, double slack = 1e-12) const noexcept {
    return !box_ || (u >= lo_ - slack && u <= hi_ + slack);
  }
  double project(double u) const noexcept { return box_ ? std::clamp(u, lo_, hi_) : u; }

 private:
  bool box_ = false;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

/// Controlled scalar model X_{n+1} = X_n + b(n,X_n,u_n) + sigma(n,X_n,u_n) xi_n
/// with cost E[sum_n l(n,X_n,u_n) + Phi(X_N)]. Coefficient callables must be pure.
struct ModelSpec {
  using StageFn = std::function<double(int n, double x, double u)>;
  using TerminalFn = std::function<double(double x)>;

  std::string name;
  int horizon = 0;
  double initial_state = 0.0;

  StageFn drift, diffusion, running_cost;
  TerminalFn terminal_cost;

  StageFn drift_x, drift_u;
  StageFn diffusion_x, diffusion_u;
  StageFn running_cost_x, running_cost_u;
  TerminalFn terminal_cost_x;

  ControlSet control_set;
};

/// Spot checks on 16 pseudo-random points: coefficients vanish at stage N and
/// the analytic derivatives agree with central differences (relative 1e-5).
/// Throws TerminalConditionViolated or DerivativeMismatch.
void validate_model(const ModelSpec& model, std::uint64_t seed = 0x5eed);

/// Only the stage-N vanishing check of validate_model.
void check_terminal_condition(const ModelSpec& model, std::uint64_t seed = 0x5eed);

struct ControlProcess {
  std::vector<Adapted> stages;  // u_n at level n, n in [0, N-1]

  int horizon() const noexcept { return static_cast<int>(stages.size()); }
  static ControlProcess constant(const Lattice& lat, int horizon, double value);
};

struct StateProcess {
  std::vector<Adapted> stages;  // X_n at level n, n in [0, N]
};

struct VariationProcess {
  std::vector<Adapted> stages;  // V_n at level n, V_0 = 0
};

/// Control with every stage lifted to its own level; throws LevelMismatch if
/// some u_n sits deeper than n.
ControlProcess make_control(std::vector<Adapted> stages);

/// Uniform random adapted control with entries in [lo, hi].
ControlProcess random_control(const Lattice& lat, int horizon, double lo, double hi, std::uint64_t seed);

ControlProcess operator+(const ControlProcess& u, const ControlProcess& v);
ControlProcess operator-(const ControlProcess& u, const ControlProcess& v);
ControlProcess operator*(double s, const ControlProcess& u);

/// E sum_n (u_n - v_n)^2 and the nodewise max |u_n - v_n|.
double mean_square_distance(const Lattice& lat, const ControlProcess& u, const ControlProcess& v);
double max_abs_distance(const ControlProcess& u, const ControlProcess& v);

/// Nodewise phi(n, X_n, u_n) at level n.
Adapted evaluate(const ModelSpec::StageFn& phi, int n, const Adapted& x, const Adapted& u);

StateProcess forward(const ModelSpec& model, const ControlProcess& u, const Lattice& lat);

double cost(const ModelSpec& model, const ControlProcess& u, const StateProcess& x, const Lattice& lat);

/// forward + cost.
double cost(const ModelSpec& model, const ControlProcess& u, const Lattice& lat);

VariationProcess variation(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                           const ControlProcess& v, const Lattice& lat);

/// u* + eps v; throws OutOfControlSet when the result leaves the control set.
ControlProcess perturb(const ControlProcess& u_star, const ControlProcess& v, double eps,
                       const ControlSet& control_set = ControlSet::unconstrained());

/// sum_n E|X^eps_n - X*_n|^2.
double state_deviation(const Lattice& lat, const StateProcess& x_eps, const StateProcess& x_star);

/// sum_n E|(X^eps_n - X*_n)/eps - V_n|^2.
double variation_error(const Lattice& lat, const StateProcess& x_eps, const StateProcess& x_star,
                       const VariationProcess& v, double eps);

/// b = sin x + u, sigma = c u, l = u^2/2, Phi = x^2/2 on stages < N, zero at N.
ModelSpec sin_drift_model(int horizon, double initial_state, double c,
                          ControlSet control_set = ControlSet::unconstrained());

}  // namespace fracsmp
