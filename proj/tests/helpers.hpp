#pragma once

#include "fracsmp/lq.hpp"

namespace testing {

inline fracsmp::Lattice make_lattice(double h, int depth, int basis_size, int q = 3) {
  using namespace fracsmp;
  return Lattice(depth, gauss_hermite(q), whiten(fgn_covariance(HurstParameter(h), basis_size)));
}

inline fracsmp::Lattice identity_lattice(int depth, int q = 3) {
  using namespace fracsmp;
  return Lattice(depth, gauss_hermite(q), whiten(custom_covariance(MatrixX<double>::Identity(depth + 1, depth + 1))));
}

inline fracsmp::LqSpec random_lq(fracsmp::SplitMix64& rng, int N, double r_lo = 0.5, double r_hi = 2.0) {
  fracsmp::LqSpec s;
  s.horizon = N;
  for (int n = 0; n < N; ++n) {
    s.A.push_back(rng.uniform(-0.5, 0.5));
    s.B.push_back(rng.uniform(-1.0, 1.0));
    s.C.push_back(rng.uniform(-0.5, 0.5));
    s.D.push_back(rng.uniform(-0.5, 0.5));
    s.Q.push_back(rng.uniform(0.0, 1.0));
    s.R.push_back(rng.uniform(r_lo, r_hi));
  }
  s.G = rng.uniform(0.0, 1.5);
  s.x = rng.uniform(-1.0, 1.0);
  return s;
}

// A model assembled from plain callables, for hand-computable cases.
inline fracsmp::ModelSpec simple_model(int N, double x0, double drift, double diffusion, bool quadratic_terminal) {
  fracsmp::ModelSpec m;
  m.name = "simple";
  m.horizon = N;
  m.initial_state = x0;
  auto stage = [N](double v) { return [=](int n, double, double) { return n < N ? v : 0.0; }; };
  auto zero = [](int, double, double) { return 0.0; };
  m.drift = stage(drift);
  m.diffusion = stage(diffusion);
  m.running_cost = zero;
  m.drift_x = m.drift_u = m.diffusion_x = m.diffusion_u = m.running_cost_x = m.running_cost_u = zero;
  if (quadratic_terminal) {
    m.terminal_cost = [](double x) { return x * x; };
    m.terminal_cost_x = [](double x) { return 2.0 * x; };
  } else {
    m.terminal_cost = [](double x) { return x; };
    m.terminal_cost_x = [](double) { return 1.0; };
  }
  return m;
}

}  // namespace testing
