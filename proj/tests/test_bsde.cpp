#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace fracsmp;
using testing::make_lattice;

namespace {

double max_abs(const Adapted& v) { return v.values().cwiseAbs().maxCoeff(); }

DriverSpec martingale_driver(const Adapted& terminal, int N) {
  DriverSpec d;
  d.horizon = N;
  d.terminal = terminal;
  return d;
}

}  // namespace

TEST_CASE("constant terminal value") {
  const Lattice lat = make_lattice(0.7, 3, 3);
  const BsdeSolution sol = solve_bsde(martingale_driver(lat.constant(1.5, 3), 3), lat);
  for (int n = 0; n <= 3; ++n) CHECK(max_abs(sol.Y[n] + (-1.5)) <= 1e-15);
  for (int n = 0; n < 3; ++n) {
    CHECK(max_abs(sol.Z[n]) <= 1e-15);
    CHECK(max_abs(sol.R[n]) <= 1e-15);
  }
}

TEST_CASE("terminal eta_{N-1} is represented by a single Z") {
  const Lattice lat = make_lattice(0.3, 3, 3);
  const BsdeSolution sol = solve_bsde(martingale_driver(lat.white_value(2), 3), lat);
  CHECK(max_abs(sol.Y[2]) <= 1e-15);
  CHECK(max_abs(sol.Z[2] + (-1.0)) <= 1e-14);
  for (int n = 0; n < 2; ++n) {
    CHECK(max_abs(sol.Y[n]) <= 1e-15);
    CHECK(max_abs(sol.Z[n]) <= 1e-15);
  }
  for (const auto& r : sol.R) CHECK(max_abs(r) <= 1e-14);
}

TEST_CASE("terminal xi_1 with N = 2") {
  const Lattice lat = make_lattice(0.7, 2, 2);
  const auto& b = lat.basis().b;
  const BsdeSolution sol = solve_bsde(martingale_driver(lat.noise_value(1), 2), lat);
  CHECK(max_abs_difference(sol.Y[1], b(1, 0) * lat.white_value(0)) <= 1e-15);
  CHECK(max_abs(sol.Z[1] + (-b(1, 1))) <= 1e-14);
  CHECK(std::abs(sol.Y[0][0]) <= 1e-15);
  CHECK(std::abs(sol.Z[0][0] - b(1, 0)) <= 1e-14);
}

TEST_CASE("orthogonality of the residual for a nonlinear driver") {
  const Lattice lat = make_lattice(0.7, 3, 4);
  DriverSpec d;
  d.horizon = 3;
  const Adapted& xi2 = lat.noise_value(2);
  d.terminal = xi2 * xi2 * xi2 + lat.noise_value(0);
  d.f = [](int, std::size_t, double y, double z) { return std::sin(y) + 0.3 * z * z; };
  d.g = [](int n, std::size_t, double y, double) { return n < 3 ? 0.5 * y : 0.0; };
  const BsdeSolution sol = solve_bsde(d, lat);
  CHECK(orthogonality(sol, lat).worst() <= 1e-10);
  for (int n = 0; n < 3; ++n) {
    CHECK(sol.Y[n].level() == n);
    CHECK(sol.Z[n].level() == n);
  }
}

TEST_CASE("a terminal noise term needs one more stage") {
  const int N = 2;
  const Lattice deep = make_lattice(0.7, N + 1, N + 1);
  DriverSpec d;
  d.horizon = N;
  d.terminal = deep.noise_value(1).lifted(N);
  d.g = [](int, std::size_t, double y, double) { return 0.2 * y + 1.0; };
  d.terminal_noise_free = false;
  const BsdeSolution sol = solve_bsde(d, deep);
  CHECK(orthogonality(sol, deep).worst() <= 1e-10);
  CHECK_THROWS_AS(solve_bsde(d, make_lattice(0.7, N, N)), Error);
}

TEST_CASE("linearity of the solution map in the terminal value") {
  const Lattice lat = make_lattice(0.3, 3, 3);
  SplitMix64 rng(5);
  auto driver = [&](const Adapted& y) {
    DriverSpec d;
    d.horizon = 3;
    d.terminal = y;
    d.f = [](int n, std::size_t, double yv, double zv) { return 0.1 * n * yv - 0.4 * zv; };
    d.g = [](int n, std::size_t, double yv, double zv) { return n < 3 ? 0.3 * yv + 0.2 * zv : 0.0; };
    return d;
  };
  for (int trial = 0; trial < 5; ++trial) {
    Adapted y1 = lat.constant(0.0, 3), y2 = lat.constant(0.0, 3);
    for (Eigen::Index i = 0; i < y1.size(); ++i) y1[i] = rng.uniform(-1, 1), y2[i] = rng.uniform(-1, 1);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const BsdeSolution s1 = solve_bsde(driver(y1), lat), s2 = solve_bsde(driver(y2), lat);
    const BsdeSolution s = solve_bsde(driver(a * y1 + b * y2), lat);
    for (int n = 0; n < 3; ++n) {
      CHECK(max_abs_difference(s.Y[n], a * s1.Y[n] + b * s2.Y[n]) <= 1e-12);
      CHECK(max_abs_difference(s.Z[n], a * s1.Z[n] + b * s2.Z[n]) <= 1e-12);
    }
  }
}

TEST_CASE("re-solving is bit-identical") {
  const Lattice lat = make_lattice(0.7, 3, 3);
  DriverSpec d = martingale_driver(lat.noise_value(2) * lat.noise_value(0), 3);
  d.f = [](int, std::size_t, double y, double z) { return std::cos(y) * z; };
  const BsdeSolution a = solve_bsde(d, lat), b = solve_bsde(d, lat);
  for (int n = 0; n < 3; ++n) {
    CHECK(max_abs_difference(a.Y[n], b.Y[n]) == 0.0);
    CHECK(max_abs_difference(a.Z[n], b.Z[n]) == 0.0);
  }
}

TEST_CASE("adjoint without state feedback is constant") {
  const Lattice lat = make_lattice(0.7, 3, 4);
  const ModelSpec m = testing::simple_model(3, 0.5, 0.2, 0.7, false);
  const ControlProcess u = ControlProcess::constant(lat, 3, 0.0);
  const BsdeSolution adj = solve_adjoint(m, u, forward(m, u, lat), lat);
  for (int n = 0; n < 3; ++n) {
    CHECK(max_abs(adj.Y[n] + (-1.0)) <= 1e-15);
    CHECK(max_abs(adj.Z[n]) <= 1e-15);
  }
}

TEST_CASE("adjoint of the one-step LQ problem") {
  LqSpec s{1, {0.4}, {0.9}, {-0.3}, {0.6}, {0.5}, {1.2}, 1.7, 0.8};
  const Lattice lat = make_lattice(0.7, 1, 2);
  const double u0 = -0.35;
  const ModelSpec m = lq_model(s);
  const ControlProcess u = ControlProcess::constant(lat, 1, u0);
  const BsdeSolution adj = solve_adjoint(m, u, forward(m, u, lat), lat);
  CHECK(std::abs(adj.Y[0][0] - s.G * ((1 + s.A[0]) * s.x + s.B[0] * u0)) <= 1e-14);
}

TEST_CASE("adjoint driver refuses models that are live at stage N") {
  const Lattice lat = make_lattice(0.7, 2, 3);
  ModelSpec m = sin_drift_model(2, 0.1, 0.5);
  m.diffusion_x = [](int, double, double) { return 1.0; };
  const ControlProcess u = ControlProcess::constant(lat, 2, 0.0);
  try {
    adjoint_driver(m, u, forward(m, u, lat), lat.basis());
    FAIL("expected TerminalConditionViolated");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TerminalConditionViolated);
  }
}
