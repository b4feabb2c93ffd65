#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace fracsmp;
using testing::make_lattice;

TEST_CASE("directional derivative: zero direction and finite differences on LQ") {
  SplitMix64 rng(21);
  for (double h : {0.3, 0.7}) {
    const Lattice lat = make_lattice(h, 3, 4);
    const ModelSpec m = lq_model(testing::random_lq(rng, 3));
    const ControlProcess u = random_control(lat, 3, -1, 1, rng.next());
    const ControlProcess zero = ControlProcess::constant(lat, 3, 0.0);
    const DirectionalDerivative d0 = directional_derivative(m, u, zero, lat);
    CHECK(d0.via_variation == 0.0);
    CHECK(d0.via_adjoint == 0.0);

    const ControlProcess v = random_control(lat, 3, -1, 1, rng.next());
    const double eps = 1e-4;
    const double fd = (cost(m, u + eps * v, lat) - cost(m, u - eps * v, lat)) / (2 * eps);
    const DirectionalDerivative d = directional_derivative(m, u, v, lat);
    CHECK(std::abs(d.via_variation - fd) <= 1e-7);
    CHECK(std::abs(d.via_adjoint - fd) <= 1e-7);
    CHECK(std::abs(d.via_residual - fd) <= 1e-7);
  }
}

TEST_CASE("duality identity on the nonlinear model") {
  SplitMix64 rng(22);
  for (double h : {0.3, 0.7}) {
    const Lattice lat = make_lattice(h, 3, 4);
    const ModelSpec m = sin_drift_model(3, 0.6, 0.4);
    const ControlProcess u = random_control(lat, 3, -1, 1, rng.next());
    const ControlProcess v = random_control(lat, 3, -1, 1, rng.next());
    const StateProcess x = forward(m, u, lat);
    const BsdeSolution adj = solve_adjoint(m, u, x, lat);
    const DualityTerms t = duality_terms(m, u, x, adj, variation(m, u, x, v, lat), v, lat);
    CHECK(std::abs(t.gap()) <= 1e-9);
  }
}

TEST_CASE("stagewise reductions of the noise terms") {
  SplitMix64 rng(23);
  const Lattice lat = make_lattice(0.7, 3, 4);
  const ModelSpec m = sin_drift_model(3, -0.2, 0.6);
  const ControlProcess u = random_control(lat, 3, -1, 1, rng.next());
  const StateProcess x = forward(m, u, lat);
  const BsdeSolution adj = solve_adjoint(m, u, x, lat);
  for (int n = 0; n < 3; ++n) {
    const Adapted su = evaluate(m.diffusion_u, n, x.stages[n], u.stages[n]);
    const Adapted& p = adj.Y[n];
    const Adapted& q = adj.Z[n];
    const Adapted& xi = lat.noise_value(n);
    const double lhs_q = expectation(lat, su * q * lat.white_value(n) * xi);
    const double rhs_q = expectation(lat, lat.basis().b(n, n) * su * q);
    CHECK(std::abs(lhs_q - rhs_q) <= 1e-10);
    const double lhs_p = expectation(lat, su * p * xi);
    const double rhs_p = expectation(lat, su * p * noise_prediction(lat, n));
    CHECK(std::abs(lhs_p - rhs_p) <= 1e-10);
  }
}

TEST_CASE("residual reduces to white-noise form and to p + u") {
  const Lattice lat = make_lattice(0.5, 3, 4);
  const ModelSpec m = sin_drift_model(3, 0.1, 0.5);
  const ControlProcess u = random_control(lat, 3, -1, 1, 31);
  const StateProcess x = forward(m, u, lat);
  const BsdeSolution adj = solve_adjoint(m, u, x, lat);
  const SmpResidual res = smp_residual(m, u, x, adj, lat);
  for (int n = 0; n < 3; ++n) {
    // sigma_u = 0.5, b_u = 1, l_u = u
    const Adapted expected = adj.Y[n] + 0.5 * adj.Z[n] + u.stages[n];
    CHECK(max_abs_difference(res.stages[n], expected) <= 1e-14);
    CHECK(res.stages[n].level() == n);
  }

  const ModelSpec no_noise = sin_drift_model(3, 0.1, 0.0);
  const Lattice frac = make_lattice(0.8, 3, 4);
  const StateProcess xf = forward(no_noise, u, frac);
  const BsdeSolution af = solve_adjoint(no_noise, u, xf, frac);
  const SmpResidual rf = smp_residual(no_noise, u, xf, af, frac);
  for (int n = 0; n < 3; ++n) CHECK(max_abs_difference(rf.stages[n], af.Y[n] + u.stages[n]) <= 1e-14);
}

TEST_CASE("residual vanishes at the one-step closed form") {
  LqSpec s{1, {0.2}, {0.7}, {0.3}, {-0.5}, {0.4}, {0.9}, 1.3, 1.1};
  const Lattice lat = make_lattice(0.7, 1, 2);
  const ModelSpec m = lq_model(s);
  const ControlProcess u = ControlProcess::constant(lat, 1, one_step_closed_form(s));
  const StateProcess x = forward(m, u, lat);
  const SmpResidual res = smp_residual(m, u, x, solve_adjoint(m, u, x, lat), lat);
  CHECK(std::abs(res.stages[0][0]) <= 1e-10);
}

TEST_CASE("check_stationarity on boxes") {
  const Lattice lat = make_lattice(0.5, 2, 2);
  const ControlSet box = ControlSet::box(-1, 1);
  auto residual = [&](double v) {
    SmpResidual r;
    for (int n = 0; n < 2; ++n) r.stages.push_back(lat.constant(v, n));
    return r;
  };
  const ControlProcess lower = ControlProcess::constant(lat, 2, -1.0);
  const ControlProcess upper = ControlProcess::constant(lat, 2, 1.0);
  const ControlProcess interior = ControlProcess::constant(lat, 2, 0.2);
  CHECK(check_stationarity(residual(0.0), interior, box, 1e-8).pass);
  CHECK(check_stationarity(residual(0.3), lower, box, 1e-8).pass);
  const StationarityReport fail = check_stationarity(residual(-0.3), lower, box, 1e-8);
  CHECK_FALSE(fail.pass);
  CHECK(fail.worst_violation == doctest::Approx(0.3));
  CHECK(check_stationarity(residual(-0.3), upper, box, 1e-8).pass);
  CHECK_FALSE(check_stationarity(residual(0.3), upper, box, 1e-8).pass);
  CHECK_FALSE(check_stationarity(residual(0.3), interior, box, 1e-8).pass);
  CHECK_FALSE(check_stationarity(residual(0.3), interior, ControlSet::unconstrained(), 1e-8).pass);
  // Within 1e-9 of a bound counts as on the bound.
  CHECK(check_stationarity(residual(0.3), ControlProcess::constant(lat, 2, -1.0 + 5e-10), box, 1e-8).pass);
  CHECK_THROWS_AS(check_stationarity(residual(0.0), interior, box, 0.0), Error);
}

TEST_CASE("optimize: LQ agreement, monotone costs, immediate return") {
  SplitMix64 rng(41);
  const LqSpec s = testing::random_lq(rng, 3);
  const Lattice lat = make_lattice(0.7, 3, 4);
  const ModelSpec m = lq_model(s);
  OptimizeOptions opts;
  opts.tolerance = 1e-10;
  const OptimizeResult r = optimize(m, ControlProcess::constant(lat, 3, 0.0), lat, opts);
  REQUIRE(r.converged);
  LqOptions lq_opts;
  lq_opts.tolerance = 1e-13;
  lq_opts.max_iter = 10000;
  const LqSolution fp = lq_fixed_point(s, lat, lq_opts);
  CHECK(max_abs_distance(r.control, fp.control) <= 1e-6);
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].cost <= r.trace[k - 1].cost + 1e-12);

  const OptimizeResult again = optimize(m, r.control, lat, opts);
  CHECK(again.iterations == 0);
  CHECK(again.converged);
}

TEST_CASE("optimize: nonlinear model descends to a stationary point") {
  const Lattice lat = make_lattice(0.7, 3, 4);
  const ModelSpec m = sin_drift_model(3, 0.8, 0.5);
  const ControlProcess u0 = ControlProcess::constant(lat, 3, 0.5);
  const OptimizeResult r = optimize(m, u0, lat, {});
  CHECK(r.converged);
  CHECK(r.stationarity.worst_violation <= 1e-6);
  CHECK(r.cost < cost(m, u0, lat));

  // Necessity: no admissible direction decreases J to first order.
  SplitMix64 rng(42);
  for (int i = 0; i < 20; ++i) {
    const ControlProcess v = random_control(lat, 3, -1, 1, rng.next());
    CHECK(directional_derivative(m, r.control, v, lat).via_variation >= -1e-7);
  }
}

TEST_CASE("optimize on a box ends with active bounds classified correctly") {
  const Lattice lat = make_lattice(0.7, 3, 4);
  LqSpec s{3, {0.1, 0.1, 0.1}, {1, 1, 1}, {0, 0, 0}, {0.2, 0.2, 0.2}, {1, 1, 1}, {0.5, 0.5, 0.5}, 2.0, 3.0};
  ModelSpec m = lq_model(s);
  m.control_set = ControlSet::box(-0.5, 0.5);
  const OptimizeResult r = optimize(m, ControlProcess::constant(lat, 3, 0.0), lat, {});
  CHECK(r.converged);
  bool some_active = false;
  for (const auto& e : r.stationarity.entries) {
    CHECK(m.control_set.contains(e.control));
    if (std::abs(e.control + 0.5) <= 1e-9) {
      some_active = true;
      CHECK(e.rho >= -1e-8);
    }
  }
  CHECK(some_active);
  CHECK_THROWS_AS(optimize(m, ControlProcess::constant(lat, 3, 2.0), lat, {}), Error);
}
