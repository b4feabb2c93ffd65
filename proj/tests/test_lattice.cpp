#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace fracsmp;
using testing::make_lattice;

TEST_CASE("gauss_hermite small orders") {
  const auto r1 = gauss_hermite(1);
  CHECK(r1.nodes(0) == doctest::Approx(0.0));
  CHECK(r1.weights(0) == doctest::Approx(1.0));

  const auto r2 = gauss_hermite(2);
  CHECK(r2.nodes(0) == doctest::Approx(-1.0));
  CHECK(r2.nodes(1) == doctest::Approx(1.0));
  CHECK(r2.weights(0) == doctest::Approx(0.5));

  const auto r3 = gauss_hermite(3);
  CHECK(std::abs(r3.nodes(0) + std::sqrt(3.0)) <= 1e-14);
  CHECK(std::abs(r3.nodes(1)) <= 1e-14);
  CHECK(std::abs(r3.nodes(2) - std::sqrt(3.0)) <= 1e-14);
  CHECK(std::abs(r3.weights(0) - 1.0 / 6) <= 1e-14);
  CHECK(std::abs(r3.weights(1) - 2.0 / 3) <= 1e-14);

  CHECK_THROWS_AS(gauss_hermite(0), Error);
  CHECK_THROWS_AS(gauss_hermite(17), Error);
}

TEST_CASE("gauss_hermite integrates normal moments up to degree 2q-1") {
  for (int q = 1; q <= 16; ++q) {
    const auto r = gauss_hermite(q);
    double moment_of_normal = 1.0;  // (k-1)!! for even k
    for (int k = 0; k <= 2 * q - 1; ++k) {
      double s = 0.0, scale = 0.0;
      for (int j = 0; j < q; ++j) {
        s += r.weights(j) * std::pow(r.nodes(j), k);
        scale += r.weights(j) * std::pow(std::abs(r.nodes(j)), k);
      }
      // Odd moments cancel exactly, so the error is measured against the absolute sum.
      const double expected = k % 2 ? 0.0 : moment_of_normal;
      CHECK(std::abs(s - expected) <= 1e-13 * scale);
      if (k % 2 == 0) moment_of_normal *= double(k + 1);
    }
    for (int j = 0; j < q; ++j) CHECK(r.weights(j) > 0.0);
  }
}

TEST_CASE("path probabilities sum to one") {
  for (int q = 1; q <= 8; ++q) {
    for (int depth = 0; depth <= 8; ++depth) {
      if (std::pow(q, depth) > 2e6) continue;
      const Lattice lat(depth, gauss_hermite(q), whiten(fgn_covariance(HurstParameter(0.6), std::max(depth, 1))));
      const double summands = double(lat.path_count());
      CHECK(std::abs(lat.probabilities(depth).sum() - 1.0) <= 1e-14 + summands * 2.2e-16);
      CHECK(lat.path_count() == ipow(q, depth));
    }
  }
}

TEST_CASE("lattice size limits and depth checks") {
  CHECK_THROWS_AS(Lattice(15, gauss_hermite(3), whiten(fgn_covariance(HurstParameter(0.5), 15))), Error);
  CHECK_THROWS_AS(Lattice(5, gauss_hermite(3), whiten(fgn_covariance(HurstParameter(0.5), 4))), Error);
  const Lattice lat = make_lattice(0.7, 2, 2);
  CHECK_THROWS_AS(lat.white_value(2), Error);
  CHECK_THROWS_AS(lat.noise_value(-1), Error);
}

TEST_CASE("white_value moments") {
  const Lattice lat = make_lattice(0.7, 3, 3);
  for (int n = 0; n < 3; ++n) {
    const Adapted& eta = lat.white_value(n);
    CHECK(eta.level() == n + 1);
    CHECK(std::abs(expectation(lat, eta)) <= 1e-15);
    const Adapted m1 = condexp(lat, eta, n);
    const Adapted m2 = condexp(lat, eta * eta, n);
    for (Eigen::Index i = 0; i < m1.size(); ++i) {
      CHECK(std::abs(m1[i]) <= 1e-15);
      CHECK(std::abs(m2[i] - 1.0) <= 1e-14);
    }
  }
}

TEST_CASE("noise_value reproduces the covariance by brute-force path sums") {
  const double h = 0.7;
  const int depth = 3;
  const Lattice lat = make_lattice(h, depth, depth);
  const auto cov = fgn_covariance(HurstParameter(h), depth);
  const auto& b = lat.basis().b;
  const auto& x = lat.rule().nodes;
  const auto& w = lat.rule().weights;
  for (int n = 0; n < depth; ++n) {
    for (int m = 0; m < depth; ++m) {
      double sum = 0.0;
      for (int j0 = 0; j0 < 3; ++j0)
        for (int j1 = 0; j1 < 3; ++j1)
          for (int j2 = 0; j2 < 3; ++j2) {
            const double eta[3] = {x(j0), x(j1), x(j2)};
            double xn = 0.0, xm = 0.0;
            for (int k = 0; k <= n; ++k) xn += b(n, k) * eta[k];
            for (int k = 0; k <= m; ++k) xm += b(m, k) * eta[k];
            sum += w(j0) * w(j1) * w(j2) * xn * xm;
          }
      CHECK(std::abs(sum - cov.sigma(n, m)) <= 1e-12);
      CHECK(std::abs(expectation(lat, lat.noise_value(n) * lat.noise_value(m)) - cov.sigma(n, m)) <= 1e-12);
    }
    CHECK(std::abs(expectation(lat, lat.noise_value(n))) <= 1e-15);
  }
}

TEST_CASE("noise_value equals white_value for the identity basis") {
  const Lattice lat = testing::identity_lattice(3);
  for (int n = 0; n < 3; ++n) CHECK(max_abs_difference(lat.noise_value(n), lat.white_value(n)) == 0.0);
}

TEST_CASE("condexp basics") {
  const Lattice lat = make_lattice(0.7, 3, 3);
  const Adapted c = lat.constant(2.5, 3);
  for (int n = 0; n <= 3; ++n) {
    const Adapted e = condexp(lat, c, n);
    CHECK(e.level() == n);
    CHECK((e.values().array() - 2.5).abs().maxCoeff() <= 8 * 2.2e-16 * 2.5);
  }
  // E[xi_1 | F_1] = b(1,0) eta_0
  const Adapted e = condexp(lat, lat.noise_value(1), 1);
  CHECK(max_abs_difference(e, lat.basis().b(1, 0) * lat.white_value(0)) <= 1e-15);
  // E[eta_n xi_n | F_n] = b(n,n)
  for (int n = 0; n < 3; ++n) {
    const Adapted v = condexp(lat, lat.white_value(n) * lat.noise_value(n), n);
    CHECK((v.values().array() - lat.basis().b(n, n)).abs().maxCoeff() <= 1e-14);
  }
  CHECK_THROWS_AS(condexp(lat, lat.white_value(0), 2), Error);
}

namespace {

Adapted random_polynomial(const Lattice& lat, int level, SplitMix64& rng) {
  Adapted v = lat.constant(rng.uniform(-1, 1), level);
  for (int k = 0; k < level; ++k) {
    const Adapted& xi = lat.noise_value(k);
    const Adapted& eta = lat.white_value(k);
    v = v + rng.uniform(-1, 1) * xi + rng.uniform(-1, 1) * (eta * eta) + rng.uniform(-1, 1) * (xi * v);
  }
  return v;
}

}  // namespace

TEST_CASE("condexp: tower property, linearity, taking out what is known") {
  const Lattice lat = make_lattice(0.3, 4, 4);
  SplitMix64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Adapted u = random_polynomial(lat, 4, rng);
    const Adapted v = random_polynomial(lat, 4, rng);
    for (int n = 0; n <= 4; ++n) {
      for (int k = n; k <= 4; ++k) {
        CHECK(max_abs_difference(condexp(lat, condexp(lat, u, k), n), condexp(lat, u, n)) <= 1e-12);
      }
      const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
      CHECK(max_abs_difference(condexp(lat, a * u + b * v, n), a * condexp(lat, u, n) + b * condexp(lat, v, n)) <= 1e-12);
      const Adapted w = random_polynomial(lat, n, rng);
      CHECK(max_abs_difference(condexp(lat, w * v, n), w * condexp(lat, v, n)) <= 1e-12);
    }
  }
}

TEST_CASE("AdaptedValue lifting keeps values constant on each prefix") {
  const Lattice lat = make_lattice(0.5, 3, 3);
  const Adapted& eta0 = lat.white_value(0);
  const Adapted lifted = eta0.lifted(3);
  CHECK(lifted.size() == 27);
  for (Eigen::Index i = 0; i < lifted.size(); ++i) CHECK(lifted[i] == eta0[Eigen::Index(lifted.ancestor(std::size_t(i), 1))]);
  CHECK_THROWS_AS(lifted.lifted(1), Error);
}

TEST_CASE("sample_paths is deterministic and follows the basis") {
  const auto basis = whiten(fgn_covariance(HurstParameter(0.7), 4));
  const auto s1 = sample_paths(basis, 4, 1000, 42);
  const auto s2 = sample_paths(basis, 4, 1000, 42);
  CHECK((s1.eta - s2.eta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1.xi - s2.xi).cwiseAbs().maxCoeff() == 0.0);
  const auto s3 = sample_paths(basis, 4, 1000, 43);
  CHECK((s1.eta - s3.eta).cwiseAbs().maxCoeff() > 0.0);
  // Entry (p, n) depends only on (seed, p, n): a shorter run is a prefix.
  const auto s4 = sample_paths(basis, 2, 10, 42);
  CHECK((s4.eta - s1.eta.topLeftCorner(10, 2)).cwiseAbs().maxCoeff() == 0.0);

  const auto id = whiten(custom_covariance(MatrixX<double>::Identity(3, 3)));
  const auto s5 = sample_paths(id, 3, 50, 1);
  CHECK((s5.eta - s5.xi).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(sample_paths(basis, 4, 0, 1), Error);
}

TEST_CASE("sample_paths covariance within Monte Carlo tolerance") {
  const auto cov = fgn_covariance(HurstParameter(0.7), 4);
  const auto s = sample_paths(whiten(cov), 4, 200000, 2024);
  const MatrixX<double> xi_cov = (s.xi.transpose() * s.xi) / double(s.xi.rows());
  CHECK((xi_cov - cov.sigma).cwiseAbs().maxCoeff() <= 0.01);
}
