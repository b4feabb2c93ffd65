#pragma once

// Gauss-Hermite tree over the independent Gaussians eta_0..eta_{M-1}.
//
// A node at level n is the tuple (i_0, ..., i_{n-1}) of quadrature indices,
// encoded in base q with i_0 most significant. Its children at level n+1 are
// the contiguous block [idx*q, idx*q + q). An AdaptedValue at level n is a
// table over the q^n level-n nodes, which makes it F_n-measurable by
// construction; lifting to a deeper level repeats each entry over its block.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <vector>

#include "fracsmp/errors.hpp"
#include "fracsmp/noise.hpp"
#include "fracsmp/random.hpp"

namespace fracsmp {

inline constexpr int kMaxQuadratureOrder = 16;
inline constexpr std::size_t kMaxLatticePaths = 10'000'000;

inline std::size_t ipow(int base, int exponent) {
  std::size_t r = 1;
  for (int i = 0; i < exponent; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

template <typename Scalar = double>
struct QuadratureRule {
  VectorX<Scalar> nodes;
  VectorX<Scalar> weights;

  int order() const noexcept { return static_cast<int>(nodes.size()); }
};

/// Probabilists' Gauss-Hermite rule normalized to the standard normal density
/// (Golub-Welsch: eigen-decomposition of the Jacobi matrix of He_k).
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_hermite(int q) {
  using std::sqrt;
  if (q < 1 || q > kMaxQuadratureOrder) {
    std::ostringstream os;
    os << "quadrature order must be in [1," << kMaxQuadratureOrder << "], got " << q;
    throw Error(Errc::UnsupportedOrder, os.str());
  }
  MatrixX<Scalar> jacobi = MatrixX<Scalar>::Zero(q, q);
  for (int k = 1; k < q; ++k) {
    jacobi(k, k - 1) = sqrt(Scalar(k));
    jacobi(k - 1, k) = sqrt(Scalar(k));
  }
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(jacobi, Eigen::EigenvaluesOnly);
  VectorX<Scalar> x = eig.eigenvalues();
  VectorX<Scalar> w(q);

  // Eigenvector components lose relative accuracy on the small outer weights.
  // Polish each node with Newton on the orthonormal recurrence and take the
  // weight from the Christoffel function 1 / sum_k p_k(x)^2 instead.
  for (int i = 0; i < q; ++i) {
    Scalar christoffel = 0;
    for (int pass = 0; pass < 3; ++pass) {
      Scalar p_prev = 0, p = 1, d_prev = 0, d = 0;
      christoffel = 1;
      for (int k = 0; k < q; ++k) {
        const Scalar p_next = (x(i) * p - sqrt(Scalar(k)) * p_prev) / sqrt(Scalar(k + 1));
        const Scalar d_next = (p + x(i) * d - sqrt(Scalar(k)) * d_prev) / sqrt(Scalar(k + 1));
        p_prev = p, p = p_next, d_prev = d, d = d_next;
        if (k + 1 < q) christoffel += p * p;
      }
      if (pass < 2 && d != Scalar(0)) x(i) -= p / d;
    }
    w(i) = Scalar(1) / christoffel;
  }

  // The rule is symmetric about zero; enforce it so odd moments vanish to rounding.
  QuadratureRule<Scalar> rule{VectorX<Scalar>(q), VectorX<Scalar>(q)};
  for (int i = 0; i < q; ++i) {
    rule.nodes(i) = Scalar(0.5) * (x(i) - x(q - 1 - i));
    rule.weights(i) = Scalar(0.5) * (w(i) + w(q - 1 - i));
  }
  if (q % 2 == 1) rule.nodes(q / 2) = Scalar(0);
  rule.weights /= rule.weights.sum();
  return rule;
}

template <typename Scalar = double>
class AdaptedValue {
 public:
  AdaptedValue() : order_(1), level_(0), values_(VectorX<Scalar>::Zero(1)) {}

  AdaptedValue(int order, int level, VectorX<Scalar> values)
      : order_(order), level_(level), values_(std::move(values)) {
    if (order < 1 || level < 0 || static_cast<std::size_t>(values_.size()) != ipow(order, level)) {
      throw Error(Errc::LevelMismatch, "value table size does not match q^level");
    }
  }

  static AdaptedValue constant(int order, Scalar c, int level = 0) {
    return AdaptedValue(order, level, VectorX<Scalar>::Constant(Eigen::Index(ipow(order, level)), c));
  }

  int order() const noexcept { return order_; }
  int level() const noexcept { return level_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  const VectorX<Scalar>& values() const noexcept { return values_; }
  VectorX<Scalar>& values() noexcept { return values_; }
  Scalar operator[](Eigen::Index node) const { return values_(node); }
  Scalar& operator[](Eigen::Index node) { return values_(node); }

  /// Same random variable viewed at a deeper level.
  AdaptedValue lifted(int level) const {
    if (level < level_) throw Error(Errc::LevelMismatch, "cannot lift to a shallower level");
    if (level == level_) return *this;
    const auto rep = Eigen::Index(ipow(order_, level - level_));
    VectorX<Scalar> out(rep * values_.size());
    Eigen::Map<MatrixX<Scalar>>(out.data(), rep, values_.size()).rowwise() = values_.transpose();
    return AdaptedValue(order_, level, std::move(out));
  }

  /// Index of the level-`level` ancestor of `node`.
  std::size_t ancestor(std::size_t node, int level) const {
    return node / ipow(order_, level_ - level);
  }

  bool all_finite() const { return values_.allFinite(); }

 private:
  int order_;
  int level_;
  VectorX<Scalar> values_;
};

namespace detail {

template <typename Scalar>
void require_same_order(const AdaptedValue<Scalar>& x, const AdaptedValue<Scalar>& y) {
  if (x.order() != y.order()) throw Error(Errc::LevelMismatch, "adapted values from different lattices");
}

template <typename Scalar, typename Op>
AdaptedValue<Scalar> combine(const AdaptedValue<Scalar>& x, const AdaptedValue<Scalar>& y, Op op) {
  require_same_order(x, y);
  const int level = std::max(x.level(), y.level());
  const auto xl = x.lifted(level);
  const auto yl = y.lifted(level);
  return AdaptedValue<Scalar>(x.order(), level, op(xl.values().array(), yl.values().array()).matrix());
}

}  // namespace detail

template <typename Scalar>
AdaptedValue<Scalar> operator+(const AdaptedValue<Scalar>& x, const AdaptedValue<Scalar>& y) {
  return detail::combine(x, y, [](const auto& a, const auto& b) { return (a + b).eval(); });
}
template <typename Scalar>
AdaptedValue<Scalar> operator-(const AdaptedValue<Scalar>& x, const AdaptedValue<Scalar>& y) {
  return detail::combine(x, y, [](const auto& a, const auto& b) { return (a - b).eval(); });
}
template <typename Scalar>
AdaptedValue<Scalar> operator*(const AdaptedValue<Scalar>& x, const AdaptedValue<Scalar>& y) {
  return detail::combine(x, y, [](const auto& a, const auto& b) { return (a * b).eval(); });
}
template <typename Scalar>
AdaptedValue<Scalar> operator-(const AdaptedValue<Scalar>& x) {
  return AdaptedValue<Scalar>(x.order(), x.level(), -x.values());
}
template <typename Scalar>
AdaptedValue<Scalar> operator*(Scalar s, const AdaptedValue<Scalar>& x) {
  return AdaptedValue<Scalar>(x.order(), x.level(), s * x.values());
}
template <typename Scalar>
AdaptedValue<Scalar> operator*(const AdaptedValue<Scalar>& x, Scalar s) {
  return s * x;
}
template <typename Scalar>
AdaptedValue<Scalar> operator+(const AdaptedValue<Scalar>& x, Scalar s) {
  return AdaptedValue<Scalar>(x.order(), x.level(), (x.values().array() + s).matrix());
}
template <typename Scalar>
AdaptedValue<Scalar> operator+(Scalar s, const AdaptedValue<Scalar>& x) {
  return x + s;
}

/// Nodewise f(x) at x's level.
template <typename Scalar, typename F>
AdaptedValue<Scalar> map(const AdaptedValue<Scalar>& x, F&& f) {
  VectorX<Scalar> out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = f(x[i]);
  return AdaptedValue<Scalar>(x.order(), x.level(), std::move(out));
}

/// Nodewise f(x, y) at the deeper of the two levels.
template <typename Scalar, typename F>
AdaptedValue<Scalar> map(const AdaptedValue<Scalar>& x, const AdaptedValue<Scalar>& y, F&& f) {
  detail::require_same_order(x, y);
  const int level = std::max(x.level(), y.level());
  const auto xl = x.lifted(level);
  const auto yl = y.lifted(level);
  VectorX<Scalar> out(xl.size());
  for (Eigen::Index i = 0; i < xl.size(); ++i) out(i) = f(xl[i], yl[i]);
  return AdaptedValue<Scalar>(x.order(), level, std::move(out));
}

template <typename Scalar>
Scalar max_abs_difference(const AdaptedValue<Scalar>& x, const AdaptedValue<Scalar>& y) {
  return (x - y).values().cwiseAbs().maxCoeff();
}

template <typename Scalar = double>
class NoiseLattice {
 public:
  NoiseLattice(int depth, QuadratureRule<Scalar> rule, WhiteningBasis<Scalar> basis)
      : depth_(depth), rule_(std::move(rule)), basis_(std::move(basis)) {
    if (depth < 0) throw Error(Errc::InvalidArgument, "lattice depth must be >= 0");
    if (basis_.size() < depth) {
      std::ostringstream os;
      os << "whitening basis of size " << basis_.size() << " cannot drive a lattice of depth " << depth;
      throw Error(Errc::DepthMismatch, os.str());
    }
    const int q = rule_.order();
    double paths = 1.0;
    for (int i = 0; i < depth; ++i) paths *= q;
    if (paths > double(kMaxLatticePaths)) {
      std::ostringstream os;
      os << "q^depth = " << q << "^" << depth << " exceeds the cap of " << kMaxLatticePaths << " paths";
      throw Error(Errc::LatticeTooLarge, os.str());
    }

    probabilities_.reserve(depth + 1);
    probabilities_.emplace_back(VectorX<Scalar>::Ones(1));
    for (int n = 0; n < depth; ++n) {
      const auto& prev = probabilities_.back();
      VectorX<Scalar> next(prev.size() * q);
      for (Eigen::Index i = 0; i < prev.size(); ++i) next.segment(i * q, q) = prev(i) * rule_.weights;
      probabilities_.push_back(std::move(next));
    }

    white_.reserve(depth);
    noise_.reserve(depth);
    for (int n = 0; n < depth; ++n) {
      // eta_n at level n+1 is the last digit of the node index.
      VectorX<Scalar> eta(Eigen::Index(ipow(q, n + 1)));
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = rule_.nodes(i % q);
      white_.emplace_back(q, n + 1, std::move(eta));

      AdaptedValue<Scalar> xi = AdaptedValue<Scalar>::constant(q, Scalar(0), n + 1);
      for (int k = 0; k <= n; ++k) xi = xi + basis_.b(n, k) * white_[k];
      noise_.push_back(std::move(xi));
    }
  }

  int depth() const noexcept { return depth_; }
  int order() const noexcept { return rule_.order(); }
  const QuadratureRule<Scalar>& rule() const noexcept { return rule_; }
  const WhiteningBasis<Scalar>& basis() const noexcept { return basis_; }
  std::size_t path_count() const { return ipow(order(), depth_); }

  /// Probabilities of the level-n nodes (products of stage weights).
  const VectorX<Scalar>& probabilities(int level) const {
    check_level(level);
    return probabilities_[level];
  }

  /// eta_n as an F_{n+1}-measurable value.
  const AdaptedValue<Scalar>& white_value(int n) const {
    check_stage(n);
    return white_[n];
  }

  /// xi_n = sum_{k<=n} b(n,k) eta_k as an F_{n+1}-measurable value.
  const AdaptedValue<Scalar>& noise_value(int n) const {
    check_stage(n);
    return noise_[n];
  }

  AdaptedValue<Scalar> constant(Scalar c, int level = 0) const {
    check_level(level);
    return AdaptedValue<Scalar>::constant(order(), c, level);
  }

  void check_level(int level) const {
    if (level < 0 || level > depth_) {
      std::ostringstream os;
      os << "level " << level << " outside [0," << depth_ << "]";
      throw Error(Errc::IndexOutOfRange, os.str());
    }
  }

 private:
  void check_stage(int n) const {
    if (n < 0 || n >= depth_) {
      std::ostringstream os;
      os << "stage " << n << " outside [0," << depth_ << ")";
      throw Error(Errc::IndexOutOfRange, os.str());
    }
  }

  int depth_;
  QuadratureRule<Scalar> rule_;
  WhiteningBasis<Scalar> basis_;
  std::vector<VectorX<Scalar>> probabilities_;
  std::vector<AdaptedValue<Scalar>> white_;
  std::vector<AdaptedValue<Scalar>> noise_;
};

template <typename Scalar>
const AdaptedValue<Scalar>& white_value(const NoiseLattice<Scalar>& lat, int n) {
  return lat.white_value(n);
}

template <typename Scalar>
const AdaptedValue<Scalar>& noise_value(const NoiseLattice<Scalar>& lat, int n) {
  return lat.noise_value(n);
}

/// E[v | F_n]: average over the stages n..m-1 with the quadrature weights.
template <typename Scalar>
AdaptedValue<Scalar> condexp(const NoiseLattice<Scalar>& lat, const AdaptedValue<Scalar>& v, int n) {
  if (v.order() != lat.order()) throw Error(Errc::LevelMismatch, "value does not belong to this lattice");
  lat.check_level(v.level());
  if (n < 0 || n > v.level()) {
    std::ostringstream os;
    os << "cannot condition a level-" << v.level() << " value on F_" << n;
    throw Error(Errc::LevelMismatch, os.str());
  }
  if (n == v.level()) return v;
  // Suffix weights over stages n..m-1 equal the level-(m-n) path probabilities.
  const auto& w = lat.probabilities(v.level() - n);
  const Eigen::Index parents = Eigen::Index(ipow(lat.order(), n));
  Eigen::Map<const MatrixX<Scalar>> blocks(v.values().data(), w.size(), parents);
  return AdaptedValue<Scalar>(lat.order(), n, blocks.transpose() * w);
}

template <typename Scalar>
Scalar expectation(const NoiseLattice<Scalar>& lat, const AdaptedValue<Scalar>& v) {
  return condexp(lat, v, 0)[0];
}

template <typename Scalar = double>
struct PathSample {
  MatrixX<Scalar> eta;  // count x horizon
  MatrixX<Scalar> xi;   // count x horizon, row p = b * eta row p
};

/// Monte Carlo draws of the noise; entry (p, n) of eta depends only on (seed, p, n).
template <typename Scalar>
PathSample<Scalar> sample_paths(const WhiteningBasis<Scalar>& basis, int horizon, int count, std::uint64_t seed) {
  if (count < 1) throw Error(Errc::InvalidArgument, "path count must be >= 1");
  if (horizon < 0 || horizon > basis.size()) throw Error(Errc::DepthMismatch, "horizon exceeds basis size");
  PathSample<Scalar> out{MatrixX<Scalar>(count, horizon), MatrixX<Scalar>(count, horizon)};
  for (int p = 0; p < count; ++p)
    for (int n = 0; n < horizon; ++n) out.eta(p, n) = Scalar(keyed_normal(seed, std::uint64_t(p), std::uint64_t(n)));
  const auto b = basis.b.topLeftCorner(horizon, horizon);
  out.xi = out.eta * b.transpose();
  return out;
}

using Adapted = AdaptedValue<double>;
using Lattice = NoiseLattice<double>;

}  // namespace fracsmp
