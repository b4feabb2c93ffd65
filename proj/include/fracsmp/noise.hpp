#pragma once

// Fractional-noise covariance and the lower-triangular whitening transform
// relating correlated increments xi to independent standard Gaussians eta:
//
//   xi_n  = sum_{k<=n} b(n,k) eta_k        (b lower triangular, b b^T = Sigma)
//   eta_n = sum_{k<=n} a(n,k) xi_k         (a = b^{-1})
//   c(n,k) = sum_{l<n} b(n,l) a(l,k)       (strictly lower triangular)
//
// so that E[xi_n | F_n] = sum_{k<n} c(n,k) xi_k. All indices are 0-based.

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "fracsmp/errors.hpp"

namespace fracsmp {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Smallest admissible Cholesky pivot; anything at or below fails loudly.
inline constexpr double kPivotTolerance = 1e-12;

class HurstParameter {
 public:
  explicit HurstParameter(double h) : h_(h) {
    if (!(h > 0.0 && h < 1.0)) {
      std::ostringstream os;
      os << "Hurst parameter must lie in (0,1), got " << h;
      throw Error(Errc::InvalidArgument, os.str());
    }
  }
  double value() const noexcept { return h_; }

 private:
  double h_;
};

template <typename Scalar = double>
struct CovarianceSpec {
  MatrixX<Scalar> sigma;

  int size() const noexcept { return static_cast<int>(sigma.rows()); }
};

template <typename Scalar = double>
struct WhiteningBasis {
  MatrixX<Scalar> b;  // xi = b * eta
  MatrixX<Scalar> a;  // eta = a * xi
  MatrixX<Scalar> c;  // strictly lower: E[xi_n | F_n] = sum_k c(n,k) xi_k

  int size() const noexcept { return static_cast<int>(b.rows()); }
};

/// Autocovariance of unit-step fBm increments at integer lag d.
template <typename Scalar = double>
Scalar fgn_autocovariance(HurstParameter h, long lag) {
  using std::abs;
  using std::pow;
  const Scalar two_h = Scalar(2) * Scalar(h.value());
  const Scalar d = abs(Scalar(lag));
  return Scalar(0.5) * (pow(abs(d + Scalar(1)), two_h) + pow(abs(d - Scalar(1)), two_h) -
                        Scalar(2) * pow(d, two_h));
}

template <typename Scalar = double>
CovarianceSpec<Scalar> fgn_covariance(HurstParameter h, int m) {
  if (m < 1) throw Error(Errc::InvalidArgument, "covariance size must be >= 1");
  CovarianceSpec<Scalar> cov{MatrixX<Scalar>(m, m)};
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= i; ++j) {
      const Scalar r = fgn_autocovariance<Scalar>(h, i - j);
      cov.sigma(i, j) = r;
      cov.sigma(j, i) = r;
    }
  }
  return cov;
}

/// Cholesky factor by the row recursion
///   b(n,m) = (rho(n,m) - sum_{k<m} b(n,k) b(m,k)) / b(m,m),  m < n
///   b(m,m) = sqrt(rho(m,m) - sum_{k<m} b(m,k)^2)
/// followed by a = b^{-1} and the mixed coefficients c.
template <typename Scalar = double>
WhiteningBasis<Scalar> whiten(const CovarianceSpec<Scalar>& cov) {
  using std::sqrt;
  const int m = cov.size();
  if (m < 1 || cov.sigma.cols() != m) {
    throw Error(Errc::InvalidArgument, "covariance must be a non-empty square matrix");
  }
  const auto& rho = cov.sigma;

  MatrixX<Scalar> b = MatrixX<Scalar>::Zero(m, m);
  for (int n = 0; n < m; ++n) {
    for (int j = 0; j < n; ++j) {
      Scalar acc = rho(n, j);
      for (int k = 0; k < j; ++k) acc -= b(n, k) * b(j, k);
      b(n, j) = acc / b(j, j);
    }
    Scalar pivot = rho(n, n);
    for (int k = 0; k < n; ++k) pivot -= b(n, k) * b(n, k);
    if (!(pivot > Scalar(kPivotTolerance))) {
      std::ostringstream os;
      os << "pivot " << static_cast<double>(pivot) << " at row " << n << " is not above "
         << kPivotTolerance;
      throw Error(Errc::NotPositiveDefinite, os.str());
    }
    b(n, n) = sqrt(pivot);
  }

  // a = b^{-1} column by column through forward substitution.
  MatrixX<Scalar> a = MatrixX<Scalar>::Zero(m, m);
  for (int col = 0; col < m; ++col) {
    a(col, col) = Scalar(1) / b(col, col);
    for (int n = col + 1; n < m; ++n) {
      Scalar acc(0);
      for (int k = col; k < n; ++k) acc -= b(n, k) * a(k, col);
      a(n, col) = acc / b(n, n);
    }
  }

  MatrixX<Scalar> c = MatrixX<Scalar>::Zero(m, m);
  for (int n = 1; n < m; ++n) {
    for (int k = 0; k < n; ++k) {
      Scalar acc(0);
      for (int l = k; l < n; ++l) acc += b(n, l) * a(l, k);
      c(n, k) = acc;
    }
  }
  return {std::move(b), std::move(a), std::move(c)};
}

/// Validates a user-supplied stationary covariance (AR, MA, ...) for the
/// same whitening pipeline.
template <typename Derived>
CovarianceSpec<typename Derived::Scalar> custom_covariance(const Eigen::MatrixBase<Derived>& entries) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  if (entries.rows() != entries.cols() || entries.rows() < 1) {
    throw Error(Errc::InvalidArgument, "covariance must be a non-empty square matrix");
  }
  const Eigen::Index m = entries.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const Scalar scale = std::max(Scalar(1), std::max(abs(entries(i, j)), abs(entries(j, i))));
      if (!(abs(entries(i, j) - entries(j, i)) <= Scalar(1e-12) * scale)) {
        std::ostringstream os;
        os << "entries (" << i << "," << j << ") and (" << j << "," << i << ") differ";
        throw Error(Errc::NotSymmetric, os.str());
      }
    }
  }
  CovarianceSpec<Scalar> cov{entries};
  cov.sigma = Scalar(0.5) * (cov.sigma + cov.sigma.transpose()).eval();
  whiten(cov);  // throws NotPositiveDefinite
  return cov;
}

/// Stationary AR(1) autocovariance phi^{|i-j|} / (1 - phi^2).
template <typename Scalar = double>
CovarianceSpec<Scalar> ar1_covariance(Scalar phi, int m) {
  using std::abs;
  using std::pow;
  if (!(abs(phi) < Scalar(1))) throw Error(Errc::InvalidArgument, "AR(1) requires |phi| < 1");
  MatrixX<Scalar> s(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) s(i, j) = pow(phi, abs(i - j)) / (Scalar(1) - phi * phi);
  return custom_covariance(s);
}

template <typename Scalar>
Scalar reconstruction_error(const CovarianceSpec<Scalar>& cov, const WhiteningBasis<Scalar>& basis) {
  return (basis.b * basis.b.transpose() - cov.sigma).cwiseAbs().maxCoeff();
}

template <typename Scalar>
Scalar inverse_error(const WhiteningBasis<Scalar>& basis) {
  const auto m = basis.size();
  return (basis.a * basis.b - MatrixX<Scalar>::Identity(m, m)).cwiseAbs().maxCoeff();
}

}  // namespace fracsmp
