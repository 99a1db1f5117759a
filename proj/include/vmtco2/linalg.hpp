#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "vmtco2/weights.hpp"

namespace vmtco2::linalg {

/// Least-squares solution with the unscaled covariance (X'X)^-1.
template <typename Scalar>
struct LeastSquares {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coef;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> residuals;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> xtx_inv;
  Eigen::Index rank = 0;
  /// Columns found linearly dependent on earlier ones (empty when full rank).
  std::vector<Eigen::Index> dependent_columns;
};

/// Column-pivoted QR least squares. Rank is decided relative to the largest
/// diagonal of R; dependent columns are reported rather than solved.
template <typename DerivedX, typename DerivedY>
LeastSquares<typename DerivedX::Scalar> least_squares(const Eigen::MatrixBase<DerivedX>& x,
                                                      const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  LeastSquares<Scalar> out;
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(Scalar(1e-10));
  out.rank = qr.rank();
  const Eigen::Index p = x.cols();
  if (out.rank < p) {
    for (Eigen::Index i = out.rank; i < p; ++i) out.dependent_columns.push_back(qr.colsPermutation().indices()(i));
    return out;
  }
  out.coef = qr.solve(y);
  out.residuals = y - x * out.coef;
  const Matrix r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Matrix rinv = r.template triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  const Matrix pinv = qr.colsPermutation() * rinv;
  out.xtx_inv = pinv * pinv.transpose();
  return out;
}

/// Squared Pearson correlation of two vectors.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_correlation(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const auto ac = (a.array() - a.mean()).matrix().eval();
  const auto bc = (b.array() - b.mean()).matrix().eval();
  const Scalar denom = ac.squaredNorm() * bc.squaredNorm();
  if (!(denom > Scalar(0))) return Scalar(0);
  const Scalar c = ac.dot(bc);
  return c * c / denom;
}

/// ln|det(I - rho W)| by dense partial-pivot LU. Cross-check route.
double logdet_dense_lu(const SparseRowMatrix& w, double rho);

/// ln|det(I - rho W)| by sparse LU, recomputed per rho.
double logdet_sparse_lu(const SparseRowMatrix& w, double rho);

/// ln|det(I - rho W)| as a function of rho. Below `dense_limit` rows the
/// eigenvalues of W are computed once and reused for every rho; above it each
/// evaluation factorises I - rho W with a sparse LU.
class LogDeterminant {
 public:
  static constexpr Eigen::Index kDefaultDenseLimit = 2000;

  explicit LogDeterminant(const SparseRowMatrix& w, Eigen::Index dense_limit = kDefaultDenseLimit);

  double operator()(double rho) const;
  /// d/drho ln|I - rho W| = -sum lambda / (1 - rho lambda).
  double derivative(double rho) const;
  bool uses_eigenvalues() const { return use_eigen_; }
  const Eigen::VectorXcd& eigenvalues() const { return eigenvalues_; }
  /// Largest eigenvalue modulus; only available on the eigenvalue path.
  double spectral_radius() const;

 private:
  const SparseRowMatrix* w_;
  bool use_eigen_ = true;
  Eigen::VectorXcd eigenvalues_;
};

/// Maximises a smooth function of one variable over (lo, hi): coarse grid
/// seed, golden-section refinement of the best grid cell, then bisection on
/// the supplied derivative when it changes sign inside that cell.
struct ScalarOptimum {
  double argmax = 0.0;
  double value = 0.0;
  bool interior = true;
  /// (x, f(x)) grid evaluations, reported on failure.
  std::vector<std::pair<double, double>> trace;
};

template <typename F, typename DF>
ScalarOptimum maximize_on_interval(F&& f, DF&& df, double lo, double hi, const std::vector<double>& grid,
                                   double tolerance = 1e-6) {
  ScalarOptimum out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = f(grid[i]);
    out.trace.emplace_back(grid[i], v);
    if (i == 0 || v > out.trace[best].second) best = i;
  }
  double a = best == 0 ? lo : grid[best - 1];
  double b = best + 1 == grid.size() ? hi : grid[best + 1];
  const double a0 = a;
  const double b0 = b;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tolerance) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  double x = 0.5 * (a + b);
  // Polish on the derivative so the stationarity condition holds tightly.
  double l = std::max(a0, a - 2 * tolerance);
  double r = std::min(b0, b + 2 * tolerance);
  double gl = df(l);
  double gr = df(r);
  if (gl > 0.0 && gr < 0.0) {
    for (int it = 0; it < 200 && r - l > 1e-15 * std::max(1.0, std::abs(l)); ++it) {
      const double m = 0.5 * (l + r);
      if (df(m) > 0.0) l = m; else r = m;
    }
    x = 0.5 * (l + r);
  }
  out.argmax = x;
  out.value = f(x);
  const double margin = 10 * tolerance;
  out.interior = x > lo + margin && x < hi - margin;
  return out;
}

/// The 39-point seed grid -0.95, -0.90, ..., 0.95.
std::vector<double> spatial_parameter_grid();

}  // namespace vmtco2::linalg
