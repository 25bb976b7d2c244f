#pragma once

// Dense kernels shared by every module. Everything is expressed over Eigen
// types; the templates accept any dense expression of matching scalar type.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <string>

#include "dsch/errors.hpp"

namespace dsch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

template <class Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  std::ostringstream os;
  os << '[' << m.rows() << 'x' << m.cols() << ']';
  return os.str();
}

template <class A, class B>
Eigen::Matrix<typename A::Scalar, Eigen::Dynamic, Eigen::Dynamic> matmul(
    const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_string(a) + " x " +
                     shape_string(b));
  }
  return a * b;
}

/// Cosine of the angle between two vectors of equal length.
template <class X, class Y>
typename X::Scalar cosine_sim(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<Y>& y) {
  if (x.size() != y.size()) {
    throw ShapeError("cosine_sim: " + shape_string(x) + " vs " + shape_string(y));
  }
  using Scalar = typename X::Scalar;
  const Scalar nx = x.norm();
  const Scalar ny = y.norm();
  if (!(nx > Scalar(0)) || !(ny > Scalar(0))) {
    throw DegenerateInputError("cosine_sim: zero-norm argument");
  }
  Scalar dot(0);
  for (Index i = 0; i < x.size(); ++i) dot += x(i) * y(i);
  return dot / (nx * ny);
}

/// Lower Cholesky factor of a symmetric matrix. Only the lower triangle is read.
/// Throws NonPsdError naming the first diagonal index whose pivot is not positive.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> cholesky_lower(
    const Eigen::MatrixBase<Derived>& sigma) {
  using Scalar = typename Derived::Scalar;
  if (sigma.rows() != sigma.cols()) {
    throw ShapeError("cholesky: matrix is not square, " + shape_string(sigma));
  }
  const Index n = sigma.rows();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> l =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    Scalar pivot = sigma(j, j);
    for (Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > Scalar(0)) || !std::isfinite(static_cast<double>(pivot))) {
      throw NonPsdError(static_cast<std::size_t>(j), "cholesky failed");
    }
    const Scalar d = std::sqrt(pivot);
    l(j, j) = d;
    for (Index i = j + 1; i < n; ++i) {
      Scalar s = sigma(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
  }
  return l;
}

/// Ridge schedule applied before covariance factorization: the first ridge
/// that yields a factor wins, the last failure propagates.
inline constexpr double kCovarianceRidges[] = {1e-6, 1e-3};

template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> cholesky_regularized(
    const Eigen::MatrixBase<Derived>& sigma, std::span<const double> ridges = kCovarianceRidges) {
  using Scalar = typename Derived::Scalar;
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (ridges.empty()) return cholesky_lower(sigma);
  for (std::size_t attempt = 0;; ++attempt) {
    M shifted = sigma;
    shifted.diagonal().array() += Scalar(ridges[attempt]);
    try {
      return cholesky_lower(shifted);
    } catch (const NonPsdError&) {
      if (attempt + 1 == ridges.size()) throw;
    }
  }
}

/// A multivariate normal prepared for repeated density evaluation.
template <class Scalar>
class GaussianFactor {
 public:
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  GaussianFactor(VectorType mean, MatrixType lower) : mean_(std::move(mean)), lower_(std::move(lower)) {
    if (lower_.rows() != mean_.size() || lower_.cols() != mean_.size()) {
      throw ShapeError("GaussianFactor: mean " + shape_string(mean_) + " vs factor " +
                       shape_string(lower_));
    }
    const Scalar log2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    log_norm_ = Scalar(-0.5) * Scalar(mean_.size()) * log2pi - lower_.diagonal().array().log().sum();
  }

  Index dim() const { return mean_.size(); }
  const VectorType& mean() const { return mean_; }
  const MatrixType& lower() const { return lower_; }
  Scalar log_normalizer() const { return log_norm_; }

  template <class X>
  Scalar logpdf(const Eigen::MatrixBase<X>& x) const {
    if (x.size() != mean_.size()) {
      throw ShapeError("logpdf: point " + shape_string(x) + " vs mean " + shape_string(mean_));
    }
    VectorType diff = x.derived().reshaped() - mean_;
    lower_.template triangularView<Eigen::Lower>().solveInPlace(diff);
    return log_norm_ - Scalar(0.5) * diff.squaredNorm();
  }

  /// Log density of every row of `points`.
  template <class X>
  VectorType logpdf_rows(const Eigen::MatrixBase<X>& points) const {
    if (points.cols() != mean_.size()) {
      throw ShapeError("logpdf_rows: points " + shape_string(points) + " vs mean " +
                       shape_string(mean_));
    }
    MatrixType diff = (points.rowwise() - mean_.transpose()).transpose();
    lower_.template triangularView<Eigen::Lower>().solveInPlace(diff);
    return (log_norm_ - Scalar(0.5) * diff.colwise().squaredNorm().array()).matrix().transpose();
  }

 private:
  VectorType mean_;
  MatrixType lower_;
  Scalar log_norm_{};
};

/// log N(x | mu, sigma). Sigma is factored as given; callers that need a
/// ridge apply it (see cholesky_regularized).
template <class X, class M, class S>
typename X::Scalar mvn_logpdf(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<M>& mu,
                              const Eigen::MatrixBase<S>& sigma) {
  using Scalar = typename X::Scalar;
  if (sigma.rows() != mu.size() || sigma.cols() != mu.size()) {
    throw ShapeError("mvn_logpdf: mean " + shape_string(mu) + " vs covariance " + shape_string(sigma));
  }
  GaussianFactor<Scalar> g(mu.derived().reshaped(), cholesky_lower(sigma));
  return g.logpdf(x);
}

/// Numerically stable log(sum(exp(v))).
template <class Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(static_cast<double>(m))) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace dsch
