#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace skrr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class KernelFamily { gaussian, matern };

/// Kernel family plus hyperparameters. Matern smoothness is restricted to
/// the half-integers {0.5, 1.5, 2.5} that have closed-form expressions.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 1.0;    // gaussian scale sigma
  double lengthscale = 1.0;  // matern scale ell
  double smoothness = 1.5;   // matern nu

  static KernelSpec gaussian(double bandwidth) {
    KernelSpec s;
    s.family = KernelFamily::gaussian;
    s.bandwidth = bandwidth;
    s.validate();
    return s;
  }

  static KernelSpec matern(double smoothness, double lengthscale) {
    KernelSpec s;
    s.family = KernelFamily::matern;
    s.smoothness = smoothness;
    s.lengthscale = lengthscale;
    s.validate();
    return s;
  }

  void validate() const {
    if (family == KernelFamily::gaussian) {
      if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw std::invalid_argument("KernelSpec: bandwidth must be positive and finite");
    } else {
      if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
        throw std::invalid_argument("KernelSpec: lengthscale must be positive and finite");
      if (smoothness != 0.5 && smoothness != 1.5 && smoothness != 2.5)
        throw std::invalid_argument("KernelSpec: matern smoothness must be 0.5, 1.5 or 2.5");
    }
  }
};

namespace detail {

/// Kernel value from a squared distance; shared by all evaluation paths.
inline double kernel_from_sq_dist(const KernelSpec& spec, double d2) {
  d2 = std::max(d2, 0.0);  // GEMM-based distances can round slightly negative
  if (spec.family == KernelFamily::gaussian)
    return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
  const double r = std::sqrt(d2);
  if (spec.smoothness == 0.5) return std::exp(-r / spec.lengthscale);
  if (spec.smoothness == 1.5) {
    const double t = std::numbers::sqrt3 * r / spec.lengthscale;
    return (1.0 + t) * std::exp(-t);
  }
  const double t = std::sqrt(5.0) * r / spec.lengthscale;
  return (1.0 + t + t * t / 3.0) * std::exp(-t);
}

}  // namespace detail

/// k(x, y) for one pair of points. Throws on dimension mismatch or
/// non-finite input; the result lies in (0, 1] for both families.
inline double eval_kernel(const KernelSpec& spec,
                          const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& y) {
  spec.validate();
  if (x.size() != y.size())
    throw std::invalid_argument("eval_kernel: dimension mismatch");
  if (!x.allFinite() || !y.allFinite())
    throw std::invalid_argument("eval_kernel: non-finite input");
  return detail::kernel_from_sq_dist(spec, (x - y).squaredNorm());
}

/// Empirical kernel matrix K with K_ij = k(x_i, x_j), rows of X as points.
///
/// The upper triangle is computed once and mirrored, so the result is
/// bitwise symmetric; the diagonal is set to 1 exactly.
inline Matrix gram(const KernelSpec& spec, const Matrix& X) {
  spec.validate();
  const Index n = X.rows();
  if (n < 1) throw std::invalid_argument("gram: need at least one sample");
  if (!X.allFinite()) throw std::invalid_argument("gram: non-finite input");

  const Vector sq = X.rowwise().squaredNorm();
  Matrix K(n, n);
  K.noalias() = -2.0 * X * X.transpose();
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < j; ++i) {
      const double kij = detail::kernel_from_sq_dist(spec, K(i, j) + sq[i] + sq[j]);
      K(i, j) = kij;
      K(j, i) = kij;
    }
    K(j, j) = 1.0;
  }
  return K;
}

/// Row vector [k(x, x_1), ..., k(x, x_n)] against the rows of X.
inline Vector cross_row(const KernelSpec& spec,
                        const Eigen::Ref<const Vector>& x, const Matrix& X) {
  spec.validate();
  if (x.size() != X.cols())
    throw std::invalid_argument("cross_row: dimension mismatch");
  if (!x.allFinite() || !X.allFinite())
    throw std::invalid_argument("cross_row: non-finite input");
  const double xsq = x.squaredNorm();
  Vector d2 = X.rowwise().squaredNorm();
  d2.noalias() += -2.0 * (X * x);
  d2.array() += xsq;
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i)
    out[i] = detail::kernel_from_sq_dist(spec, d2[i]);
  return out;
}

/// Rectangular kernel matrix between query rows A and data rows B.
inline Matrix cross_gram(const KernelSpec& spec, const Matrix& A,
                         const Matrix& B) {
  spec.validate();
  if (A.cols() != B.cols())
    throw std::invalid_argument("cross_gram: dimension mismatch");
  const Vector asq = A.rowwise().squaredNorm();
  const Vector bsq = B.rowwise().squaredNorm();
  Matrix K(A.rows(), B.rows());
  K.noalias() = -2.0 * A * B.transpose();
  for (Index j = 0; j < B.rows(); ++j)
    for (Index i = 0; i < A.rows(); ++i)
      K(i, j) = detail::kernel_from_sq_dist(spec, K(i, j) + asq[i] + bsq[j]);
  return K;
}

}  // namespace skrr
