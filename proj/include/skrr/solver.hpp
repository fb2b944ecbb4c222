#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <stdexcept>

#include "skrr/kernel.hpp"
#include "skrr/sketch.hpp"

namespace skrr {

namespace detail {

/// Solve A x = b for symmetric positive-definite A via Cholesky, with one
/// jitter retry (add 1e-10 * trace(A)/dim to the diagonal) before giving up.
/// A singular system after the retry signals a degenerate sketch or a
/// kernel matrix far from PSD.
inline Vector solve_spd(Matrix A, const Vector& b) {
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  const double jitter = 1e-10 * A.trace() / static_cast<double>(A.rows());
  A.diagonal().array() += jitter;
  llt.compute(A);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("solve_spd: factorization failed after jitter retry");
  return llt.solve(b);
}

}  // namespace detail

/// Exact KRR fit: alpha = (K + n lambda I)^{-1} Y plus the metadata needed
/// to predict at new points.
struct ExactFit {
  Vector alpha;
  double lambda = 0.0;
  KernelSpec spec;
  Matrix X;
};

/// Sketched KRR fit: beta solves (S^T K^2 S + n lambda S^T K S) beta =
/// S^T K Y; s_beta = S beta is cached so prediction cost matches the
/// exact estimator regardless of sketch type.
struct SketchedFit {
  Vector beta;
  SketchMatrix S;
  Vector s_beta;
  double lambda = 0.0;
  KernelSpec spec;
  Matrix X;
};

inline ExactFit fit_exact(const Matrix& K, const Vector& Y, double lambda,
                          const KernelSpec& spec, const Matrix& X) {
  const Index n = K.rows();
  if (K.cols() != n || Y.size() != n)
    throw std::invalid_argument("fit_exact: dimension mismatch");
  if (!(lambda > 0.0))
    throw std::invalid_argument("fit_exact: lambda must be positive");
  if (!K.allFinite() || !Y.allFinite())
    throw std::invalid_argument("fit_exact: non-finite input");
  Matrix A = K;
  A.diagonal().array() += static_cast<double>(n) * lambda;
  ExactFit fit;
  fit.alpha = detail::solve_spd(std::move(A), Y);
  fit.lambda = lambda;
  fit.spec = spec;
  fit.X = X;
  return fit;
}

/// Sketch-and-solve estimator. Forms C = K S once; K is never read
/// entrywise beyond that product, so the total cost is O(n^2 d) with the
/// structured-product saving on the S^T K S term.
inline SketchedFit fit_sketched(const Matrix& K, const Vector& Y,
                                double lambda, const SketchMatrix& S,
                                const KernelSpec& spec, const Matrix& X) {
  const Index n = K.rows();
  if (K.cols() != n || Y.size() != n || S.n != n)
    throw std::invalid_argument("fit_sketched: dimension mismatch");
  if (!(lambda > 0.0))
    throw std::invalid_argument("fit_sketched: lambda must be positive");
  const Matrix C = right_multiply(K, S);
  const Matrix B = transpose_apply(S, C);  // S^T K S up to round-off
  Matrix A = C.transpose() * C;
  A.noalias() += (static_cast<double>(n) * lambda * 0.5) * (B + B.transpose());
  SketchedFit fit;
  fit.beta = detail::solve_spd(std::move(A), C.transpose() * Y);
  fit.S = S;
  fit.s_beta = multiply(S, fit.beta);
  fit.lambda = lambda;
  fit.spec = spec;
  fit.X = X;
  return fit;
}

inline double predict(const ExactFit& fit, const Eigen::Ref<const Vector>& x) {
  return cross_row(fit.spec, x, fit.X).dot(fit.alpha);
}

inline double predict(const SketchedFit& fit,
                      const Eigen::Ref<const Vector>& x) {
  return cross_row(fit.spec, x, fit.X).dot(fit.s_beta);
}

inline Vector predict_many(const ExactFit& fit, const Matrix& Xq) {
  return cross_gram(fit.spec, Xq, fit.X) * fit.alpha;
}

inline Vector predict_many(const SketchedFit& fit, const Matrix& Xq) {
  return cross_gram(fit.spec, Xq, fit.X) * fit.s_beta;
}

/// Fitted values at the training points, computed from a precomputed K
/// without re-evaluating the kernel.
inline Vector in_sample(const ExactFit& fit, const Matrix& K) {
  return K * fit.alpha;
}

inline Vector in_sample(const SketchedFit& fit, const Matrix& K) {
  return K * fit.s_beta;
}

/// Averaged squared empirical norm (1/n) sum_i (u_i - v_i)^2.
inline double empirical_sq_norm(const Vector& u, const Vector& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("empirical_sq_norm: length mismatch");
  return (u - v).squaredNorm() / static_cast<double>(u.size());
}

}  // namespace skrr
