#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>
#include <utility>

#include "skrr/sketch.hpp"

namespace skrr {

/// Eigendecomposition of K/n: sigma holds the eigenvalues sorted in
/// descending order and clamped at zero, U the paired orthonormal
/// eigenvectors (column i goes with sigma[i]).
struct SpectralProfile {
  Index n = 0;
  Vector sigma;
  Matrix U;
};

inline SpectralProfile decompose(const Matrix& K) {
  const Index n = K.rows();
  if (K.cols() != n) throw std::invalid_argument("decompose: K must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(K / static_cast<double>(n));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("decompose: eigensolver did not converge");
  SpectralProfile profile;
  profile.n = n;
  profile.sigma = es.eigenvalues().reverse().cwiseMax(0.0);
  profile.U = es.eigenvectors().rowwise().reverse();
  return profile;
}

/// Effective rank at level delta: the number of eigenvalues of K/n that
/// exceed delta (n when none is <= delta, 0 when delta >= sigma_1).
inline Index d_delta(const SpectralProfile& profile, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("d_delta: delta must be positive");
  return (profile.sigma.array() > delta).count();
}

/// Ridge leverage scores l_i = (K (K + n lambda I)^{-1})_{ii}, evaluated in
/// spectral form as sum_j U_ij^2 sigma_j / (sigma_j + lambda).
inline Vector leverage_scores(const SpectralProfile& profile, double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("leverage_scores: lambda must be positive");
  const Vector w = profile.sigma.array() / (profile.sigma.array() + lambda);
  return profile.U.array().square().matrix() * w;
}

/// d_stat = sum_i sigma_i / (sigma_i + delta) = sum_i l_i(delta).
inline double statistical_dimension(const SpectralProfile& profile,
                                    double delta) {
  if (!(delta > 0.0))
    throw std::invalid_argument("statistical_dimension: delta must be positive");
  return (profile.sigma.array() / (profile.sigma.array() + delta)).sum();
}

/// Squared column norms of Psi_delta: `full` is ||psi_i||^2 =
/// sum_j U_ij^2 sigma_j/(sigma_j + delta), `head` restricts the sum to the
/// first d_delta eigendirections.
struct PsiColumnNorms {
  Vector full;
  Vector head;
};

inline PsiColumnNorms psi_column_norms(const SpectralProfile& profile,
                                       double delta) {
  if (!(delta > 0.0))
    throw std::invalid_argument("psi_column_norms: delta must be positive");
  const Index k = d_delta(profile, delta);
  const Vector w = profile.sigma.array() / (profile.sigma.array() + delta);
  const Matrix U2 = profile.U.array().square();
  PsiColumnNorms norms;
  norms.full = U2 * w;
  norms.head = U2.leftCols(k) * w.head(k);
  return norms;
}

/// Incoherence M = max(max_i ||psi_tilde_i||^2 / p_i,
///                     max_i (||psi_i||^2 - ||psi_tilde_i||^2) / p_i).
/// Large values mean the sampling probabilities are badly matched to the
/// leverage structure and a bigger m*d budget is needed.
inline double incoherence(const SpectralProfile& profile, double delta,
                          const SamplingDistribution& P) {
  if (P.size() != profile.n)
    throw std::invalid_argument("incoherence: distribution size mismatch");
  const PsiColumnNorms norms = psi_column_norms(profile, delta);
  const double head = (norms.head.array() / P.p.array()).maxCoeff();
  const double tail =
      ((norms.full - norms.head).array() / P.p.array()).maxCoeff();
  return std::max(head, tail);
}

/// Outcome of the two-condition spectral check on a sketch: condition 1
/// bounds ||U_1^T S S^T U_1 - I|| by 1/2, condition 2 bounds
/// ||S^T U_2 Sigma_2^{1/2}|| by c sqrt(delta).
struct SatisfiabilityReport {
  double cond1_value = 0.0;
  double cond2_value = 0.0;
  double delta = 0.0;
  double c = 1.0;
  bool pass1 = false;
  bool pass2 = false;
  bool pass() const { return pass1 && pass2; }
};

/// Evaluates both conditions at level delta. A vacuous side (d_delta = 0
/// for condition 1, d_delta = n for condition 2) reports value 0 and pass.
inline SatisfiabilityReport check_k_satisfiability(
    const SketchMatrix& S, const SpectralProfile& profile, double delta,
    double c = 1.0) {
  if (S.n != profile.n)
    throw std::invalid_argument("check_k_satisfiability: sketch rows != n");
  if (!(delta > 0.0) || !(c > 0.0))
    throw std::invalid_argument("check_k_satisfiability: delta and c must be positive");
  const Index n = profile.n;
  const Index k = d_delta(profile, delta);
  SatisfiabilityReport report;
  report.delta = delta;
  report.c = c;

  if (k > 0) {
    const Matrix G = transpose_apply(S, profile.U.leftCols(k));  // d x k
    Matrix T = G.transpose() * G;
    T.diagonal().array() -= 1.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(T, Eigen::EigenvaluesOnly);
    report.cond1_value = es.eigenvalues().cwiseAbs().maxCoeff();
  }
  report.pass1 = report.cond1_value <= 0.5;

  if (k < n) {
    const Matrix B = transpose_apply(S, profile.U.rightCols(n - k));
    const Matrix T =
        B * profile.sigma.tail(n - k).asDiagonal() * B.transpose();  // d x d
    Eigen::SelfAdjointEigenSolver<Matrix> es(T, Eigen::EigenvaluesOnly);
    report.cond2_value = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  report.pass2 = report.cond2_value <= c * std::sqrt(delta);
  return report;
}

/// Two-cluster block-diagonal instance. The dense cluster occupies the
/// first `dense_size` coordinates with block v [(1-c) I + c a h h^T] for
/// variance v, correlation c and a unit direction h; the sparse cluster is
/// the remaining n - dense_size mutually uncorrelated unit-variance points.
///
/// With anchor_mass = 0 the direction h is uniform over the cluster (plain
/// (1-c) I + c J correlation). A positive anchor_mass puts that share of
/// the cluster's principal direction on its first point, concentrating the
/// top eigendirection on one rarely-sampled coordinate. Either way, for a
/// level delta separating the two blocks' spectra, uniform sampling sees
/// incoherence M >= n/2.
inline Matrix block_diagonal_instance(Index n, Index dense_size,
                                      double dense_variance, double dense_corr,
                                      double anchor_mass = 0.0) {
  if (dense_size < 1 || dense_size >= n)
    throw std::invalid_argument("block_diagonal_instance: need 1 <= dense_size < n");
  if (!(dense_variance > 0.0) || !(dense_corr > 0.0) || !(dense_corr < 1.0))
    throw std::invalid_argument("block_diagonal_instance: bad block parameters");
  if (!(anchor_mass >= 0.0) || !(anchor_mass < 1.0))
    throw std::invalid_argument("block_diagonal_instance: bad anchor_mass");
  if (anchor_mass > 0.0 && dense_size < 2)
    throw std::invalid_argument("block_diagonal_instance: anchor needs dense_size >= 2");
  const Index a = dense_size;
  Vector h = Vector::Constant(a, 1.0 / std::sqrt(static_cast<double>(a)));
  if (anchor_mass > 0.0) {
    h[0] = std::sqrt(anchor_mass);
    h.tail(a - 1).setConstant(
        std::sqrt((1.0 - anchor_mass) / static_cast<double>(a - 1)));
  }
  Matrix K = Matrix::Identity(n, n);
  K.topLeftCorner(a, a) =
      dense_variance * ((1.0 - dense_corr) * Matrix::Identity(a, a) +
                        dense_corr * static_cast<double>(a) * h * h.transpose());
  return K;
}

}  // namespace skrr
