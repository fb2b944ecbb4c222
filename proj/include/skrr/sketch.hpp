#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "skrr/kernel.hpp"
#include "skrr/rng.hpp"

namespace skrr {

/// Discrete distribution over row indices with a prefix-sum table for
/// inverse-CDF draws. All probabilities must be strictly positive.
struct SamplingDistribution {
  Vector p;
  Vector cumulative;

  Index size() const { return p.size(); }

  /// One inverse-CDF draw: consumes exactly one uniform01() and returns the
  /// first index whose cumulative mass exceeds it.
  Index sample(RngStream& rng) const {
    const double u = rng.uniform01();
    const double* begin = cumulative.data();
    const double* end = begin + cumulative.size();
    const double* it = std::upper_bound(begin, end, u);
    return std::min<Index>(it - begin, cumulative.size() - 1);
  }
};

inline SamplingDistribution uniform_distribution(Index n) {
  if (n < 1) throw std::invalid_argument("uniform_distribution: n must be >= 1");
  SamplingDistribution dist;
  dist.p = Vector::Constant(n, 1.0 / static_cast<double>(n));
  dist.cumulative.resize(n);
  for (Index i = 0; i < n; ++i)
    dist.cumulative[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  dist.cumulative[n - 1] = 1.0;
  return dist;
}

/// Sampling probabilities proportional to the given leverage scores.
inline SamplingDistribution leverage_distribution(const Vector& leverage) {
  if (leverage.size() < 1)
    throw std::invalid_argument("leverage_distribution: empty scores");
  if (!leverage.allFinite() || (leverage.array() <= 0.0).any())
    throw std::invalid_argument(
        "leverage_distribution: scores must be positive and finite");
  SamplingDistribution dist;
  dist.p = leverage / leverage.sum();
  dist.cumulative.resize(dist.p.size());
  double acc = 0.0;
  for (Index i = 0; i < dist.p.size(); ++i) {
    acc += dist.p[i];
    dist.cumulative[i] = acc;
  }
  dist.cumulative[dist.p.size() - 1] = 1.0;
  return dist;
}

/// An n-by-d sketching matrix.
///
/// `structured` is the accumulation of m rescaled, randomly signed
/// sub-sampling matrices: entry e = round * d + column selects
/// selected_rows[e] with signed weight signed_weights[e]
/// (sign / sqrt(d * m * p_row)). `dense` stores explicit values.
struct SketchMatrix {
  enum class Kind { structured, dense };

  Kind kind = Kind::dense;
  Index n = 0;
  Index d = 0;
  int m = 0;  // accumulation count, structured only
  std::vector<Index> selected_rows;
  std::vector<double> signed_weights;
  Matrix dense_values;

  Index entry_count() const { return static_cast<Index>(selected_rows.size()); }
};

/// Algorithm: m rounds of d signed, rescaled index selections.
///
/// Draw order is fixed for reproducibility: for round i = 0..m-1, for
/// column j = 0..d-1, one index draw from P followed by one Rademacher
/// sign draw. Identical seeds give identical sketches.
inline SketchMatrix build_accumulation(Index n, Index d, int m,
                                       const SamplingDistribution& P,
                                       RngStream& rng) {
  if (d < 1 || m < 1)
    throw std::invalid_argument("build_accumulation: d and m must be >= 1");
  if (P.size() != n)
    throw std::invalid_argument("build_accumulation: distribution size != n");
  SketchMatrix S;
  S.kind = SketchMatrix::Kind::structured;
  S.n = n;
  S.d = d;
  S.m = m;
  S.selected_rows.resize(static_cast<std::size_t>(m) * d);
  S.signed_weights.resize(static_cast<std::size_t>(m) * d);
  const double dm = static_cast<double>(d) * static_cast<double>(m);
  for (int i = 0; i < m; ++i) {
    for (Index j = 0; j < d; ++j) {
      const Index row = P.sample(rng);
      const double sign = rng.rademacher();
      const std::size_t e = static_cast<std::size_t>(i) * d + j;
      S.selected_rows[e] = row;
      S.signed_weights[e] = sign / std::sqrt(dm * P.p[row]);
    }
  }
  return S;
}

/// Dense sketch with i.i.d. N(0, 1/d) entries, so E[S S^T] = I_n.
/// Entries are drawn in column-major order.
inline SketchMatrix build_gaussian(Index n, Index d, RngStream& rng) {
  if (d < 1) throw std::invalid_argument("build_gaussian: d must be >= 1");
  SketchMatrix S;
  S.kind = SketchMatrix::Kind::dense;
  S.n = n;
  S.d = d;
  S.dense_values.resize(n, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < n; ++i)
      S.dense_values(i, j) = scale * rng.normal();
  return S;
}

/// Very sparse random projection: entries sqrt(s/d) * {+1 w.p. 1/(2s),
/// -1 w.p. 1/(2s), 0 otherwise}, drawn in column-major order. One uniform
/// draw per entry. Second moment of each entry is 1/d, so E[S S^T] = I_n.
inline SketchMatrix build_sparse_projection(Index n, Index d, double s,
                                            RngStream& rng) {
  if (d < 1) throw std::invalid_argument("build_sparse_projection: d must be >= 1");
  if (!(s >= 1.0))
    throw std::invalid_argument("build_sparse_projection: s must be >= 1");
  SketchMatrix S;
  S.kind = SketchMatrix::Kind::dense;
  S.n = n;
  S.d = d;
  S.dense_values.resize(n, d);
  const double mag = std::sqrt(s / static_cast<double>(d));
  const double half = 0.5 / s;
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double u = rng.uniform01();
      S.dense_values(i, j) = u < half ? mag : (u < 2.0 * half ? -mag : 0.0);
    }
  }
  return S;
}

/// Dense identity sketch (d = n); debugging reference for which the
/// sketched estimator reproduces exact KRR.
inline SketchMatrix build_identity(Index n) {
  SketchMatrix S;
  S.kind = SketchMatrix::Kind::dense;
  S.n = n;
  S.d = n;
  S.dense_values = Matrix::Identity(n, n);
  return S;
}

/// Structured entries summed into an explicit n-by-d matrix; collisions
/// across rounds add. Dense sketches pass through.
inline Matrix to_dense(const SketchMatrix& S) {
  if (S.kind == SketchMatrix::Kind::dense) return S.dense_values;
  Matrix D = Matrix::Zero(S.n, S.d);
  for (Index e = 0; e < S.entry_count(); ++e)
    D(S.selected_rows[e], e % S.d) += S.signed_weights[e];
  return D;
}

/// C = K S. The structured path accumulates scaled columns of K in
/// Theta(n m d) time instead of the dense Theta(n^2 d) product.
inline Matrix right_multiply(const Matrix& K, const SketchMatrix& S) {
  if (K.cols() != S.n)
    throw std::invalid_argument("right_multiply: dimension mismatch");
  if (S.kind == SketchMatrix::Kind::dense) return K * S.dense_values;
  Matrix C = Matrix::Zero(K.rows(), S.d);
  for (Index e = 0; e < S.entry_count(); ++e)
    C.col(e % S.d) += S.signed_weights[e] * K.col(S.selected_rows[e]);
  return C;
}

/// S^T V for an n-by-k matrix V; Theta(m d k) on the structured path.
inline Matrix transpose_apply(const SketchMatrix& S, const Matrix& V) {
  if (V.rows() != S.n)
    throw std::invalid_argument("transpose_apply: dimension mismatch");
  if (S.kind == SketchMatrix::Kind::dense)
    return S.dense_values.transpose() * V;
  Matrix out = Matrix::Zero(S.d, V.cols());
  for (Index e = 0; e < S.entry_count(); ++e)
    out.row(e % S.d) += S.signed_weights[e] * V.row(S.selected_rows[e]);
  return out;
}

/// S b for a d-vector b (used to cache S * beta at fit time).
inline Vector multiply(const SketchMatrix& S, const Vector& b) {
  if (b.size() != S.d)
    throw std::invalid_argument("multiply: dimension mismatch");
  if (S.kind == SketchMatrix::Kind::dense) return S.dense_values * b;
  Vector out = Vector::Zero(S.n);
  for (Index e = 0; e < S.entry_count(); ++e)
    out[S.selected_rows[e]] += S.signed_weights[e] * b[e % S.d];
  return out;
}

}  // namespace skrr
