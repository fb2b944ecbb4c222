#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skrr/kernel.hpp"
#include "skrr/rng.hpp"

namespace skrr {

/// Bimodal generator settings: each sample lands in Unif[0,1]^dim with
/// probability n/(n + n^gamma) and otherwise in the dense mode on
/// [2, 2.5]^dim whose per-coordinate density is 4(5 - 2x).
struct BimodalConfig {
  Index n = 0;
  double gamma = 0.6;
  Index dim = 3;

  void validate() const {
    if (n < 1) throw std::invalid_argument("BimodalConfig: n must be >= 1");
    if (!(gamma > 0.0) || !(gamma < 1.0))
      throw std::invalid_argument("BimodalConfig: gamma must be in (0, 1)");
    if (dim < 1) throw std::invalid_argument("BimodalConfig: dim must be >= 1");
  }
};

/// Mixing weight n^gamma / (n + n^gamma) of the dense [2, 2.5]^dim mode.
inline double dense_mode_weight(Index n, double gamma) {
  const double ng = std::pow(static_cast<double>(n), gamma);
  return ng / (static_cast<double>(n) + ng);
}

/// Inverse CDF of the normalized density 4(5 - 2x) on [2, 2.5]:
/// F(x) = 4(5x - x^2 - 6), so x = (5 - sqrt(1 - u)) / 2.
inline double dense_mode_inverse_cdf(double u) {
  return (5.0 - std::sqrt(1.0 - u)) / 2.0;
}

/// Draws cfg.n rows. Per row: one mixture draw, then exactly dim
/// coordinate draws on either branch, in row-major order.
inline Matrix gen_bimodal(const BimodalConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double w_dense = dense_mode_weight(cfg.n, cfg.gamma);
  Matrix X(cfg.n, cfg.dim);
  for (Index i = 0; i < cfg.n; ++i) {
    const bool dense = rng.uniform01() < w_dense;
    for (Index j = 0; j < cfg.dim; ++j) {
      const double u = rng.uniform01();
      X(i, j) = dense ? dense_mode_inverse_cdf(u) : u;
    }
  }
  return X;
}

/// g(t) = 1.6 |(t - 0.4)(t - 0.6)| - t(t - 1)(t - 2) - 0.5.
inline double g_scalar(double t) {
  return 1.6 * std::abs((t - 0.4) * (t - 0.6)) -
         t * (t - 1.0) * (t - 2.0) - 0.5;
}

/// True regression function f*(x) = g(||x|| / 3); rotation invariant.
inline double f_star(const Eigen::Ref<const Vector>& x) {
  if (!x.allFinite()) throw std::invalid_argument("f_star: non-finite input");
  return g_scalar(x.norm() / 3.0);
}

inline Vector f_star_values(const Matrix& X) {
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) out[i] = g_scalar(X.row(i).norm() / 3.0);
  return out;
}

/// Inputs, noisy responses and the noiseless truth for one synthetic or
/// ingested dataset. For CSV data f_star is set to Y and noise_sd to 0.
struct RegressionDataset {
  Matrix X;
  Vector Y;
  Vector f_star;
  double noise_sd = 0.0;
};

/// Bimodal inputs plus Y = f*(x_i) + N(0, noise_sd^2) noise. Consumes the
/// stream in a fixed order: all input rows first, then n noise draws.
inline RegressionDataset make_dataset(const BimodalConfig& cfg,
                                      double noise_sd, RngStream& rng) {
  if (!(noise_sd >= 0.0))
    throw std::invalid_argument("make_dataset: noise_sd must be >= 0");
  RegressionDataset ds;
  ds.X = gen_bimodal(cfg, rng);
  ds.f_star = f_star_values(ds.X);
  ds.Y = ds.f_star;
  ds.noise_sd = noise_sd;
  if (noise_sd > 0.0)
    for (Index i = 0; i < cfg.n; ++i) ds.Y[i] += noise_sd * rng.normal();
  return ds;
}

struct TrainTestSplit {
  RegressionDataset train;
  RegressionDataset test;
};

namespace detail {

struct RawCsv {
  std::vector<std::string> header;
  Matrix values;  // all numeric columns, row per record
};

inline RawCsv read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  RawCsv raw;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) raw.header.push_back(cell);
  }
  const std::size_t ncol = raw.header.size();
  std::vector<double> data;
  std::size_t nrow = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t consumed = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &consumed);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: non-numeric cell '" + cell + "'");
      }
      if (consumed != cell.size())
        throw std::runtime_error("load_csv: non-numeric cell '" + cell + "'");
      data.push_back(v);
      ++col;
    }
    if (col != ncol)
      throw std::runtime_error("load_csv: ragged row in " + path);
    ++nrow;
  }
  if (nrow == 0) throw std::runtime_error("load_csv: no data rows in " + path);
  raw.values.resize(nrow, ncol);
  for (std::size_t i = 0; i < nrow; ++i)
    for (std::size_t j = 0; j < ncol; ++j)
      raw.values(i, j) = data[i * ncol + j];
  return raw;
}

/// Resolves a target column given by name, or by zero-based index when the
/// string is all digits and matches no column name.
inline Index resolve_target_column(const std::vector<std::string>& header,
                                   const std::string& target) {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == target) return static_cast<Index>(j);
  if (!target.empty() &&
      std::all_of(target.begin(), target.end(),
                  [](unsigned char c) { return std::isdigit(c); })) {
    const Index j = static_cast<Index>(std::stoll(target));
    if (j >= 0 && j < static_cast<Index>(header.size())) return j;
  }
  throw std::runtime_error("load_csv: target column '" + target + "' not found");
}

}  // namespace detail

/// Reads a numeric CSV with a header row, splits it at test_fraction with a
/// Fisher-Yates shuffle of the given stream, and scales every feature
/// column by its training-split sample standard deviation (train statistics
/// applied to both splits). Throws on unreadable files, non-numeric cells
/// and constant feature columns.
inline TrainTestSplit load_csv(const std::string& path,
                               const std::string& target_column,
                               double test_fraction, RngStream& rng) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
    throw std::invalid_argument("load_csv: test_fraction must be in (0, 1)");
  const detail::RawCsv raw = detail::read_numeric_csv(path);
  const Index target = detail::resolve_target_column(raw.header, target_column);
  const Index nrow = raw.values.rows();
  const Index ncol = raw.values.cols();
  if (ncol < 2) throw std::runtime_error("load_csv: need at least one feature column");

  std::vector<Index> order(nrow);
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = nrow - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.uniform01() * static_cast<double>(i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  Index n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(nrow)));
  n_test = std::clamp<Index>(n_test, 1, nrow - 1);
  const Index n_train = nrow - n_test;

  const Index nfeat = ncol - 1;
  auto fill = [&](RegressionDataset& ds, Index begin, Index count) {
    ds.X.resize(count, nfeat);
    ds.Y.resize(count);
    for (Index r = 0; r < count; ++r) {
      const Index src = order[begin + r];
      Index f = 0;
      for (Index c = 0; c < ncol; ++c) {
        if (c == target) continue;
        ds.X(r, f++) = raw.values(src, c);
      }
      ds.Y[r] = raw.values(src, target);
    }
    ds.f_star = ds.Y;
    ds.noise_sd = 0.0;
  };
  TrainTestSplit split;
  fill(split.train, 0, n_train);
  fill(split.test, n_train, n_test);

  for (Index f = 0; f < nfeat; ++f) {
    const double mean = split.train.X.col(f).mean();
    const double var =
        (split.train.X.col(f).array() - mean).square().sum() /
        static_cast<double>(std::max<Index>(n_train - 1, 1));
    if (!(var > 0.0))
      throw std::runtime_error("load_csv: constant feature column " +
                               std::to_string(f));
    const double sd = std::sqrt(var);
    split.train.X.col(f) /= sd;
    split.test.X.col(f) /= sd;
  }
  return split;
}

}  // namespace skrr
