// Acceptance suite: runs every shipped correctness and reproduction
// criterion end to end and prints one pass/fail line per criterion.
// Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "skrr/skrr.hpp"

using namespace skrr;

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(int index, const std::string& name, bool pass, double seconds,
            double budget_seconds, const std::string& details) {
  const bool in_budget = seconds < budget_seconds;
  const bool ok = pass && in_budget;
  if (!ok) ++g_failures;
  std::printf("[%s] criterion %2d: %-38s (%.1fs/%.0fs) %s\n",
              ok ? "PASS" : "FAIL", index, name.c_str(), seconds,
              budget_seconds, details.c_str());
  std::fflush(stdout);
}

Matrix random_spd(Index n, RngStream& rng, double ridge) {
  Matrix A(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) A(i, j) = rng.normal();
  Matrix K = A * A.transpose() / static_cast<double>(n);
  K.diagonal().array() += ridge;
  return K;
}

Vector random_vec(Index n, RngStream& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

const KernelSpec kDummySpec = KernelSpec::gaussian(1.0);

// The high-incoherence two-cluster instance shared by criteria 5 and 6:
// anchored principal direction, delta separating the blocks' spectra.
constexpr Index kBlockN = 64;
constexpr double kBlockDelta = 1.0 / 32.0;
Matrix block_instance() {
  return block_diagonal_instance(kBlockN, 4, 64.0, 1.0 - 1.0 / 64.0, 0.58);
}

// The m-sweep comparison at n = 2000 (criteria 7 and 8).
ExperimentConfig sweep_config() {
  auto j = preset_json("m-sweep");
  j["n_list"] = {2000};
  return parse_config(j);
}

void criterion_identity_exactness() {
  const auto t0 = Clock::now();
  RngStream rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.uniform01() * 19.0);
    const Matrix K = random_spd(n, rng, 0.3);
    const Vector Y = random_vec(n, rng);
    const double lambda = 0.01 + 0.99 * rng.uniform01();
    SketchMatrix S;
    S.kind = SketchMatrix::Kind::dense;
    S.n = n;
    S.d = n;
    S.dense_values.resize(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) S.dense_values(i, j) = rng.normal();
    const Matrix X = Matrix::Zero(n, 1);
    const Vector fe = in_sample(fit_exact(K, Y, lambda, kDummySpec, X), K);
    const Vector fs =
        in_sample(fit_sketched(K, Y, lambda, S, kDummySpec, X), K);
    worst = std::max(worst, (fs - fe).norm() / fe.norm());
  }
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max relative gap %.2e <= 1e-6", worst);
  report(1, "identity-sketch exactness", worst <= 1e-6, sec, 10.0, buf);
}

void criterion_structured_products() {
  const auto t0 = Clock::now();
  RngStream rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.uniform01() * 126.0);
    const Index d = 1 + static_cast<Index>(rng.uniform01() * 15.0);
    const int m = 1 + static_cast<int>(rng.uniform01() * 7.0);
    const Matrix K = random_spd(n, rng, 0.1);
    const SketchMatrix S =
        build_accumulation(n, d, m, uniform_distribution(n), rng);
    const Matrix D = to_dense(S);

    const Matrix C = right_multiply(K, S);
    const Matrix C_oracle = K * D;
    worst = std::max(worst, (C - C_oracle).norm() / C_oracle.norm());

    const Matrix B = transpose_apply(S, C);
    const Matrix B_oracle = D.transpose() * C;
    worst = std::max(worst, (B - B_oracle).norm() / B_oracle.norm());
  }
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max relative Frobenius gap %.2e <= 1e-10",
                worst);
  report(2, "structured-product equivalence", worst <= 1e-10, sec, 30.0, buf);
}

void criterion_expectation_identity() {
  const auto t0 = Clock::now();
  const Index n = 8, d = 4;
  const int draws = 10000;
  const auto P = uniform_distribution(n);
  const Matrix I = Matrix::Identity(n, n);

  auto mc_error = [&](auto&& build) {
    Matrix acc = Matrix::Zero(n, n);
    for (int t = 0; t < draws; ++t) {
      const Matrix D = to_dense(build(t));
      acc.noalias() += D * D.transpose();
    }
    return ((acc / double(draws)) - I).norm();
  };

  const double e1 = mc_error([&](int t) {
    RngStream rng(301000 + t);
    return build_accumulation(n, d, 1, P, rng);
  });
  const double e3 = mc_error([&](int t) {
    RngStream rng(302000 + t);
    return build_accumulation(n, d, 3, P, rng);
  });
  const double eg = mc_error([&](int t) {
    RngStream rng(303000 + t);
    return build_gaussian(n, d, rng);
  });
  const double es = mc_error([&](int t) {
    RngStream rng(304000 + t);
    return build_sparse_projection(n, d, std::sqrt(double(n)), rng);
  });
  const double worst = std::max({e1, e3, eg, es});
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "Frobenius gaps m1 %.3f, m3 %.3f, gauss %.3f, sparse %.3f "
                "<= 0.1",
                e1, e3, eg, es);
  report(3, "E[S S^T] = I Monte Carlo", worst <= 0.1, sec, 60.0, buf);
}

void criterion_leverage_incoherence() {
  const auto t0 = Clock::now();
  RngStream rng(404);
  bool pass = true;
  double worst_eq = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 5 + static_cast<Index>(rng.uniform01() * 35.0);
    const auto profile = decompose(random_spd(n, rng, 0.05));
    const double delta = 0.01 + rng.uniform01();
    const Vector lev = leverage_scores(profile, delta);
    const auto P = leverage_distribution(lev);
    const double dstat = statistical_dimension(profile, delta);
    const double M = incoherence(profile, delta, P);
    // with leverage sampling every ||psi_i||^2 / p_i equals d_stat, so
    // the head/tail maxima defining M can never exceed it
    const auto norms = psi_column_norms(profile, delta);
    const double remark_bound = (norms.full.array() / P.p.array()).maxCoeff();
    worst_eq = std::max(worst_eq, std::abs(remark_bound - dstat) / dstat);
    if (std::abs(remark_bound - dstat) > 1e-10 * dstat) pass = false;
    if (M > dstat * (1.0 + 1e-12) + 1e-12) pass = false;
  }
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "remark bound = d_stat within %.2e; M <= d_stat on 50 profiles",
                worst_eq);
  report(4, "leverage incoherence bound", pass, sec, 5.0, buf);
}

void criterion_block_incoherence() {
  const auto t0 = Clock::now();
  const auto profile = decompose(block_instance());
  const double M =
      incoherence(profile, kBlockDelta, uniform_distribution(kBlockN));
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "M = %.2f >= n/2 = 32", M);
  report(5, "block-diagonal incoherence", M >= 32.0, sec, 5.0, buf);
}

void criterion_satisfiability_trend() {
  const auto t0 = Clock::now();
  const auto profile = decompose(block_instance());
  const Index dd = d_delta(profile, kBlockDelta);
  const Index d = 2 * dd;
  const auto P = uniform_distribution(kBlockN);
  const int seeds = 200;
  std::vector<double> rates;
  for (int m : {1, 4, 16}) {
    int pass1 = 0;
    for (int t = 0; t < seeds; ++t) {
      RngStream rng(mix64(mix64(606000, static_cast<std::uint64_t>(m)),
                          static_cast<std::uint64_t>(t)));
      const SketchMatrix S = build_accumulation(kBlockN, d, m, P, rng);
      pass1 += check_k_satisfiability(S, profile, kBlockDelta).pass1;
    }
    rates.push_back(double(pass1) / seeds);
  }
  const bool monotone = rates[0] <= rates[1] && rates[1] <= rates[2];
  const bool gap = rates[2] - rates[0] >= 0.2;
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "cond-1 rates m=1/4/16: %.3f/%.3f/%.3f (d = 2 d_delta = %ld)",
                rates[0], rates[1], rates[2], static_cast<long>(d));
  report(6, "accumulation improves satisfiability", monotone && gap, sec,
         120.0, buf);
}

void criterion_error_ordering(std::vector<ExperimentRecord>& records_out,
                              ExperimentConfig& cfg_out) {
  const auto t0 = Clock::now();
  cfg_out = sweep_config();
  records_out = run_approx_error(cfg_out);

  auto med_of = [&](const char* method, int m) {
    std::vector<double> vals;
    for (const auto& r : records_out)
      if (r.method == method && (m < 0 || r.m == m) && r.approx_error)
        vals.push_back(*r.approx_error);
    return median(vals);
  };
  const double ny = med_of("nystrom", -1);
  const double a8 = med_of("accumulation", 8);
  const double a32 = med_of("accumulation", 32);
  const double ga = med_of("gaussian", -1);

  const bool ok = ny > a8 && a8 >= a32 && a32 <= 3.0 * ga && ny >= 5.0 * ga;
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "medians m1 %.2e > m8 %.2e >= m32 %.2e; m32 <= 3x gauss "
                "(%.2fx); m1 >= 5x gauss (%.1fx)",
                ny, a8, a32, a32 / ga, ny / ga);
  report(7, "approximation-error ordering in m", ok, sec, 900.0, buf);
}

void criterion_error_scale_bound(const std::vector<ExperimentRecord>& records,
                                 const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const Index n = 2000;
  double sum = 0.0;
  int count = 0;
  for (const auto& r : records) {
    if (r.method == "gaussian" && r.approx_error) {
      sum += *r.approx_error;
      ++count;
    }
  }
  const double mean_err = sum / count;

  // statistical dimension at the regularization level, from replicate 0's K
  RngStream data_rng(data_seed(cfg, n, 0));
  const auto ds = make_dataset({n, cfg.gamma, 3}, cfg.noise_sd, data_rng);
  const Matrix K = gram(cfg.kernel.at(n), ds.X);
  const auto profile = decompose(K);
  const double lambda = cfg.lambda.at(n);
  const double d_lambda = statistical_dimension(profile, lambda);
  const double bound = 10.0 * (lambda + d_lambda / double(n));

  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "mean gaussian approx %.2e <= 10(lambda + d_lambda/n) = %.2e "
                "(d_lambda %.1f)",
                mean_err, bound, d_lambda);
  report(8, "approximation-error scale bound", mean_err <= bound, sec, 300.0, buf);
}

void criterion_efficiency() {
  const auto t0 = Clock::now();
  auto j = preset_json("bench");
  j["n_list"] = {4000, 8000};
  j["replicates"] = 5;
  const auto cfg = parse_config(j);
  const auto records = bench_products(cfg);

  auto med_col = [&](Index n, auto field) {
    std::vector<double> vals;
    for (const auto& r : records)
      if (r.n == n) vals.push_back(field(r));
    return median(vals);
  };
  const double s4 =
      med_col(4000, [](const BenchRecord& r) { return r.structured_ks_ms; });
  const double d4 =
      med_col(4000, [](const BenchRecord& r) { return r.dense_ks_ms; });
  const double s8 =
      med_col(8000, [](const BenchRecord& r) { return r.structured_ks_ms; });
  const double speedup = d4 / s4;
  const double scaling = s8 / s4;
  const bool ok = speedup >= 10.0 && scaling <= 3.5;
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "structured KS %.2fms vs dense %.1fms (%.0fx >= 10x); "
                "t(8000)/t(4000) = %.2f <= 3.5",
                s4, d4, speedup, scaling);
  report(9, "structured-product efficiency", ok, sec, 300.0, buf);
}

void criterion_bimodal_sampler() {
  const auto t0 = Clock::now();
  RngStream rng(909);
  const int n_draws = 100000;
  std::vector<double> draws(n_draws);
  for (int i = 0; i < n_draws; ++i)
    draws[i] = dense_mode_inverse_cdf(rng.uniform01());
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    const double x = draws[i];
    const double F = 4.0 * (5.0 * x - x * x - 6.0);
    ks = std::max(ks, std::abs(F - double(i + 1) / n_draws));
    ks = std::max(ks, std::abs(F - double(i) / n_draws));
  }

  const Index n = 4000;
  const double gamma = 0.6;
  RngStream grng(910);
  const Matrix X = gen_bimodal({n, gamma, 3}, grng);
  Index dense_rows = 0;
  for (Index i = 0; i < n; ++i)
    dense_rows += (X.row(i).array() >= 2.0).all();
  const double w = dense_mode_weight(n, gamma);
  const double se = std::sqrt(w * (1.0 - w) * double(n));
  const double dev = std::abs(double(dense_rows) - w * double(n));

  const bool ok = ks < 0.01 && dev < 3.0 * se;
  const double sec = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "KS statistic %.4f < 0.01; mixture deviation %.1f < 3 se = "
                "%.1f",
                ks, dev, 3.0 * se);
  report(10, "bimodal sampler fidelity", ok, sec, 30.0, buf);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_identity_exactness();
  criterion_structured_products();
  criterion_expectation_identity();
  criterion_leverage_incoherence();
  criterion_block_incoherence();
  criterion_satisfiability_trend();

  std::vector<ExperimentRecord> sweep_records;
  ExperimentConfig sweep_cfg;
  criterion_error_ordering(sweep_records, sweep_cfg);
  criterion_error_scale_bound(sweep_records, sweep_cfg);

  criterion_efficiency();
  criterion_bimodal_sampler();

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
