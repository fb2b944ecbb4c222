#include <catch2/catch.hpp>

#include <cmath>

#include "skrr/kernel.hpp"
#include "skrr/sketch.hpp"
#include "skrr/solver.hpp"

using namespace skrr;

namespace {

Matrix random_spd(Index n, RngStream& rng, double ridge = 0.5) {
  Matrix A(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) A(i, j) = rng.normal();
  Matrix K = A * A.transpose() / static_cast<double>(n);
  K.diagonal().array() += ridge;
  return K;
}

Vector random_vector(Index n, RngStream& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

const KernelSpec kDummySpec = KernelSpec::gaussian(1.0);

Matrix dummy_x(Index n) { return Matrix::Zero(n, 1); }

}  // namespace

TEST_CASE("fit_exact closed forms") {
  SECTION("identity kernel: alpha = Y / (1 + n lambda)") {
    const Index n = 6;
    RngStream rng(1);
    const Vector Y = random_vector(n, rng);
    const double lambda = 0.3;
    const auto fit =
        fit_exact(Matrix::Identity(n, n), Y, lambda, kDummySpec, dummy_x(n));
    const Vector expected = Y / (1.0 + n * lambda);
    CHECK((fit.alpha - expected).norm() <= 1e-12 * expected.norm());
  }

  SECTION("hand-solved 2x2 system") {
    Matrix K(2, 2);
    K << 2.0, 1.0, 1.0, 2.0;
    Vector Y(2);
    Y << 1.0, 0.0;
    const auto fit = fit_exact(K, Y, 0.5, kDummySpec, dummy_x(2));
    // (K + n lambda I) alpha = Y with K + I = [[3,1],[1,3]];
    // inverse is (1/8) [[3,-1],[-1,3]], so alpha = (3/8, -1/8)
    CHECK(fit.alpha[0] == Approx(3.0 / 8.0).margin(1e-12));
    CHECK(fit.alpha[1] == Approx(-1.0 / 8.0).margin(1e-12));
  }

  SECTION("zero responses give zero coefficients") {
    RngStream rng(2);
    const Matrix K = random_spd(5, rng);
    const auto fit =
        fit_exact(K, Vector::Zero(5), 0.1, kDummySpec, dummy_x(5));
    CHECK(fit.alpha.norm() == 0.0);
  }

  SECTION("residual invariant") {
    RngStream rng(3);
    const Index n = 12;
    const Matrix K = random_spd(n, rng);
    const Vector Y = random_vector(n, rng);
    const double lambda = 0.05;
    const auto fit = fit_exact(K, Y, lambda, kDummySpec, dummy_x(n));
    Matrix A = K;
    A.diagonal().array() += n * lambda;
    CHECK((A * fit.alpha - Y).norm() <= 1e-8 * Y.norm());
  }

  SECTION("argument checks") {
    CHECK_THROWS_AS(fit_exact(Matrix::Identity(3, 3), Vector::Zero(2), 0.1,
                              kDummySpec, dummy_x(3)),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_exact(Matrix::Identity(3, 3), Vector::Zero(3), 0.0,
                              kDummySpec, dummy_x(3)),
                    std::invalid_argument);
  }
}

TEST_CASE("fit_sketched") {
  SECTION("identity sketch reproduces the exact fit") {
    RngStream rng(4);
    const Index n = 10;
    const Matrix K = random_spd(n, rng);
    const Vector Y = random_vector(n, rng);
    const double lambda = 0.2;
    const auto exact = fit_exact(K, Y, lambda, kDummySpec, dummy_x(n));
    const auto sk =
        fit_sketched(K, Y, lambda, build_identity(n), kDummySpec, dummy_x(n));
    const Vector fe = in_sample(exact, K);
    const Vector fs = in_sample(sk, K);
    CHECK((fe - fs).norm() <= 1e-8 * fe.norm());
  }

  SECTION("any invertible dense sketch reproduces the exact fit") {
    for (int trial = 0; trial < 25; ++trial) {
      RngStream rng(100 + trial);
      const Index n = 3 + static_cast<Index>(rng.uniform01() * 10);
      const Matrix K = random_spd(n, rng);
      const Vector Y = random_vector(n, rng);
      const double lambda = 0.01 + rng.uniform01();
      SketchMatrix S;
      S.kind = SketchMatrix::Kind::dense;
      S.n = n;
      S.d = n;
      S.dense_values.resize(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) S.dense_values(i, j) = rng.normal();
      const auto exact = fit_exact(K, Y, lambda, kDummySpec, dummy_x(n));
      const auto sk = fit_sketched(K, Y, lambda, S, kDummySpec, dummy_x(n));
      const Vector fe = in_sample(exact, K);
      const Vector fs = in_sample(sk, K);
      CHECK((fe - fs).norm() <= 1e-6 * (fe.norm() + 1e-12));
    }
  }

  SECTION("d = 1 basis-vector sketch has the scalar closed form") {
    RngStream rng(5);
    const Index n = 7;
    const Matrix K = random_spd(n, rng);
    const Vector Y = random_vector(n, rng);
    const double lambda = 0.15;
    SketchMatrix S;
    S.kind = SketchMatrix::Kind::dense;
    S.n = n;
    S.d = 1;
    S.dense_values = Matrix::Zero(n, 1);
    S.dense_values(0, 0) = 1.0;
    const auto fit = fit_sketched(K, Y, lambda, S, kDummySpec, dummy_x(n));
    const Vector k1 = K.col(0);
    const double expected =
        k1.dot(Y) / (k1.squaredNorm() + n * lambda * K(0, 0));
    CHECK(fit.beta[0] == Approx(expected).margin(1e-10));
  }

  SECTION("residual invariant of the sketched system") {
    RngStream rng(6);
    const Index n = 24, d = 6;
    const Matrix K = random_spd(n, rng);
    const Vector Y = random_vector(n, rng);
    const double lambda = 0.1;
    RngStream srng(7);
    const SketchMatrix S =
        build_accumulation(n, d, 3, uniform_distribution(n), srng);
    const auto fit = fit_sketched(K, Y, lambda, S, kDummySpec, dummy_x(n));
    const Matrix C = right_multiply(K, S);
    const Matrix B = transpose_apply(S, C);
    const Matrix A =
        C.transpose() * C + (n * lambda * 0.5) * (B + B.transpose());
    const Vector b = C.transpose() * Y;
    CHECK((A * fit.beta - b).norm() <= 1e-6 * b.norm());
  }

  SECTION("m = 1 fits are invariant to the Rademacher signs") {
    RngStream rng(8);
    const Index n = 16, d = 4;
    const Matrix K = random_spd(n, rng);
    const Vector Y = random_vector(n, rng);
    RngStream srng(9);
    SketchMatrix S =
        build_accumulation(n, d, 1, uniform_distribution(n), srng);
    SketchMatrix flipped = S;
    for (auto& w : flipped.signed_weights) w = -w;
    SketchMatrix unsigned_s = S;
    for (auto& w : unsigned_s.signed_weights) w = std::abs(w);
    const auto f0 = fit_sketched(K, Y, 0.05, S, kDummySpec, dummy_x(n));
    const auto f1 = fit_sketched(K, Y, 0.05, flipped, kDummySpec, dummy_x(n));
    const auto f2 =
        fit_sketched(K, Y, 0.05, unsigned_s, kDummySpec, dummy_x(n));
    const Vector p0 = in_sample(f0, K);
    CHECK((p0 - in_sample(f1, K)).norm() <= 1e-9 * p0.norm());
    CHECK((p0 - in_sample(f2, K)).norm() <= 1e-9 * p0.norm());
  }

  SECTION("degenerate sketch throws after jitter escalation") {
    const Index n = 5;
    RngStream rng(10);
    const Matrix K = random_spd(n, rng);
    const Vector Y = random_vector(n, rng);
    SketchMatrix S;
    S.kind = SketchMatrix::Kind::dense;
    S.n = n;
    S.d = 2;
    S.dense_values = Matrix::Zero(n, 2);  // rank zero
    CHECK_THROWS_AS(fit_sketched(K, Y, 0.1, S, kDummySpec, dummy_x(n)),
                    std::runtime_error);
  }
}

TEST_CASE("predict and in_sample") {
  RngStream rng(11);
  const Index n = 9;
  Matrix X(n, 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < 2; ++j) X(i, j) = rng.normal();
  const KernelSpec spec = KernelSpec::gaussian(1.1);
  const Matrix K = gram(spec, X);
  const Vector Y = random_vector(n, rng);
  const double lambda = 0.15;

  SECTION("n = 1 exact prediction at the training point") {
    Matrix X1(1, 1);
    X1 << 0.0;
    Matrix K1(1, 1);
    K1 << 1.0;
    Vector Y1(1);
    Y1 << 2.0;
    const auto fit = fit_exact(K1, Y1, 1.0, KernelSpec::gaussian(1.0), X1);
    Vector x(1);
    x << 0.0;
    CHECK(predict(fit, x) == Approx(1.0).margin(1e-12));
  }

  SECTION("in_sample equals pointwise predict") {
    const auto exact = fit_exact(K, Y, lambda, spec, X);
    const Vector fe = in_sample(exact, K);
    RngStream srng(12);
    const auto sk = fit_sketched(
        K, Y, lambda, build_accumulation(n, 4, 2, uniform_distribution(n), srng),
        spec, X);
    const Vector fs = in_sample(sk, K);
    for (Index i = 0; i < n; ++i) {
      CHECK(fe[i] == Approx(predict(exact, X.row(i).transpose())).margin(1e-10));
      CHECK(fs[i] == Approx(predict(sk, X.row(i).transpose())).margin(1e-10));
    }
    CHECK((predict_many(exact, X) - fe).norm() <= 1e-10);
    CHECK((predict_many(sk, X) - fs).norm() <= 1e-10);
  }

  SECTION("sketched predict matches the dense closed-form expression") {
    RngStream srng(77);
    const Index d = 3;
    const SketchMatrix S =
        build_accumulation(n, d, 2, uniform_distribution(n), srng);
    const auto fit = fit_sketched(K, Y, lambda, S, spec, X);
    const Matrix Sd = to_dense(S);
    const Matrix A = Sd.transpose() * K * K * Sd +
                     double(n) * lambda * Sd.transpose() * K * Sd;
    const Vector beta_oracle = A.ldlt().solve(Sd.transpose() * K * Y);
    Vector x(2);
    x << 0.6, 0.1;
    const double expected =
        cross_row(spec, x, X).dot((Sd * beta_oracle).eval());
    CHECK(predict(fit, x) == Approx(expected).margin(1e-9));
  }

  SECTION("sketched with identity matches exact at new points") {
    const auto exact = fit_exact(K, Y, lambda, spec, X);
    const auto sk = fit_sketched(K, Y, lambda, build_identity(n), spec, X);
    Vector x(2);
    x << 0.25, -0.75;
    CHECK(predict(sk, x) == Approx(predict(exact, x)).epsilon(1e-8));
  }

  SECTION("heavy shrinkage sends fitted values to zero") {
    const auto fit = fit_exact(K, Y, 1e9, spec, X);
    CHECK(in_sample(fit, K).norm() <= 1e-6);
  }

  SECTION("monotone shrinkage in lambda") {
    for (int trial = 0; trial < 10; ++trial) {
      RngStream trng(500 + trial);
      const Matrix Kt = random_spd(8, trng, 0.0);
      const Vector Yt = random_vector(8, trng);
      double prev = std::numeric_limits<double>::infinity();
      for (double lam : {0.01, 0.1, 1.0, 10.0}) {
        const auto fit = fit_exact(Kt, Yt, lam, kDummySpec, dummy_x(8));
        const double norm = in_sample(fit, Kt).norm();
        CHECK(norm <= prev + 1e-10);
        prev = norm;
      }
    }
  }
}

TEST_CASE("empirical_sq_norm") {
  Vector u(2), v(2);
  u << 1.0, 1.0;
  v << 0.0, 0.0;
  CHECK(empirical_sq_norm(u, u) == 0.0);
  CHECK(empirical_sq_norm(u, v) == Approx(1.0));

  RngStream rng(13);
  const Vector a = random_vector(50, rng);
  const Vector b = random_vector(50, rng);
  double acc = 0.0;
  for (Index i = 0; i < 50; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(empirical_sq_norm(a, b) == Approx(acc / 50.0).epsilon(1e-12));

  Vector w(3);
  w.setZero();
  CHECK_THROWS_AS(empirical_sq_norm(u, w), std::invalid_argument);
}
