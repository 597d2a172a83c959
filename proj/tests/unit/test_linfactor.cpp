#include <doctest.h>

#include "nfm/errors.hpp"
#include "nfm/linalg.hpp"
#include "nfm/linfactor.hpp"
#include "nfm/optimize.hpp"
#include "nfm/simengine.hpp"
#include "support.hpp"

using namespace nfm;

namespace {

Matrix corr2(double r) {
  Matrix c(2, 2);
  c << 1, r, r, 1;
  return c;
}

}  // namespace

TEST_CASE("pca prior examples") {
  // rho = 0.8: top eigenpair (1.8, (1,1)/sqrt2) => W = sqrt(0.9) (1, 1)
  const LinearFactorModel m = pca_prior(corr2(0.8), 1);
  CHECK(m.weights(0, 0) == doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));
  CHECK(m.weights(0, 1) == doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));

  // identity: unit-norm row on a coordinate axis
  const LinearFactorModel id = pca_prior(corr2(0.0), 1);
  CHECK(id.weights.norm() == doctest::Approx(1.0));
  CHECK(id.weights.cwiseAbs().maxCoeff() == doctest::Approx(1.0));

  // equicorrelation: equal components sqrt((1 + (N-1) r) / N)
  const Index N = 6;
  Matrix eq = Matrix::Constant(N, N, 0.3);
  eq.diagonal().setOnes();
  const LinearFactorModel e = pca_prior(eq, 1);
  for (Index j = 0; j < N; ++j) CHECK(e.weights(0, j) == doctest::Approx(std::sqrt((1.0 + 5 * 0.3) / N)));

  CHECK_THROWS_AS(pca_prior(eq, N + 1), RankError);
}

TEST_CASE("pca prior rows are orthogonal") {
  std::mt19937_64 rng(3);
  const Matrix x = test::gaussian_matrix(3, 200, 12);
  const LinearFactorModel m = pca_prior(sample_correlation(standardize_columns(x)), 4);
  const Matrix g = m.weights * m.weights.transpose();
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      if (i != j) CHECK(std::abs(g(i, j)) < 1e-10);
}

TEST_CASE("off-diagonal loss gradient matches finite differences") {
  std::mt19937_64 rng(5);
  for (int inst = 0; inst < 5; ++inst) {
    Matrix target = test::uniform_matrix(rng, 5, 5, -0.5, 0.8);
    target = 0.5 * (target + target.transpose()).eval();
    const Matrix W = test::uniform_matrix(rng, 3, 5, -0.8, 0.8);
    Matrix grad;
    offdiag_loss(target, W, &grad);
    const Vector x = Eigen::Map<const Vector>(W.data(), W.size());
    const Vector fd = test::fd_gradient(
        [&](const Vector& y) { return offdiag_loss(target, Eigen::Map<const Matrix>(y.data(), 3, 5)); }, x);
    CHECK(test::relative_error(Eigen::Map<const Vector>(grad.data(), grad.size()), fd) < 1e-5);

    // barrier: scale W so some columns exceed unit variance
    const Matrix big = 1.5 * W;
    Matrix bg = Matrix::Zero(3, 5);
    variance_barrier(big, &bg);
    const Vector xb = Eigen::Map<const Vector>(big.data(), big.size());
    const Vector fdb = test::fd_gradient(
        [&](const Vector& y) { return variance_barrier(Eigen::Map<const Matrix>(y.data(), 3, 5)); }, xb);
    CHECK(test::relative_error(Eigen::Map<const Vector>(bg.data(), bg.size()), fdb) < 1e-5);
  }
}

TEST_CASE("lbfgs minimizes the Rosenbrock function") {
  const Objective rosen = [](const Vector& x, Vector& g) {
    g.resize(2);
    g(0) = -2 * (1 - x(0)) - 400 * x(0) * (x(1) - x(0) * x(0));
    g(1) = 200 * (x(1) - x(0) * x(0));
    return (1 - x(0)) * (1 - x(0)) + 100 * (x(1) - x(0) * x(0)) * (x(1) - x(0) * x(0));
  };
  LbfgsOptions o;
  o.rel_tolerance = 0.0;
  const LbfgsResult r = minimize_lbfgs(rosen, Vector::Constant(2, -1.2), o);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("calibrate_weights: loss never above the prior, full rank reproduces the target") {
  const Matrix x = test::gaussian_matrix(8, 300, 8);
  const Matrix c = sample_correlation(standardize_columns(x));
  for (const Index M : {1, 2, 4}) {
    const LinearCalibration cal = calibrate_weights(c, M);
    CHECK(cal.loss <= cal.prior_loss + 1e-15);
    CHECK(cal.loss == doctest::Approx(offdiag_loss(c, cal.model.weights)));
  }
  // M = N with a mild target keeps every column inside the unit-variance region
  Matrix mild = Matrix::Constant(5, 5, 0.2);
  mild.diagonal().setOnes();
  const LinearCalibration full = calibrate_weights(mild, 5);
  CHECK(full.loss < 1e-12);
}

TEST_CASE("calibrate_weights recovers a one-factor structure") {
  const Index N = 10, T = 20000;
  GeneratorSpec spec;
  spec.linear.weights.resize(1, N);
  for (Index j = 0; j < N; ++j) spec.linear.weights(0, j) = 0.3 + 0.05 * static_cast<double>(j);
  spec.vol = VolModel::zeros(1, N, 1);
  spec.T_sim = T;
  spec.seed = 11;
  const Matrix r = standardize_columns(simulate(spec).returns);
  const LinearCalibration cal = calibrate_weights(sample_correlation(r), 1);
  const Matrix fitted = model_correlation(cal.model);
  const Matrix truth = model_correlation(spec.linear);
  CHECK((fitted - truth).cwiseAbs().maxCoeff() < 5.0 / std::sqrt(static_cast<double>(T)));
  CHECK(subspace_distance(cal.model, pca_prior(sample_correlation(r), 1)) < 0.01);
}

TEST_CASE("extract_series identities") {
  const Matrix r = standardize_columns(test::gaussian_matrix(9, 100, 6));
  const LinearCalibration cal = calibrate_weights(sample_correlation(r), 2);
  const FactorSeries s = extract_series(r, cal.model);
  CHECK((s.factors * cal.model.weights + s.residuals - r).cwiseAbs().maxCoeff() < 1e-10);

  // factor equals the first asset when W = e_1 and the others carry no exposure
  LinearFactorModel m;
  m.weights = Matrix::Zero(1, 6);
  m.weights(0, 0) = 1.0;
  const FactorSeries e = extract_series(r, m);
  CHECK((e.factors.col(0) - r.col(0)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(e.residuals.col(0).cwiseAbs().maxCoeff() < 1e-10);

  LinearFactorModel zero;
  zero.weights = Matrix::Zero(1, 6);
  CHECK_THROWS_AS(extract_series(r, zero), SingularityError);
}

TEST_CASE("extracted factors are near orthonormal and uncorrelated with residuals") {
  const Index N = 50, M = 3, T = 4000;
  GeneratorSpec spec;
  spec.linear.weights.resize(M, N);
  for (Index j = 0; j < N; ++j) {
    spec.linear.weights(0, j) = 0.6;
    spec.linear.weights(1, j) = j < N / 2 ? 0.5 : -0.5;
    spec.linear.weights(2, j) = (j % 2 == 0) ? 0.5 : -0.5;
  }
  spec.vol = VolModel::zeros(M, N, 1);
  spec.T_sim = T;
  spec.seed = 12;
  const SimulationBlock sim = simulate_full(spec);
  const Matrix r = sim.returns;
  const LinearCalibration cal = calibrate_weights(sample_correlation(r), M);
  const FactorSeries s = extract_series(r, cal.model);
  const Matrix ff = s.factors.transpose() * s.factors / static_cast<double>(T);
  for (Index k = 0; k < M; ++k) CHECK(std::abs(ff(k, k) - 1.0) < 0.2);
  const Matrix fe = s.factors.transpose() * s.residuals / static_cast<double>(T);
  CHECK(fe.cwiseAbs().maxCoeff() < 5.0 / std::sqrt(static_cast<double>(T)));
  // the recovered factor space matches the generator's factors (up to rotation);
  // GLS noise variance per factor is about v / (N W^2) = 0.14 / 12.5 here
  for (Index k = 0; k < M; ++k) {
    const Vector truth = sim.factors.col(k);
    const Vector coef = s.factors.colPivHouseholderQr().solve(truth);
    CHECK(pearson(s.factors * coef, truth) > 0.99);
  }
}

TEST_CASE("model_correlation examples") {
  LinearFactorModel zero;
  zero.weights = Matrix::Zero(2, 4);
  CHECK(model_correlation(zero).isIdentity());
  LinearFactorModel one;
  one.weights.resize(1, 2);
  one.weights << 0.6, 0.7;
  const Matrix c = model_correlation(one);
  CHECK(c(0, 1) == doctest::Approx(0.42));
  CHECK(c(0, 0) == 1.0);
  std::mt19937_64 rng(4);
  LinearFactorModel r;
  r.weights = test::uniform_matrix(rng, 3, 5, -1, 1);
  const Matrix rc = model_correlation(r);
  CHECK(rc == rc.transpose());
  CHECK((rc.diagonal().array() == 1.0).all());
}

TEST_CASE("subspace distance") {
  std::mt19937_64 rng(6);
  LinearFactorModel a;
  a.weights = test::uniform_matrix(rng, 3, 8, -1, 1);
  CHECK(subspace_distance(a, a) < 1e-12);
  LinearFactorModel mixed;
  mixed.weights = test::uniform_matrix(rng, 3, 3, -1, 1) * a.weights;
  LinearFactorModel b;
  b.weights = test::uniform_matrix(rng, 3, 8, -1, 1);
  CHECK(std::abs(subspace_distance(mixed, b) - subspace_distance(a, b)) < 1e-10);
  CHECK(subspace_distance(a, b) > 0.0);
  LinearFactorModel full1, full2;
  full1.weights = test::uniform_matrix(rng, 4, 4, -1, 1);
  full2.weights = test::uniform_matrix(rng, 4, 4, -1, 1);
  CHECK(subspace_distance(full1, full2) < 1e-10);
  LinearFactorModel deficient;
  deficient.weights = Matrix::Zero(2, 8);
  deficient.weights.row(0) = a.weights.row(0);
  deficient.weights.row(1) = 2.0 * a.weights.row(0);
  LinearFactorModel two;
  two.weights = a.weights.topRows(2);
  CHECK_THROWS_AS(subspace_distance(deficient, two), RankError);
}

TEST_CASE("sorted eigen and orientation") {
  Matrix m(3, 3);
  m << 2, 0, 0, 0, 5, 0, 0, 0, 1;
  const EigenPairs e = sorted_eigen(m);
  CHECK(e.values(0) == doctest::Approx(5));
  CHECK(e.values(2) == doctest::Approx(1));
  CHECK(e.vectors(1, 0) == doctest::Approx(1.0));
  Vector v(3);
  v << 0.2, -0.9, 0.9;
  CHECK(orient(v) == -1.0);  // tie between |-0.9| and |0.9|: lowest index wins
  CHECK(v(1) == doctest::Approx(0.9));
}
