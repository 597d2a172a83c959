#include <doctest.h>

#include "nfm/errors.hpp"
#include "nfm/nlcorr.hpp"
#include "nfm/simengine.hpp"
#include "support.hpp"

using namespace nfm;

TEST_CASE("default grid has eight equally spaced orders") {
  const auto g = default_p_grid();
  REQUIRE(g.size() == 8);
  CHECK(g.front() == doctest::Approx(0.2));
  CHECK(g.back() == doctest::Approx(2.0));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] - g[i - 1] == doctest::Approx(1.8 / 7.0));
}

TEST_CASE("log-abs correlation by hand") {
  Matrix x(2, 1), y(2, 1);
  x << 1, -2;
  y << 3, 1;
  // p = 1: <|xy|> = 2.5, <|x|> = 1.5, <|y|> = 2
  CHECK(log_abs_correlation(x, y, 1.0)(0, 0) == doctest::Approx(std::log(2.5 / 3.0)));
  // p = 2: <x^2 y^2> = 6.5, <x^2> = 2.5, <y^2> = 5, divided by p^2
  CHECK(log_abs_correlation(x, y, 2.0)(0, 0) == doctest::Approx(std::log(6.5 / 12.5) / 4.0));
  CHECK_THROWS_AS(log_abs_correlation(x, y, 2.5), DomainError);
  CHECK_THROWS_AS(log_abs_correlation(x, y, 0.0), DomainError);
  Matrix z = Matrix::Zero(2, 1);
  CHECK_THROWS_AS(log_abs_correlation(z, y, 1.0), DegenerateSeriesError);
}

TEST_CASE("independent Gaussians: zero off-diagonals, gamma on the diagonal") {
  const Index T = 200000;
  FactorSeries s;
  const Matrix g = test::gaussian_matrix(21, T, 5);
  s.factors = g.leftCols(2);
  s.residuals = g.rightCols(3);
  const std::vector<double> grid{1.0};
  const NonlinCorrSet set = estimate_nlcorr(s, grid);
  CHECK(std::abs(set.cff[0](0, 1)) < 0.02);
  CHECK(std::abs(set.cfr[0](1, 2)) < 0.02);
  CHECK(std::abs(set.crr[0](0, 2)) < 0.02);
  // E|x|^2 / (E|x|)^2 = pi / 2
  CHECK(std::abs(set.crr[0](1, 1) - std::log(M_PI / 2.0)) < 0.02);
  for (std::size_t q = 0; q < set.size(); ++q) {
    CHECK(set.cff[q] == set.cff[q].transpose());
    CHECK(set.crr[q] == set.crr[q].transpose());
  }
}

TEST_CASE("clamping of exact zeros is counted") {
  FactorSeries s;
  s.factors = test::gaussian_matrix(22, 50, 1);
  s.residuals = test::gaussian_matrix(23, 50, 2);
  s.residuals(3, 1) = 0.0;
  s.residuals(7, 0) = 0.0;
  const std::vector<double> grid{0.5, 1.0};
  CHECK(estimate_nlcorr(s, grid).clamped_cells == 2);
}

TEST_CASE("one-mode log-normal amplitudes give a^2 off-diagonals at every order") {
  const Index M = 4, N = 6, T = 200000;
  GeneratorSpec spec;
  spec.linear.weights = Matrix::Constant(M, N, 0.2);
  spec.vol = VolModel::zeros(M, N, 1);
  spec.vol.A.setConstant(0.3);
  spec.vol.B.setConstant(0.3);
  spec.T_sim = T;
  spec.seed = 24;
  const SimulationBlock sim = simulate_full(spec);
  const FactorSeries s{sim.factors, sim.residuals};
  const NonlinCorrSet set = estimate_nlcorr(s, default_p_grid());
  for (std::size_t q = 0; q < set.size(); ++q) {
    for (Index k = 0; k < M; ++k)
      for (Index l = 0; l < M; ++l)
        if (k != l) CHECK(std::abs(set.cff[q](k, l) - 0.09) < 0.03);
  }
  // p-stability: 0.2 and 0.457 agree within 25 percent
  CHECK(std::abs(set.cff[0](0, 1) / set.cff[1](0, 1) - 1.0) < 0.25);

  const auto spec_avg = spectral_summary(set, true);
  REQUIRE(spec_avg.size() == 1);
  CHECK(std::isnan(spec_avg[0].p));
  const auto per_p = spectral_summary(set, false);
  CHECK(per_p.size() == set.size());
  // top singular vectors of C^fr align with the top eigenvectors of C^ff and C^rr
  const SpectralSummary& a = spec_avg[0];
  CHECK(std::abs(a.fr.left.col(0).dot(a.ff.vectors.col(0))) > 0.9);
  CHECK(std::abs(a.fr.right.col(0).dot(a.rr.vectors.col(0))) > 0.9);
  // a^2 11^T + c I: the top eigenvalue exceeds the flat bulk by M a^2
  CHECK(std::abs(a.ff.values(0) - a.ff.values(1) - M * 0.09) < 0.08);
  CHECK(std::abs(a.ff.values(1) - a.ff.values(M - 1)) < 0.05);
}

TEST_CASE("spectral summary of an identity block") {
  NonlinCorrSet set;
  set.p_grid = {1.0};
  set.cff = {Matrix::Identity(3, 3)};
  set.crr = {Matrix::Identity(2, 2)};
  set.cfr = {Matrix::Zero(3, 2)};
  const auto s = spectral_summary(set, false);
  CHECK((s[0].ff.values.array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK((s[0].ff.vectors.transpose() * s[0].ff.vectors - Matrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("rank one plus diagonal: top eigenvector follows the rank-one direction") {
  Vector a(5);
  a << 0.9, 0.8, 0.7, 1.0, 0.85;
  Matrix m = a * a.transpose();
  m.diagonal().array() += Vector::LinSpaced(5, 0.0, 0.02).array();
  NonlinCorrSet set;
  set.p_grid = {1.0};
  set.cff = {m};
  set.crr = {m};
  set.cfr = {m};
  const auto s = spectral_summary(set, false);
  const double angle = std::acos(std::min(1.0, std::abs(s[0].ff.vectors.col(0).dot(a.normalized()))));
  CHECK(angle < M_PI / 180.0);
}

TEST_CASE("average") {
  Matrix a = Matrix::Constant(2, 2, 1.0), b = Matrix::Constant(2, 2, 3.0);
  CHECK(average({a, b}).isApprox(Matrix::Constant(2, 2, 2.0)));
}
