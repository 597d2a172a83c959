#include <doctest.h>

#include "nfm/backtest.hpp"
#include "nfm/errors.hpp"
#include "nfm/linalg.hpp"
#include "support.hpp"

using namespace nfm;

namespace {

ReturnPanel factor_panel(Index N, Index T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GeneratorSpec spec;
  spec.linear.weights = test::uniform_matrix(rng, 2, N, 0.1, 0.6);
  spec.vol = VolModel::zeros(2, N, 1);
  spec.vol.A.setConstant(0.4);
  spec.vol.B.setConstant(0.3);
  spec.vol.s.setConstant(0.2);
  spec.vol.s_tilde.setConstant(0.2);
  spec.vol.kappa0 = -0.5;
  spec.T_sim = T;
  spec.seed = seed;
  return standardize(simulate(spec));
}

}  // namespace

TEST_CASE("sliding windows") {
  CHECK(sliding_windows(524 + 59, 524, 59) == std::vector<Index>{525});
  CHECK(sliding_windows(100, 40, 20) == std::vector<Index>{41, 61, 81});
  CHECK_THROWS_AS(sliding_windows(50, 40, 20), ConfigError);
  // out-of-sample segments tile [T_is + 1, T] up to a tail shorter than T_os
  const auto w = sliding_windows(1000, 100, 59);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] - w[i - 1] == 59);
  CHECK(w.front() == 101);
  CHECK(1000 - (w.back() + 58) < 59);
}

TEST_CASE("scheme parsing and grids") {
  for (const std::string s : {"empirical", "lw:0.25", "clipped:5", "mf:3", "gaussian:2", "nested:4", "nested:4:2"})
    CHECK(CleaningScheme::parse(s).label() == s);
  CHECK_THROWS_AS(CleaningScheme::parse("lw:1.5").validate(10), ConfigError);
  CHECK_THROWS_AS(CleaningScheme::clipped(11).validate(10), ConfigError);
  CHECK_THROWS(CleaningScheme::parse("bogus"));
  CHECK(default_factor_grid(70) == std::vector<Index>{1, 2, 3, 5, 8, 12, 16, 24, 32, 48, 64, 70});
  const auto lw = expand_schemes({"lw"}, 10);
  CHECK(lw.size() == 21);
  CHECK(lw.back().alpha == doctest::Approx(1.0));
  CHECK(expand_schemes({"empirical", "clipped"}, 5).size() == 1 + 4);
}

TEST_CASE("cleaning schemes") {
  const Matrix w = standardize_columns(test::gaussian_matrix(61, 80, 12));
  const Matrix emp = empirical_correlation(w);
  CHECK(emp == clean_correlation(w, CleaningScheme::clipped(12)));
  CHECK((clean_correlation(w, CleaningScheme::ledoit_wolf(1.0)) - emp).cwiseAbs().maxCoeff() == 0.0);
  // alpha = 0: unit diagonal, constant off-diagonal equal to the mean off-diagonal
  const Matrix t = clean_correlation(w, CleaningScheme::ledoit_wolf(0.0));
  const double mean_off = (emp.sum() - emp.trace()) / (12.0 * 11.0);
  CHECK((t.diagonal().array() == 1.0).all());
  CHECK(t(2, 7) == doctest::Approx(mean_off));
  CHECK(t(5, 1) == doctest::Approx(mean_off));
  const Matrix lw = clean_correlation(w, CleaningScheme::ledoit_wolf(0.3));
  CHECK((lw.diagonal().array() == 1.0).all());
  for (const Index m : {1, 3, 11}) {
    const Matrix c = clean_correlation(w, CleaningScheme::clipped(m));
    CHECK(std::abs(c.trace() - 12.0) < 1e-12);
    const EigenPairs e = sorted_eigen(c);
    // bottom N - M eigenvalues are all equal
    CHECK(e.values.tail(12 - m).maxCoeff() - e.values.tail(12 - m).minCoeff() < 1e-10);
    CHECK(e.values.head(m).isApprox(sorted_eigen(emp).values.head(m), 1e-10));
  }
  const Matrix mf = clean_correlation(w, CleaningScheme::multi_factor(2));
  CHECK((mf.diagonal().array() == 1.0).all());
  CHECK_THROWS_AS(clean_correlation(w, CleaningScheme::gaussian_factor(2)), ConfigError);
}

TEST_CASE("optimal weights") {
  const Index N = 4;
  Vector e1 = Vector::Zero(N);
  e1(0) = 1.0;
  CHECK(optimal_weights(Matrix::Identity(N, N), e1).weights.isApprox(e1));
  Vector g(N);
  g << 1, -2, 0.5, 3;
  CHECK(optimal_weights(Matrix::Identity(N, N), g).weights.isApprox(g / g.squaredNorm()));
  Matrix c(2, 2);
  c << 1, 0.3, 0.3, 1;
  // C^-1 g = g / (1 + rho) and g^T C^-1 g = 2 / (1 + rho), so the budget fixes w = g / 2
  const Vector w = optimal_weights(c, Vector::Ones(2)).weights;
  CHECK(w(0) == doctest::Approx(0.5));
  CHECK(w(1) == doctest::Approx(0.5));
  // singular input gets the ridge and still meets the budget
  const PortfolioWeights s = optimal_weights(Matrix::Ones(3, 3), Vector::Ones(3));
  CHECK(s.regularized);
  CHECK(Vector::Ones(3).dot(s.weights) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("omniscient predictor") {
  CHECK(omniscient_predictor(Vector::Ones(5)).isApprox(Vector::Ones(5)));
  Vector r(2);
  r << 2, 0;
  CHECK(omniscient_predictor(r)(0) == doctest::Approx(std::sqrt(2.0)));
  Vector x(3);
  x << 0.3, -1.2, 0.4;
  CHECK(omniscient_predictor(7.5 * x).isApprox(omniscient_predictor(x), 1e-14));
  CHECK_THROWS_AS(omniscient_predictor(Vector::Zero(3)), ZeroRowError);
}

TEST_CASE("risk") {
  Matrix y(2, 1);
  y << 1, -1;
  CHECK(risk(Vector::Ones(1), y, Vector::Ones(1)) == doctest::Approx(1.0));
  CHECK(risk(Vector::Zero(1), y, Vector::Ones(1)) == 0.0);
  CHECK_THROWS_AS(risk(Vector::Ones(2), y, Vector::Ones(1)), DimensionError);
  // true-correlation weights: N w^T C w = N / (g^T C^-1 g), which averages to 1
  const Index N = 10, T = 200000;
  std::mt19937_64 rng(62);
  LinearFactorModel lin;
  lin.weights = test::uniform_matrix(rng, 1, N, 0.2, 0.7);
  const Matrix C = model_correlation(lin);
  const Eigen::LLT<Matrix> llt(C);
  const Matrix data = test::gaussian_matrix(63, T, N) * Matrix(llt.matrixU());
  Vector g = Vector::Ones(N);
  const Vector w = optimal_weights(C, g).weights;
  CHECK(risk(w, data, Vector::Ones(N)) == doctest::Approx(N * w.dot(C * w)).epsilon(0.02));
}

TEST_CASE("abs return transform") {
  const Matrix r = test::gaussian_matrix(64, 200000, 2);
  CHECK(r.col(0).cwiseAbs().mean() == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.005));
  const Matrix y = abs_return_transform(r);
  CHECK(std::abs(y.col(1).mean()) < 1e-10);
  CHECK(y.col(1).squaredNorm() / 200000.0 == doctest::Approx(1.0).epsilon(1e-10));
  Matrix flat(3, 1);
  flat << 1, -1, 1;
  CHECK_THROWS_AS(abs_return_transform(flat), DegenerateColumnError);
}

TEST_CASE("RMT benchmark and gain ratios") {
  CHECK(rmt_benchmark(0.0).in_sample == 1.0);
  CHECK(rmt_benchmark(0.0).out_of_sample == 1.0);
  CHECK(rmt_benchmark(0.5).in_sample == doctest::Approx(0.5));
  CHECK(rmt_benchmark(0.5).out_of_sample == doctest::Approx(2.0));
  CHECK_THROWS_AS(rmt_benchmark(1.0), DomainError);
  CHECK(relative_gain(1.3, 1.3) == 0.0);
  CHECK(relative_gain(1.2, 1.187) == doctest::Approx(0.065));
  CHECK(over_perf(1.5, 1.7) < 0.0);
  CHECK_THROWS_AS(relative_gain(1.0, 1.2), DivisionByZeroError);
  CHECK_THROWS_AS(over_perf(1.0, 1.2), DivisionByZeroError);
}

TEST_CASE("run_backtest invariants") {
  const Index N = 15;
  const ReturnPanel panel = factor_panel(N, 30 + 6 * 25 + 10, 65);
  BacktestConfig cfg;
  cfg.T_is = 30;
  cfg.T_os = 25;
  const std::vector<CleaningScheme> schemes{CleaningScheme::empirical(), CleaningScheme::clipped(N),
                                            CleaningScheme::ledoit_wolf(1.0), CleaningScheme::multi_factor(2),
                                            CleaningScheme::clipped(2)};
  const auto reports = run_backtest(panel, schemes, cfg);
  REQUIRE(reports.size() == schemes.size());
  for (const auto& rep : reports) {
    CHECK(rep.windows.size() == 6);
    double is = 0.0;
    for (const auto& w : rep.windows) {
      CHECK(std::abs(w.budget - 1.0) < 1e-10);
      CHECK(w.in_sample >= 0.0);
      CHECK(w.out_of_sample >= 0.0);
      is += w.in_sample;
    }
    CHECK(rep.mean_is == doctest::Approx(is / 6.0));
  }
  for (std::size_t w = 0; w < 6; ++w) {
    CHECK(std::abs(reports[1].windows[w].out_of_sample - reports[0].windows[w].out_of_sample) < 1e-10);
    CHECK(std::abs(reports[2].windows[w].out_of_sample - reports[0].windows[w].out_of_sample) < 1e-10);
  }
  // threads and warm starts do not change cold-start numbers
  BacktestConfig threaded = cfg;
  threaded.threads = 3;
  const auto again = run_backtest(panel, schemes, threaded);
  for (std::size_t s = 0; s < schemes.size(); ++s) CHECK(again[s].mean_os == reports[s].mean_os);
  BacktestConfig warm = cfg;
  warm.warm_start = true;
  const auto warmed = run_backtest(panel, {CleaningScheme::multi_factor(2)}, warm);
  CHECK(warmed[0].mean_os == doctest::Approx(reports[3].mean_os).epsilon(1e-4));
}

TEST_CASE("absolute track with model-based schemes") {
  const Index N = 8;
  const ReturnPanel panel = factor_panel(N, 2 * N + 2 * 20 + 1, 66);
  BacktestConfig cfg;
  cfg.T_os = 20;
  cfg.track = Track::Absolute;
  cfg.n_sim = 20000;
  cfg.seed = 67;
  cfg.policy = InfeasiblePolicy::Project;
  const std::vector<CleaningScheme> schemes{CleaningScheme::empirical(), CleaningScheme::gaussian_factor(2),
                                            CleaningScheme::nested_factor(2)};
  const auto a = run_backtest(panel, schemes, cfg);
  BacktestConfig threaded = cfg;
  threaded.threads = 2;
  const auto b = run_backtest(panel, schemes, threaded);
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    CHECK(a[s].windows.size() == 2);
    CHECK(a[s].mean_os == b[s].mean_os);
    for (const auto& w : a[s].windows) CHECK(std::abs(w.budget - 1.0) < 1e-10);
  }
  BacktestConfig linear = cfg;
  linear.track = Track::Linear;
  CHECK_THROWS_AS(run_backtest(panel, {CleaningScheme::gaussian_factor(2)}, linear), ConfigError);
  CHECK(parse_track(to_string(Track::Absolute)) == Track::Absolute);
}
