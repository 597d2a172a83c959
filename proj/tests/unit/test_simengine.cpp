#include <doctest.h>

#include <boost/math/distributions/beta.hpp>

#include "nfm/errors.hpp"
#include "nfm/linalg.hpp"
#include "nfm/simengine.hpp"
#include "support.hpp"

using namespace nfm;

namespace {

/// Moments of the shifted-scaled Beta straight from the distribution object.
struct Moments4 {
  double mean, var, skew, exkurt;
};
Moments4 beta_law_moments(const BetaParams& b) {
  const boost::math::beta_distribution<double> d(b.alpha, b.beta);
  const double m = boost::math::mean(d), v = boost::math::variance(d);
  return {b.shift + b.scale * m, b.scale * b.scale * v, boost::math::skewness(d),
          boost::math::kurtosis_excess(d)};
}

GeneratorSpec nested_spec(Index M, Index N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GeneratorSpec spec;
  spec.linear.weights = test::uniform_matrix(rng, M, N, 0.0, 0.5);
  spec.vol = VolModel::zeros(M, N, 1);
  spec.vol.A = test::uniform_matrix(rng, M, 1, 0.2, 0.5);
  spec.vol.B = test::uniform_matrix(rng, N, 1, 0.2, 0.5);
  spec.vol.s.setConstant(0.2);
  spec.vol.s_tilde.setConstant(0.2);
  spec.vol.zeta0 = -0.5;
  spec.vol.kappa0 = -0.8;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("Beta moment matching") {
  // alpha = beta = 2 has excess kurtosis -6/7
  const BetaParams sym = match_beta(0.0, -6.0 / 7.0);
  CHECK(sym.alpha == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(sym.beta == doctest::Approx(2.0).epsilon(1e-10));

  for (const auto& [z, k] : std::vector<std::pair<double, double>>{
           {-0.5, -0.8}, {0.7, -0.3}, {-1.2, -0.4}, {0.1, -1.9}, {1.5, 2.0}, {-2.0, 4.0}}) {
    REQUIRE(beta_feasible(z, k));
    const BetaParams b = match_beta(z, k);
    const Moments4 m = beta_law_moments(b);
    CHECK(std::abs(m.mean) < 1e-8);
    CHECK(std::abs(m.var - 1.0) < 1e-8);
    CHECK(std::abs(m.skew - z) < 1e-6);
    CHECK(std::abs(m.exkurt - k) < 1e-6);
  }
  CHECK_THROWS_AS(match_beta(0.0, -2.5), InfeasibleMomentsError);
  CHECK_THROWS_AS(match_beta(-1.492, -1.916), InfeasibleMomentsError);
  CHECK_THROWS_AS(match_beta(0.0, 0.5), InfeasibleMomentsError);
}

TEST_CASE("omega law resolution") {
  const OmegaLaw g = resolve_omega_law(0.0, 0.0);
  CHECK(g.gaussian);
  CHECK_FALSE(g.fallback);
  const OmegaLaw f = resolve_omega_law(-1.492, -1.916);
  CHECK(f.gaussian);
  CHECK(f.fallback);
  const OmegaLaw p = resolve_omega_law(-1.492, -1.916, InfeasiblePolicy::Project);
  CHECK_FALSE(p.gaussian);
  CHECK(p.projected);
  CHECK(beta_feasible(p.zeta, p.kappa));
  CHECK(p.zeta == -1.492);
  const auto [pz, pk] = project_beta_moments(0.0, 1.0);
  CHECK(pz == 0.0);
  CHECK(pk == doctest::Approx(-0.05));
}

TEST_CASE("counter rng is reproducible and stream-separated") {
  CounterRng a(1, 2, 3), b(1, 2, 3), c(1, 2, 4);
  const auto x = a(), y = b(), z = c();
  CHECK(x == y);
  CHECK(x != z);
  CounterRng u(5, 0, 0);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
    mean += v;
  }
  CHECK(std::abs(mean / 100000 - 0.5) < 0.005);
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
}

TEST_CASE("sampled Beta driver reproduces its moments") {
  GeneratorSpec spec = nested_spec(2, 3, 41);
  spec.T_sim = 1'000'000;
  const SimulationBlock sim = simulate_full(spec);
  const SampleMoments m = sample_moments(sim.omega0);
  const double n = static_cast<double>(spec.T_sim);
  // standard errors of the sample moments of a bounded law, with ample margin
  CHECK(std::abs(m.mean) < 5.0 / std::sqrt(n));
  CHECK(std::abs(m.variance - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m.skewness - spec.vol.zeta0) < 5.0 * std::sqrt(6.0 / n));
  CHECK(std::abs(m.excess_kurtosis - spec.vol.kappa0) < 5.0 * std::sqrt(24.0 / n));
}

TEST_CASE("simulation: determinism and thread independence") {
  GeneratorSpec spec = nested_spec(2, 5, 42);
  spec.T_sim = 9000;
  const Matrix a = simulate(spec, {1, InfeasiblePolicy::Fallback, 1000}).returns;
  const Matrix b = simulate(spec, {3, InfeasiblePolicy::Fallback, 1000}).returns;
  const Matrix c = simulate(spec, {1, InfeasiblePolicy::Fallback, 4096}).returns;
  CHECK(a == b);
  CHECK(a == c);
  spec.seed = 43;
  CHECK(simulate(spec).returns != a);

  const SimulationBlock full = simulate_full(spec);
  const SimulationBlock part = simulate_block(spec, resolve_omega_law(spec.vol.zeta0, spec.vol.kappa0), 100, 50);
  CHECK(part.returns == full.returns.middleRows(100, 50));
}

TEST_CASE("simulated variances and linear correlations follow the model") {
  GeneratorSpec spec = nested_spec(2, 6, 44);
  spec.T_sim = 200000;
  const SimulationBlock sim = simulate_full(spec);
  const double T = static_cast<double>(spec.T_sim);
  const Matrix& r = sim.returns;
  // heavy-tailed amplitudes: allow a few times 3/sqrt(T)
  for (Index j = 0; j < r.cols(); ++j) CHECK(std::abs(r.col(j).squaredNorm() / T - 1.0) < 3.0 * 3.0 / std::sqrt(T));
  const Matrix emp = r.transpose() * r / T;
  const Matrix model = model_correlation(spec.linear);
  for (Index i = 0; i < 6; ++i)
    for (Index j = i + 1; j < 6; ++j) CHECK(std::abs(emp(i, j) - model(i, j)) < 3.0 * 3.0 / std::sqrt(T));
  CHECK((r - sim.factors * spec.linear.weights - sim.residuals).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Gaussian limit of the generator") {
  GeneratorSpec spec;
  spec.linear.weights = Matrix::Zero(1, 1);
  spec.vol = VolModel::zeros(1, 1, 1);
  spec.T_sim = 400000;
  spec.seed = 45;
  const Vector x = simulate(spec).returns.col(0);
  const SampleMoments m = sample_moments(x);
  CHECK(std::abs(m.excess_kurtosis) < 5.0 * std::sqrt(24.0 / 400000.0));
  CHECK(std::abs(m.variance - 1.0) < 0.01);
}

TEST_CASE("model-implied abs-correlation") {
  GeneratorSpec indep;
  indep.linear.weights = Matrix::Zero(1, 3);
  indep.vol = VolModel::zeros(1, 3, 1);
  indep.seed = 46;
  const Matrix id = model_implied_abs_corr(indep, 200000);
  CHECK((id - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.015);
  CHECK(id == id.transpose());

  // bivariate Gaussian: closed-form |x| correlation
  GeneratorSpec g;
  g.linear.weights.resize(1, 2);
  g.linear.weights << 0.8, 0.75;
  g.vol = VolModel::zeros(1, 2, 1);
  g.seed = 47;
  const Matrix gc = model_implied_abs_corr(g, 400000);
  CHECK(std::abs(gc(0, 1) - test::gaussian_abs_corr(0.6)) < 0.01);
  CHECK(gc(0, 0) == 1.0);

  // a larger common residual loading raises the abs-correlation of residual-dominated pairs
  GeneratorSpec lo;
  lo.linear.weights = Matrix::Constant(1, 4, 0.1);
  lo.vol = VolModel::zeros(1, 4, 1);
  lo.vol.B.setConstant(0.2);
  lo.seed = 48;
  GeneratorSpec hi = lo;
  hi.vol.B.setConstant(0.5);
  CHECK(model_implied_abs_corr(hi, 200000)(0, 1) > model_implied_abs_corr(lo, 200000)(0, 1) + 0.02);
}

TEST_CASE("generator spec validation") {
  GeneratorSpec spec = nested_spec(2, 3, 49);
  spec.linear.weights(0, 0) = 2.0;
  CHECK_THROWS(spec.validate());
  spec = nested_spec(2, 3, 49);
  spec.vol.B.resize(4, 1);
  CHECK_THROWS_AS(spec.validate(), DimensionError);
}
