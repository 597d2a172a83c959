#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>

#include "nfm/errors.hpp"
#include "nfm/io.hpp"
#include "nfm/linalg.hpp"
#include "nfm/simengine.hpp"
#include "nfm/volcal.hpp"
#include "support.hpp"

using namespace nfm;

namespace {

/// Direct evaluation with log-gamma, usable away from p = 0.
double gamma_reference(double p) {
  using boost::math::lgamma;
  return (0.5 * std::log(M_PI) + lgamma(0.5 + p) - 2.0 * lgamma(0.5 * (1.0 + p))) / (p * p);
}

NonlinCorrSet noiseless_set(const VolModel& v, const std::vector<double>& grid) {
  NonlinCorrSet set;
  set.p_grid = grid;
  for (const double p : grid) {
    const NlcorrPrediction m = model_nlcorr(v, p);
    set.cff.push_back(m.ff);
    set.cfr.push_back(m.fr);
    set.crr.push_back(m.rr);
  }
  return set;
}

VolModel random_model(std::mt19937_64& rng, Index M, Index N, int K) {
  VolModel v = VolModel::zeros(M, N, K);
  v.A = test::uniform_matrix(rng, M, K, 0.1, 0.6);
  v.B = test::uniform_matrix(rng, N, K, 0.1, 0.5);
  v.s = test::uniform_matrix(rng, M, 1, 0.05, 0.4);
  v.s_tilde = test::uniform_matrix(rng, N, 1, 0.05, 0.4);
  v.zeta0 = -0.4;
  v.kappa0 = -0.7;
  return v;
}

}  // namespace

TEST_CASE("gamma_p values") {
  CHECK(gamma_p(1.0) == doctest::Approx(std::log(M_PI / 2.0)).epsilon(1e-13));
  CHECK(gamma_p(2.0) == doctest::Approx(0.25 * std::log(3.0)).epsilon(1e-13));
  for (const double p : {0.05, 0.2, 0.5, 1.3, 2.0}) CHECK(gamma_p(p) == doctest::Approx(gamma_reference(p)).epsilon(1e-11));
  // near zero: pi^2/8 - (7 zeta(3) / 4) p + O(p^2)
  const double slope = -7.0 * 1.2020569031595942 / 4.0;
  CHECK(std::abs(gamma_p(1e-4) - (M_PI * M_PI / 8.0 + slope * 1e-4)) < 1e-7);
  CHECK(std::abs(gamma_p(1e-12) - M_PI * M_PI / 8.0) < 1e-11);
  // both sides of the series/direct switch, against 40-digit references
  CHECK(gamma_p(0.0099) == doctest::Approx(1.2132172339591013).epsilon(1e-13));
  CHECK(gamma_p(0.00999999) == doctest::Approx(1.2130137865559735).epsilon(1e-13));
  CHECK(gamma_p(0.01000001) == doctest::Approx(1.2130137458691785).epsilon(1e-12));
  CHECK_THROWS_AS(gamma_p(0.0), DomainError);
  CHECK_THROWS_AS(gamma_p(-1.0), DomainError);
}

TEST_CASE("phi0 examples") {
  CHECK(phi0(0.3, 0.7, 1.4, 0.0, 0.0) == doctest::Approx(0.21));
  CHECK(phi0(1, 1, 1, 0.6, -0.6) == doctest::Approx(1.25));
  CHECK(phi0(0.8, 0.0, 1.7, 0.9, -1.1) == 0.0);
  CHECK(phi0(0.5, 0.5, 1.0, -1.492, -1.916) == doctest::Approx(0.25 - 0.1865 - 1.916 * 0.4375 / 12.0));
}

TEST_CASE("phi0 gradient matches finite differences") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 10; ++i) {
    const Vector x = test::uniform_matrix(rng, 5, 1, -1.0, 1.0);
    const double p = 0.2 + 1.8 * std::abs(x(4));
    const Phi0Gradient g = phi0_gradient(x(0), x(1), p, x(2), x(3));
    Vector analytic(4);
    analytic << g.da, g.db, g.dzeta, g.dkappa;
    const Vector fd = test::fd_gradient([&](const Vector& y) { return phi0(y(0), y(1), p, y(2), y(3)); }, x.head(4));
    CHECK(test::relative_error(analytic, fd) < 1e-7);
    CHECK(g.value == doctest::Approx(phi0(x(0), x(1), p, x(2), x(3))));
  }
}

TEST_CASE("model_nlcorr examples") {
  const VolModel zero = VolModel::zeros(3, 4, 1);
  const NlcorrPrediction z = model_nlcorr(zero, 1.3);
  CHECK(z.ff.diagonal().isApproxToConstant(gamma_p(1.3)));
  CHECK(z.rr.diagonal().isApproxToConstant(gamma_p(1.3)));
  CHECK(z.fr.isZero());
  CHECK(z.ff(0, 1) == 0.0);

  VolModel v = VolModel::zeros(3, 4, 1);
  v.A.setConstant(0.3);
  for (const double p : default_p_grid()) CHECK(model_nlcorr(v, p).ff(0, 2) == doctest::Approx(0.09));

  std::mt19937_64 rng(32);
  const VolModel r = random_model(rng, 3, 5, 2);
  const NlcorrPrediction m = model_nlcorr(r, 0.9);
  CHECK(m.ff == m.ff.transpose());
  CHECK(m.rr == m.rr.transpose());
  // second mode adds A_k1 A_l1 on top of the dominant-mode phi0
  CHECK(m.fr(1, 3) == doctest::Approx(phi0(r.A(1, 0), r.B(3, 0), 0.9, r.zeta0, r.kappa0) + r.A(1, 1) * r.B(3, 1)));
  CHECK(m.rr(2, 2) == doctest::Approx(phi0(r.B(2, 0), r.B(2, 0), 0.9, r.zeta0, r.kappa0) + r.B(2, 1) * r.B(2, 1) +
                                      gamma_p(0.9) + r.s_tilde(2) * r.s_tilde(2)));
}

TEST_CASE("factor and residual loss gradients") {
  std::mt19937_64 rng(33);
  for (int inst = 0; inst < 6; ++inst) {
    const int K = 1 + inst % 2;
    const Index M = 4, N = 5;
    VolModel v = random_model(rng, M, N, K);
    const VolModel target = random_model(rng, M, N, K);
    const NonlinCorrSet set = noiseless_set(target, default_p_grid());

    const auto pack_f = [&](const VolModel& m) {
      Vector y(M * K + M + 2);
      y << Eigen::Map<const Vector>(m.A.data(), M * K), m.s, m.zeta0, m.kappa0;
      return y;
    };
    const auto loss_f = [&](const Vector& y) {
      VolModel m = v;
      m.A = Eigen::Map<const Matrix>(y.data(), M, K);
      m.s = y.segment(M * K, M);
      m.zeta0 = y(M * K + M);
      m.kappa0 = y(M * K + M + 1);
      return factor_vol_loss(set.cff, set.p_grid, m, 0.2);
    };
    VolModel g;
    factor_vol_loss(set.cff, set.p_grid, v, 0.2, &g);
    CHECK(test::relative_error(pack_f(g), test::fd_gradient(loss_f, pack_f(v))) < 1e-5);

    for (const ResidualFit mode : {ResidualFit::FacRes, ResidualFit::ResRes, ResidualFit::Joint}) {
      const auto pack_r = [&](const VolModel& m) {
        Vector y(N * K + N);
        y << Eigen::Map<const Vector>(m.B.data(), N * K), m.s_tilde;
        return y;
      };
      const auto loss_r = [&](const Vector& y) {
        VolModel m = v;
        m.B = Eigen::Map<const Matrix>(y.data(), N, K);
        m.s_tilde = y.tail(N);
        return residual_vol_loss(set.cfr[3], set.crr[3], set.p_grid[3], m, mode);
      };
      VolModel gr;
      residual_vol_loss(set.cfr[3], set.crr[3], set.p_grid[3], v, mode, &gr);
      const Vector fd = test::fd_gradient(loss_r, pack_r(v));
      Vector an = pack_r(gr);
      if (mode == ResidualFit::FacRes) {
        // s~ does not enter the fac-res loss
        CHECK(fd.tail(N).cwiseAbs().maxCoeff() < 1e-8);
        an.tail(N) = fd.tail(N);
      }
      CHECK(test::relative_error(an, fd) < 1e-5);
    }
  }
}

TEST_CASE("noise-free matrices are fitted to tiny loss") {
  std::mt19937_64 rng(34);
  VolModel truth = VolModel::zeros(5, 8, 1);
  truth.A = test::uniform_matrix(rng, 5, 1, 0.3, 0.6);
  truth.B = test::uniform_matrix(rng, 8, 1, 0.2, 0.5);
  truth.s = test::uniform_matrix(rng, 5, 1, 0.1, 0.3);
  truth.s_tilde = test::uniform_matrix(rng, 8, 1, 0.1, 0.3);
  truth.zeta0 = -0.3;
  truth.kappa0 = -0.5;
  const NonlinCorrSet set = noiseless_set(truth, default_p_grid());
  const VolCalibration f = calibrate_factor_vol(set, 1);
  CHECK(f.loss < 1e-8);
  CHECK(f.loss <= f.prior_loss);
  CHECK(f.model.kappa0 >= f.model.zeta0 * f.model.zeta0 - 2.0);
  for (const ResidualFit mode : {ResidualFit::FacRes, ResidualFit::ResRes, ResidualFit::Joint}) {
    const VolCalibration r = calibrate_residual_vol(set, f.model, 2.0, mode);
    CHECK(r.loss < 1e-8);
    CHECK(r.loss <= r.prior_loss);
    CHECK(std::abs(cosine_similarity(r.model.B.col(0), truth.B.col(0))) > 0.999);
  }
  CHECK_THROWS_AS(calibrate_residual_vol(set, f.model, 1.0, ResidualFit::Joint), DomainError);
}

TEST_CASE("Gaussian one-mode round trip") {
  const Index M = 10, N = 50, T = 10000;
  GeneratorSpec spec;
  spec.linear.weights = Matrix::Constant(M, N, 0.2);
  spec.vol = VolModel::zeros(M, N, 1);
  spec.vol.A.setConstant(0.4);
  spec.vol.B.setConstant(0.3);
  spec.vol.s.setConstant(0.2);
  spec.vol.s_tilde.setConstant(0.2);
  spec.T_sim = T;
  spec.seed = 35;
  const SimulationBlock sim = simulate_full(spec);
  const FactorSeries series{sim.factors, sim.residuals};
  const NonlinCorrSet set = estimate_nlcorr(series, default_p_grid());
  const VolCalibration f = calibrate_factor_vol(set, 1);
  CHECK(std::abs(cosine_similarity(f.model.A.col(0), spec.vol.A.col(0))) > 0.95);
  CHECK(std::abs(f.model.zeta0) < 0.3);
  CHECK(std::abs(f.model.kappa0) < 0.3);
  CHECK((f.model.s.array() >= 0.0).all());
  const VolCalibration r = calibrate_residual_vol(set, f.model, 2.0, ResidualFit::Joint);
  CHECK(std::abs(cosine_similarity(r.model.B.col(0), spec.vol.B.col(0))) > 0.95);
  const OmegaReconstruction om = reconstruct_omega(series, r.model);
  CHECK(pearson(om.canonical().omega0, sim.omega0) > 0.8);
  REQUIRE(om.from_factors.has_value());
  CHECK(std::abs(om.canonical().omega0.mean()) < 1e-10);
}

TEST_CASE("two-mode overlap penalty keeps the modes nearly orthogonal") {
  const Index M = 8, N = 10, T = 20000;
  GeneratorSpec spec;
  spec.linear.weights = Matrix::Constant(M, N, 0.15);
  spec.vol = VolModel::zeros(M, N, 2);
  for (Index k = 0; k < M; ++k) {
    spec.vol.A(k, 0) = 0.45;
    spec.vol.A(k, 1) = k < M / 2 ? 0.3 : -0.3;
  }
  spec.vol.B.col(0).setConstant(0.3);
  spec.vol.s.setConstant(0.1);
  spec.vol.s_tilde.setConstant(0.1);
  spec.T_sim = T;
  spec.seed = 36;
  const SimulationBlock sim = simulate_full(spec);
  const NonlinCorrSet set = estimate_nlcorr(FactorSeries{sim.factors, sim.residuals}, default_p_grid());
  const VolCalibration f = calibrate_factor_vol(set, 2);
  const Vector a0 = f.model.A.col(0), a1 = f.model.A.col(1);
  CHECK(std::abs(a0.dot(a1)) <= 0.05 * a0.norm() * a1.norm());
  CHECK(std::abs(cosine_similarity(a1, spec.vol.A.col(1))) > 0.9);
}

TEST_CASE("reconstruct_omega with uniform loadings is a cross-sectional average") {
  const Index T = 40, N = 6;
  FactorSeries s;
  s.factors = test::gaussian_matrix(37, T, 2);
  s.residuals = test::gaussian_matrix(38, T, N);
  VolModel v = VolModel::zeros(2, N, 1);
  v.A.setConstant(0.5);
  v.B.setConstant(0.25);
  const OmegaReconstruction rec = reconstruct_omega(s, v);
  Matrix l = s.residuals.cwiseAbs().array().log().matrix();
  l.rowwise() -= l.colwise().mean();
  const Vector expect = l.rowwise().mean() / 0.25;
  CHECK((rec.canonical().omega0 - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rec.canonical().source == OmegaSource::ResidualRegression);

  VolModel flat = v;
  flat.A.setZero();
  CHECK_FALSE(reconstruct_omega(s, flat).from_factors.has_value());
  flat.B.setZero();
  CHECK_THROWS_AS(reconstruct_omega(s, flat), SingularityError);
}

TEST_CASE("VolModel validation and serialization") {
  std::mt19937_64 rng(39);
  const VolModel v = random_model(rng, 3, 4, 2);
  const auto dir = test::scratch_dir("volmodel");
  io::write_vol_model(dir / "vol.txt", v);
  const VolModel w = io::read_vol_model(dir / "vol.txt");
  CHECK(w.n_modes == 2);
  CHECK(w.A == v.A);
  CHECK(w.B == v.B);
  CHECK(w.s == v.s);
  CHECK(w.s_tilde == v.s_tilde);
  CHECK(w.zeta0 == v.zeta0);
  CHECK(w.kappa0 == v.kappa0);

  VolModel bad = v;
  bad.s(0) = -0.1;
  CHECK_THROWS(bad.validate());
  // moments below zeta0^2 - 2 stay loadable; the simulator's infeasibility policy handles them
  VolModel loose = v;
  loose.kappa0 = loose.zeta0 * loose.zeta0 - 2.5;
  CHECK_NOTHROW(loose.validate());
  CHECK(parse_residual_fit(to_string(ResidualFit::FacRes)) == ResidualFit::FacRes);
}
