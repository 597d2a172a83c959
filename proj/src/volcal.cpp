#include "nfm/volcal.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/polygamma.hpp>

#include "nfm/errors.hpp"
#include "nfm/optimize.hpp"

namespace nfm {

namespace {

constexpr double kZeroClamp = 1e-12;

/// Packs the free parameters of the factor step: A (column-major), s, zeta0, kappa0.
Vector pack_factor(const VolModel& v) {
  const Index M = v.A.rows();
  const Index K = v.A.cols();
  Vector x(M * K + M + 2);
  x.head(M * K) = Eigen::Map<const Vector>(v.A.data(), M * K);
  x.segment(M * K, M) = v.s;
  x(M * K + M) = v.zeta0;
  x(M * K + M + 1) = v.kappa0;
  return x;
}

void unpack_factor(const Vector& x, VolModel& v) {
  const Index M = v.A.rows();
  const Index K = v.A.cols();
  v.A = Eigen::Map<const Matrix>(x.data(), M, K);
  v.s = x.segment(M * K, M);
  v.zeta0 = x(M * K + M);
  v.kappa0 = x(M * K + M + 1);
}

/// Quadratic penalties for the moment constraints, added to value and gradient.
double constraint_penalty(double zeta, double kappa, double weight, double* dzeta, double* dkappa) {
  double pen = 0.0;
  const auto hinge = [&](double excess, double dz, double dk) {
    if (excess <= 0.0) return;
    pen += weight * excess * excess;
    if (dzeta) *dzeta += 2.0 * weight * excess * dz;
    if (dkappa) *dkappa += 2.0 * weight * excess * dk;
  };
  hinge(zeta * zeta - 2.0 - kappa, 2.0 * zeta, -1.0);
  hinge(zeta - 5.0, 1.0, 0.0);
  hinge(-5.0 - zeta, -1.0, 0.0);
  hinge(kappa - 10.0, 0.0, 1.0);
  hinge(-10.0 - kappa, 0.0, -1.0);
  return pen;
}

/// Projects (zeta0, kappa0) onto the admissible set after the search.
void enforce_moment_constraints(VolModel& v) {
  v.zeta0 = std::clamp(v.zeta0, -5.0, 5.0);
  v.kappa0 = std::clamp(std::max(v.kappa0, v.zeta0 * v.zeta0 - 2.0), -10.0, 10.0);
  if (v.kappa0 < v.zeta0 * v.zeta0 - 2.0) {
    // |zeta0| > sqrt(12) leaves no room below kappa0 = 10: shrink zeta0 instead.
    v.zeta0 = std::copysign(std::sqrt(v.kappa0 + 2.0), v.zeta0);
  }
}

/// Top-K eigenpairs of a symmetric matrix with its diagonal removed, scaled by sqrt(eigenvalue).
Matrix spectral_loadings(Matrix m, int n_modes) {
  m.diagonal().setZero();
  const EigenPairs eig = sorted_eigen(m);
  if (eig.values.size() < n_modes) throw RankError("not enough dimensions for the requested modes");
  Matrix out(m.rows(), n_modes);
  for (int k = 0; k < n_modes; ++k)
    out.col(k) = std::sqrt(std::max(eig.values(k), 0.0)) * eig.vectors.col(k);
  return out;
}

std::size_t grid_index(std::span<const double> grid, double p) {
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (std::abs(grid[i] - p) <= 1e-12 * std::max(1.0, p)) return i;
  throw DomainError("p_star = " + std::to_string(p) + " is not on the estimated p-grid");
}

void check_modes(int n_modes) {
  if (n_modes != 1 && n_modes != 2) throw DomainError("number of volatility modes must be 1 or 2");
}

}  // namespace

VolModel VolModel::zeros(Index n_factors, Index n_assets, int n_modes) {
  check_modes(n_modes);
  VolModel v;
  v.n_modes = n_modes;
  v.A = Matrix::Zero(n_factors, n_modes);
  v.B = Matrix::Zero(n_assets, n_modes);
  v.s = Vector::Zero(n_factors);
  v.s_tilde = Vector::Zero(n_assets);
  return v;
}

void VolModel::validate() const {
  check_modes(n_modes);
  if (A.cols() != n_modes || B.cols() != n_modes)
    throw DimensionError("volatility loadings must have one column per mode");
  if (s.size() != A.rows() || s_tilde.size() != B.rows())
    throw DimensionError("volatility scales do not match the loading dimensions");
  if ((s.array() < 0).any() || (s_tilde.array() < 0).any())
    throw DomainError("residual log-vol scales must be non-negative");
  if (!A.allFinite() || !B.allFinite() || !s.allFinite() || !s_tilde.allFinite() ||
      !std::isfinite(zeta0) || !std::isfinite(kappa0))
    throw DomainError("volatility model contains non-finite values");
}

double gamma_p(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("gamma_p: p must be positive");
  if (p < 1e-2) {
    // Series of p^-2 [lnG(1/2+p) - 2 lnG(1/2+p/2) + lnG(1/2)] in powers of p.
    double sum = 0.0;
    double fact = 1.0;
    for (int n = 2; n <= 9; ++n) {
      fact *= n;
      const double c = boost::math::polygamma(n - 1, 0.5) / fact * (1.0 - std::ldexp(1.0, 1 - n));
      sum += c * std::pow(p, n - 2);
    }
    return sum;
  }
  const double log_ratio = 0.5 * std::log(M_PI) + std::lgamma(0.5 + p) - 2.0 * std::lgamma(0.5 * (1.0 + p));
  return log_ratio / (p * p);
}

double phi0(double a, double b, double p, double zeta0, double kappa0) {
  const double a2 = a * a;
  const double b2 = b * b;
  return a * b + 0.5 * p * zeta0 * (a2 * b + a * b2) +
         p * p / 12.0 * kappa0 * (2.0 * a2 * a * b + 3.0 * a2 * b2 + 2.0 * a * b2 * b);
}

Phi0Gradient phi0_gradient(double a, double b, double p, double zeta0, double kappa0) {
  const double a2 = a * a;
  const double b2 = b * b;
  const double hz = 0.5 * p;
  const double hk = p * p / 12.0;
  Phi0Gradient g{};
  g.value = phi0(a, b, p, zeta0, kappa0);
  g.da = b + hz * zeta0 * (2.0 * a * b + b2) + hk * kappa0 * (6.0 * a2 * b + 6.0 * a * b2 + 2.0 * b2 * b);
  g.db = a + hz * zeta0 * (a2 + 2.0 * a * b) + hk * kappa0 * (2.0 * a2 * a + 6.0 * a2 * b + 6.0 * a * b2);
  g.dzeta = hz * (a2 * b + a * b2);
  g.dkappa = hk * (2.0 * a2 * a * b + 3.0 * a2 * b2 + 2.0 * a * b2 * b);
  return g;
}

NlcorrPrediction model_nlcorr(const VolModel& vol, double p) {
  vol.validate();
  const Index M = vol.A.rows();
  const Index N = vol.B.rows();
  const double g = gamma_p(p);
  const auto element = [&](double a0, double b0, double a1, double b1) {
    double v = phi0(a0, b0, p, vol.zeta0, vol.kappa0);
    if (vol.n_modes == 2) v += a1 * b1;
    return v;
  };
  const auto second = [&](const Matrix& L, Index i) { return vol.n_modes == 2 ? L(i, 1) : 0.0; };
  NlcorrPrediction out{Matrix(M, M), Matrix(M, N), Matrix(N, N)};
  for (Index k = 0; k < M; ++k)
    for (Index l = k; l < M; ++l)
      out.ff(k, l) = out.ff(l, k) = element(vol.A(k, 0), vol.A(l, 0), second(vol.A, k), second(vol.A, l));
  for (Index k = 0; k < M; ++k)
    for (Index j = 0; j < N; ++j)
      out.fr(k, j) = element(vol.A(k, 0), vol.B(j, 0), second(vol.A, k), second(vol.B, j));
  for (Index i = 0; i < N; ++i)
    for (Index j = i; j < N; ++j)
      out.rr(i, j) = out.rr(j, i) = element(vol.B(i, 0), vol.B(j, 0), second(vol.B, i), second(vol.B, j));
  for (Index k = 0; k < M; ++k) out.ff(k, k) += g + vol.s(k) * vol.s(k);
  for (Index i = 0; i < N; ++i) out.rr(i, i) += g + vol.s_tilde(i) * vol.s_tilde(i);
  return out;
}

double factor_vol_loss(std::span<const Matrix> cff, std::span<const double> p_grid,
                       const VolModel& vol, double overlap_weight, VolModel* grad) {
  if (cff.size() != p_grid.size()) throw DimensionError("factor_vol_loss: grid/matrix count mismatch");
  const Index M = vol.A.rows();
  const int K = vol.n_modes;
  if (grad) {
    grad->n_modes = K;
    grad->A = Matrix::Zero(M, K);
    grad->s = Vector::Zero(M);
    grad->zeta0 = grad->kappa0 = 0.0;
  }
  double loss = 0.0;
  for (std::size_t q = 0; q < p_grid.size(); ++q) {
    const double p = p_grid[q];
    const double g = gamma_p(p);
    const Matrix& c = cff[q];
    if (c.rows() != M || c.cols() != M) throw DimensionError("factor_vol_loss: fac-fac matrix has wrong shape");
    for (Index k = 0; k < M; ++k) {
      for (Index l = 0; l < M; ++l) {
        const Phi0Gradient d = phi0_gradient(vol.A(k, 0), vol.A(l, 0), p, vol.zeta0, vol.kappa0);
        double model = d.value;
        if (K == 2) model += vol.A(k, 1) * vol.A(l, 1);
        if (k == l) model += g + vol.s(k) * vol.s(k);
        const double r = model - c(k, l);
        loss += r * r;
        if (!grad) continue;
        const double w = 2.0 * r;
        grad->A(k, 0) += w * d.da;
        grad->A(l, 0) += w * d.db;
        grad->zeta0 += w * d.dzeta;
        grad->kappa0 += w * d.dkappa;
        if (K == 2) {
          grad->A(k, 1) += w * vol.A(l, 1);
          grad->A(l, 1) += w * vol.A(k, 1);
        }
        if (k == l) grad->s(k) += w * 2.0 * vol.s(k);
      }
    }
  }
  if (K == 2 && overlap_weight > 0.0) {
    const double overlap = vol.A.col(0).dot(vol.A.col(1));
    loss += overlap_weight * overlap * overlap;
    if (grad) {
      grad->A.col(0) += 2.0 * overlap_weight * overlap * vol.A.col(1);
      grad->A.col(1) += 2.0 * overlap_weight * overlap * vol.A.col(0);
    }
  }
  return loss;
}

ResidualFit parse_residual_fit(const std::string& name) {
  if (name == "fac-res") return ResidualFit::FacRes;
  if (name == "res-res") return ResidualFit::ResRes;
  if (name == "joint") return ResidualFit::Joint;
  throw ConfigError("unknown residual fit mode '" + name + "' (fac-res, res-res, joint)");
}

std::string to_string(ResidualFit mode) {
  switch (mode) {
    case ResidualFit::FacRes: return "fac-res";
    case ResidualFit::ResRes: return "res-res";
    case ResidualFit::Joint: return "joint";
  }
  return "joint";
}

double residual_vol_loss(const Matrix& cfr, const Matrix& crr, double p, const VolModel& vol,
                         ResidualFit mode, VolModel* grad) {
  const Index M = vol.A.rows();
  const Index N = vol.B.rows();
  const int K = vol.n_modes;
  if (grad) {
    grad->n_modes = K;
    grad->B = Matrix::Zero(N, K);
    grad->s_tilde = Vector::Zero(N);
  }
  double loss = 0.0;
  if (mode != ResidualFit::ResRes) {
    if (cfr.rows() != M || cfr.cols() != N) throw DimensionError("residual_vol_loss: fac-res shape mismatch");
    for (Index k = 0; k < M; ++k)
      for (Index i = 0; i < N; ++i) {
        const Phi0Gradient d = phi0_gradient(vol.A(k, 0), vol.B(i, 0), p, vol.zeta0, vol.kappa0);
        double model = d.value;
        if (K == 2) model += vol.A(k, 1) * vol.B(i, 1);
        const double r = model - cfr(k, i);
        loss += r * r;
        if (!grad) continue;
        grad->B(i, 0) += 2.0 * r * d.db;
        if (K == 2) grad->B(i, 1) += 2.0 * r * vol.A(k, 1);
      }
  }
  if (mode != ResidualFit::FacRes) {
    if (crr.rows() != N || crr.cols() != N) throw DimensionError("residual_vol_loss: res-res shape mismatch");
    const double g = gamma_p(p);
    for (Index i = 0; i < N; ++i)
      for (Index j = 0; j < N; ++j) {
        const Phi0Gradient d = phi0_gradient(vol.B(i, 0), vol.B(j, 0), p, vol.zeta0, vol.kappa0);
        double model = d.value;
        if (K == 2) model += vol.B(i, 1) * vol.B(j, 1);
        if (i == j) model += g + vol.s_tilde(i) * vol.s_tilde(i);
        const double r = model - crr(i, j);
        loss += r * r;
        if (!grad) continue;
        const double w = 2.0 * r;
        grad->B(i, 0) += w * d.da;
        grad->B(j, 0) += w * d.db;
        if (K == 2) {
          grad->B(i, 1) += w * vol.B(j, 1);
          grad->B(j, 1) += w * vol.B(i, 1);
        }
        if (i == j) grad->s_tilde(i) += w * 2.0 * vol.s_tilde(i);
      }
  }
  return loss;
}

VolModel factor_vol_prior(const NonlinCorrSet& set, int n_modes) {
  check_modes(n_modes);
  if (set.cff.empty()) throw DimensionError("factor_vol_prior: empty correlation set");
  const Index M = set.cff.front().rows();
  VolModel v = VolModel::zeros(M, 0, n_modes);
  v.A = spectral_loadings(average(set.cff), n_modes);
  for (Index k = 0; k < M; ++k) {
    double excess = 0.0;
    for (std::size_t q = 0; q < set.size(); ++q) excess += set.cff[q](k, k) - gamma_p(set.p_grid[q]);
    excess = excess / static_cast<double>(set.size()) - v.A.row(k).squaredNorm();
    v.s(k) = std::sqrt(std::max(excess, 0.0));
  }
  return v;
}

VolCalibration calibrate_factor_vol(const NonlinCorrSet& set, int n_modes,
                                    const VolCalibrationOptions& options) {
  VolModel prior = factor_vol_prior(set, n_modes);
  const Index M = prior.A.rows();
  double overlap_weight = 0.0;
  if (n_modes == 2) {
    if (options.overlap_weight) {
      overlap_weight = *options.overlap_weight;
    } else {
      double acc = 0.0;
      Index count = 0;
      for (const auto& c : set.cff)
        for (Index k = 0; k < M; ++k)
          for (Index l = 0; l < M; ++l)
            if (k != l) {
              acc += c(k, l) * c(k, l);
              ++count;
            }
      overlap_weight = count ? acc / static_cast<double>(count) : 0.0;
    }
  }
  const std::span<const Matrix> cff(set.cff);
  const std::span<const double> grid(set.p_grid);
  const double mu = options.constraint_weight;

  VolModel work = prior;
  Objective objective = [&](const Vector& x, Vector& g) {
    unpack_factor(x, work);
    VolModel grad;
    double f = factor_vol_loss(cff, grid, work, overlap_weight, &grad);
    f += constraint_penalty(work.zeta0, work.kappa0, mu, &grad.zeta0, &grad.kappa0);
    g = pack_factor(grad);
    return f;
  };
  LbfgsOptions lopts;
  lopts.rel_tolerance = options.rel_tolerance;
  lopts.max_iterations = options.max_iterations;
  const LbfgsResult res = minimize_lbfgs(objective, pack_factor(prior), lopts);

  VolCalibration out;
  out.model = prior;
  unpack_factor(res.x, out.model);
  out.model.s = out.model.s.cwiseAbs();
  enforce_moment_constraints(out.model);
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.prior_loss = factor_vol_loss(cff, grid, prior, overlap_weight);
  out.loss = factor_vol_loss(cff, grid, out.model, overlap_weight);
  if (out.loss > out.prior_loss) {
    out.model = prior;
    out.loss = out.prior_loss;
  }
  return out;
}

VolModel residual_vol_prior(const NonlinCorrSet& set, const VolModel& partial, double p_star) {
  if (set.crr.empty()) throw DimensionError("residual_vol_prior: empty correlation set");
  const std::size_t q = grid_index(set.p_grid, p_star);
  const Index N = set.crr.front().rows();
  VolModel v = partial;
  v.B = spectral_loadings(average(set.crr), partial.n_modes);
  v.s_tilde = Vector::Zero(N);
  const double g = gamma_p(p_star);
  for (Index i = 0; i < N; ++i) {
    double excess = set.crr[q](i, i) - g - phi0(v.B(i, 0), v.B(i, 0), p_star, v.zeta0, v.kappa0);
    if (v.n_modes == 2) excess -= v.B(i, 1) * v.B(i, 1);
    v.s_tilde(i) = std::sqrt(std::max(excess, 0.0));
  }
  return v;
}

VolCalibration calibrate_residual_vol(const NonlinCorrSet& set, const VolModel& partial,
                                      double p_star, ResidualFit mode,
                                      const VolCalibrationOptions& options) {
  check_modes(partial.n_modes);
  if (partial.A.cols() != partial.n_modes || partial.s.size() != partial.A.rows())
    throw DimensionError("calibrate_residual_vol: factor step results are malformed");
  const std::size_t q = grid_index(set.p_grid, p_star);
  const Matrix& cfr = set.cfr[q];
  const Matrix& crr = set.crr[q];
  const VolModel prior = residual_vol_prior(set, partial, p_star);
  const Index N = prior.B.rows();
  const int K = prior.n_modes;
  const bool fit_scales = mode != ResidualFit::FacRes;

  VolModel work = prior;
  const auto unpack = [&](const Vector& x) {
    work.B = Eigen::Map<const Matrix>(x.data(), N, K);
    if (fit_scales) work.s_tilde = x.segment(N * K, N);
  };
  Objective objective = [&](const Vector& x, Vector& g) {
    unpack(x);
    VolModel grad;
    const double f = residual_vol_loss(cfr, crr, p_star, work, mode, &grad);
    g.resize(x.size());
    g.head(N * K) = Eigen::Map<const Vector>(grad.B.data(), N * K);
    if (fit_scales) g.segment(N * K, N) = grad.s_tilde;
    return f;
  };
  Vector x0(N * K + (fit_scales ? N : 0));
  x0.head(N * K) = Eigen::Map<const Vector>(prior.B.data(), N * K);
  if (fit_scales) x0.segment(N * K, N) = prior.s_tilde;

  LbfgsOptions lopts;
  lopts.rel_tolerance = options.rel_tolerance;
  lopts.max_iterations = options.max_iterations;
  const LbfgsResult res = minimize_lbfgs(objective, x0, lopts);

  VolCalibration out;
  unpack(res.x);
  out.model = work;
  out.model.s_tilde = out.model.s_tilde.cwiseAbs();
  if (!fit_scales) {
    const double g = gamma_p(p_star);
    for (Index i = 0; i < N; ++i) {
      double excess = crr(i, i) - g - phi0(out.model.B(i, 0), out.model.B(i, 0), p_star, out.model.zeta0,
                                           out.model.kappa0);
      if (K == 2) excess -= out.model.B(i, 1) * out.model.B(i, 1);
      out.model.s_tilde(i) = std::sqrt(std::max(excess, 0.0));
    }
  }
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.prior_loss = residual_vol_loss(cfr, crr, p_star, prior, mode);
  out.loss = residual_vol_loss(cfr, crr, p_star, out.model, mode);
  if (out.loss > out.prior_loss) {
    out.model = prior;
    out.loss = out.prior_loss;
  }
  return out;
}

OmegaReconstruction reconstruct_omega(const FactorSeries& series, const VolModel& vol,
                                      const OmegaOptions& options) {
  vol.validate();
  const auto regress = [&](const Matrix& x, const Matrix& loadings, const Vector& scales,
                           OmegaSource source) -> std::optional<OmegaSeries> {
    if (x.cols() != loadings.rows())
      throw DimensionError("reconstruct_omega: series and loadings disagree in dimension");
    Matrix y = x.cwiseAbs().cwiseMax(kZeroClamp).array().log().matrix();
    y.rowwise() -= y.colwise().mean();
    Vector w = Vector::Ones(loadings.rows());
    if (options.weighted)
      w = scales.array().square().max(options.variance_floor).inverse().matrix();
    const Matrix lw = loadings.transpose() * w.asDiagonal();  // K x n
    const Matrix normal = lw * loadings;
    Eigen::LDLT<Matrix> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().cwiseAbs().maxCoeff())) {
      if (source == OmegaSource::FactorRegression) return std::nullopt;
      throw SingularityError("reconstruct_omega: residual volatility loadings are (numerically) zero");
    }
    const Matrix omega = ldlt.solve(lw * y.transpose()).transpose();  // T x K
    OmegaSeries out;
    out.source = source;
    out.omega0 = omega.col(0);
    if (vol.n_modes == 2) out.omega1 = omega.col(1);
    return out;
  };
  OmegaReconstruction rec;
  rec.from_factors = regress(series.factors, vol.A, vol.s, OmegaSource::FactorRegression);
  rec.from_residuals = *regress(series.residuals, vol.B, vol.s_tilde, OmegaSource::ResidualRegression);
  return rec;
}

}  // namespace nfm
