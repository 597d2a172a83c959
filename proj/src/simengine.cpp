#include "nfm/simengine.hpp"

#include <algorithm>
#include <cmath>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "nfm/errors.hpp"
#include "nfm/parallel.hpp"

namespace nfm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter)
    : state_(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter)) {}

CounterRng::result_type CounterRng::operator()() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double CounterRng::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

double beta_skewness(double a, double b) {
  const double nu = a + b;
  return 2.0 * (b - a) * std::sqrt(nu + 1.0) / ((nu + 2.0) * std::sqrt(a * b));
}

double beta_excess_kurtosis(double a, double b) {
  const double nu = a + b;
  return 6.0 * ((a - b) * (a - b) * (nu + 1.0) - a * b * (nu + 2.0)) / (a * b * (nu + 2.0) * (nu + 3.0));
}

bool beta_feasible(double zeta, double kappa) {
  return kappa > zeta * zeta - 2.0 && kappa < 1.5 * zeta * zeta;
}

std::pair<double, double> project_beta_moments(double zeta, double kappa, double margin) {
  const double lo = zeta * zeta - 2.0 + margin;
  const double hi = 1.5 * zeta * zeta - margin;
  if (lo >= hi) throw InfeasibleMomentsError("no Beta law with skewness " + std::to_string(zeta));
  return {zeta, std::clamp(kappa, lo, hi)};
}

BetaParams match_beta(double zeta, double kappa) {
  if (!std::isfinite(zeta) || !std::isfinite(kappa) || !beta_feasible(zeta, kappa))
    throw InfeasibleMomentsError("skewness " + std::to_string(zeta) + " and excess kurtosis " +
                                 std::to_string(kappa) + " are outside the Beta family");
  // Closed form: nu = alpha + beta from (zeta, kappa), then the mean m = alpha / nu
  // from the skewness, which depends on m only through (1 - 2m) / sqrt(m (1 - m)).
  const double nu = 3.0 * (kappa + 2.0 - zeta * zeta) / (1.5 * zeta * zeta - kappa);
  const double c = zeta * (nu + 2.0) / (2.0 * std::sqrt(nu + 1.0));
  const double m = 0.5 * (1.0 - c / std::sqrt(4.0 + c * c));
  const double a = nu * m;
  const double b = nu * (1.0 - m);
  const double err = std::max(std::abs(beta_skewness(a, b) - zeta), std::abs(beta_excess_kurtosis(a, b) - kappa));
  if (!(a > 0.0 && b > 0.0) || !(err < 1e-8 * (1.0 + std::abs(zeta) + std::abs(kappa))))
    throw CalibrationError("Beta moment matching failed (residual " + std::to_string(err) + ")");
  BetaParams out;
  out.alpha = a;
  out.beta = b;
  const double mean = m;
  const double sd = std::sqrt(out.alpha * out.beta / (nu * nu * (nu + 1.0)));
  out.scale = 1.0 / sd;
  out.shift = -mean / sd;
  return out;
}

OmegaLaw resolve_omega_law(double zeta, double kappa, InfeasiblePolicy policy) {
  OmegaLaw law;
  if (std::hypot(zeta, kappa) < 1e-3) return law;
  if (!beta_feasible(zeta, kappa)) {
    if (policy == InfeasiblePolicy::Fallback) {
      law.fallback = true;
      return law;
    }
    std::tie(zeta, kappa) = project_beta_moments(zeta, kappa);
    law.projected = true;
  }
  law.gaussian = false;
  law.beta = match_beta(zeta, kappa);
  law.zeta = zeta;
  law.kappa = kappa;
  return law;
}

void GeneratorSpec::validate() const {
  vol.validate();
  const Index M = linear.n_factors();
  const Index N = linear.n_assets();
  if (T_sim < 1) throw DomainError("simulation length must be at least 1");
  if (vol.A.rows() != M || vol.B.rows() != N)
    throw DimensionError("volatility model dimensions do not match the linear model");
  const Vector v = linear.residual_variances();
  if ((v.array() < -1e-12).any()) throw DomainError("factor weights imply negative residual variance");
}

namespace {

/// Draws Beta(a, b) through log-gamma variates, robust to very small shapes.
double draw_beta(CounterRng& rng, double a, double b) {
  const auto log_gamma_variate = [&](double shape) {
    if (shape >= 1.0) return std::log(boost::random::gamma_distribution<double>(shape)(rng));
    // G(shape) = G(shape + 1) U^(1/shape)
    const double g = boost::random::gamma_distribution<double>(shape + 1.0)(rng);
    return std::log(g) + std::log(rng.uniform()) / shape;
  };
  const double la = log_gamma_variate(a);
  const double lb = log_gamma_variate(b);
  return 1.0 / (1.0 + std::exp(lb - la));
}

struct Normalizers {
  Vector factor;    ///< 1 / sqrt(E exp(2 x_k))
  Vector residual;  ///< sqrt(v_j) / sqrt(E exp(2 y_j))
};

Normalizers normalizers(const GeneratorSpec& spec, const OmegaLaw& law) {
  const LogMgf k0 = law.log_mgf();
  const VolModel& vol = spec.vol;
  const auto log_second_moment = [&](const Matrix& L, Index i, double s) {
    double m = k0(2.0 * L(i, 0)) + 2.0 * s * s;
    if (vol.n_modes == 2) m += 2.0 * L(i, 1) * L(i, 1);
    return m;
  };
  Normalizers n;
  n.factor.resize(vol.A.rows());
  n.residual.resize(vol.B.rows());
  for (Index k = 0; k < vol.A.rows(); ++k) n.factor(k) = std::exp(-0.5 * log_second_moment(vol.A, k, vol.s(k)));
  const Vector v = spec.linear.residual_variances().cwiseMax(0.0);
  for (Index j = 0; j < vol.B.rows(); ++j)
    n.residual(j) = std::sqrt(v(j)) * std::exp(-0.5 * log_second_moment(vol.B, j, vol.s_tilde(j)));
  return n;
}

SimulationBlock draw_block(const GeneratorSpec& spec, const OmegaLaw& law, const Normalizers& norm,
                           Index first, Index count) {
  const VolModel& vol = spec.vol;
  const Index M = vol.A.rows();
  const Index N = vol.B.rows();
  const bool two = vol.n_modes == 2;
  SimulationBlock out;
  out.first_date = first;
  out.factors.resize(count, M);
  out.residuals.resize(count, N);
  out.omega0.resize(count);
  if (two) out.omega1.resize(count);
  boost::random::normal_distribution<double> normal;
  for (Index t = 0; t < count; ++t) {
    CounterRng rng(spec.seed, 0, static_cast<std::uint64_t>(first + t));
    double w0;
    if (law.gaussian) {
      w0 = normal(rng);
    } else {
      w0 = law.beta.shift + law.beta.scale * draw_beta(rng, law.beta.alpha, law.beta.beta);
    }
    const double w1 = two ? normal(rng) : 0.0;
    out.omega0(t) = w0;
    if (two) out.omega1(t) = w1;
    for (Index k = 0; k < M; ++k) {
      const double omega = normal(rng);
      const double eps = normal(rng);
      double x = vol.A(k, 0) * w0 + vol.s(k) * omega;
      if (two) x += vol.A(k, 1) * w1;
      out.factors(t, k) = eps * std::exp(x) * norm.factor(k);
    }
    for (Index j = 0; j < N; ++j) {
      const double omega = normal(rng);
      const double eta = normal(rng);
      double y = vol.B(j, 0) * w0 + vol.s_tilde(j) * omega;
      if (two) y += vol.B(j, 1) * w1;
      out.residuals(t, j) = eta * std::exp(y) * norm.residual(j);
    }
  }
  out.returns = out.factors * spec.linear.weights + out.residuals;
  return out;
}

/// Folds per-block statistics in block order, `threads` blocks per parallel batch.
template <class Stats, class Compute, class Fold>
void stream_blocks(const GeneratorSpec& spec, Index n_samples, const SimulationOptions& options,
                   Compute&& compute, Fold&& fold) {
  const OmegaLaw law = resolve_omega_law(spec.vol.zeta0, spec.vol.kappa0, options.policy);
  const Normalizers norm = normalizers(spec, law);
  const Index block = std::max<Index>(options.block_size, 1);
  const Index n_blocks = (n_samples + block - 1) / block;
  const Index batch = std::max(options.threads, 1) * 4;
  for (Index b0 = 0; b0 < n_blocks; b0 += batch) {
    const Index nb = std::min(batch, n_blocks - b0);
    std::vector<Stats> slots(static_cast<std::size_t>(nb));
    parallel_for(static_cast<std::size_t>(nb), options.threads, [&](std::size_t i) {
      const Index first = (b0 + static_cast<Index>(i)) * block;
      const Index count = std::min(block, n_samples - first);
      slots[i] = compute(draw_block(spec, law, norm, first, count));
    });
    for (auto& s : slots) fold(s);
  }
}

}  // namespace

SimulationBlock simulate_block(const GeneratorSpec& spec, const OmegaLaw& law, Index first, Index count) {
  spec.validate();
  return draw_block(spec, law, normalizers(spec, law), first, count);
}

SimulationBlock simulate_full(const GeneratorSpec& spec, const SimulationOptions& options) {
  spec.validate();
  const OmegaLaw law = resolve_omega_law(spec.vol.zeta0, spec.vol.kappa0, options.policy);
  const Normalizers norm = normalizers(spec, law);
  const Index T = spec.T_sim;
  const Index M = spec.linear.n_factors();
  const Index N = spec.linear.n_assets();
  SimulationBlock out;
  out.returns.resize(T, N);
  out.factors.resize(T, M);
  out.residuals.resize(T, N);
  out.omega0.resize(T);
  if (spec.vol.n_modes == 2) out.omega1.resize(T);
  const Index block = std::max<Index>(options.block_size, 1);
  const Index n_blocks = (T + block - 1) / block;
  parallel_for(static_cast<std::size_t>(n_blocks), options.threads, [&](std::size_t b) {
    const Index first = static_cast<Index>(b) * block;
    const Index count = std::min(block, T - first);
    SimulationBlock part = draw_block(spec, law, norm, first, count);
    out.returns.middleRows(first, count) = part.returns;
    out.factors.middleRows(first, count) = part.factors;
    out.residuals.middleRows(first, count) = part.residuals;
    out.omega0.segment(first, count) = part.omega0;
    if (spec.vol.n_modes == 2) out.omega1.segment(first, count) = part.omega1;
  });
  return out;
}

ReturnPanel simulate(const GeneratorSpec& spec, const SimulationOptions& options) {
  return ReturnPanel::from_matrix(simulate_full(spec, options).returns);
}

Matrix model_implied_abs_corr(const GeneratorSpec& spec, Index n_samples, const SimulationOptions& options) {
  spec.validate();
  if (n_samples < 2) throw DomainError("model_implied_abs_corr: need at least 2 samples");
  const Index N = spec.linear.n_assets();
  struct Stats {
    Vector sum;
    Matrix cross;
  };
  Vector sum = Vector::Zero(N);
  Matrix cross = Matrix::Zero(N, N);
  stream_blocks<Stats>(
      spec, n_samples, options,
      [&](const SimulationBlock& b) {
        const Matrix a = b.returns.cwiseAbs();
        Stats s{a.colwise().sum().transpose(), Matrix::Zero(N, N)};
        s.cross.selfadjointView<Eigen::Upper>().rankUpdate(a.transpose());
        return s;
      },
      [&](const Stats& s) {
        sum += s.sum;
        cross += s.cross;
      });
  symmetrize_from_upper(cross);
  const double n = static_cast<double>(n_samples);
  const Vector mean = sum / n;
  Matrix cov = cross / n - mean * mean.transpose();
  const Vector sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  Matrix corr(N, N);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < N; ++j)
      corr(i, j) = i == j ? 1.0 : (sd(i) > 0 && sd(j) > 0 ? cov(i, j) / (sd(i) * sd(j)) : 0.0);
  return corr;
}

QuadraticMoments mc_quadratic_moments(const GeneratorSpec& spec, Index n_samples,
                                      const SimulationOptions& options) {
  spec.validate();
  if (n_samples < 2) throw DomainError("mc_quadratic_moments: need at least 2 samples");
  const Index N = spec.linear.n_assets();
  struct Stats {
    Matrix s2, s4;
  };
  Matrix s2 = Matrix::Zero(N, N);
  Matrix s4 = Matrix::Zero(N, N);
  stream_blocks<Stats>(
      spec, n_samples, options,
      [&](const SimulationBlock& b) {
        const Matrix q = b.returns.cwiseAbs2();
        const Matrix q2 = q.cwiseAbs2();
        return Stats{q.transpose() * q, q2.transpose() * q2};
      },
      [&](const Stats& s) {
        s2 += s.s2;
        s4 += s.s4;
      });
  const double n = static_cast<double>(n_samples);
  QuadraticMoments out;
  out.n_samples = n_samples;
  out.mean = s2 / n;
  const Matrix var = (s4 / n - out.mean.cwiseAbs2()) * (n / (n - 1.0));
  out.standard_error = (var.cwiseMax(0.0) / n).cwiseSqrt();
  return out;
}

SampleMoments sample_moments(const Vector& x) {
  if (x.size() < 2) throw DimensionError("sample_moments: need at least 2 values");
  const double mean = x.mean();
  const Eigen::ArrayXd d = x.array() - mean;
  const double m2 = d.square().mean();
  const double m3 = d.cube().mean();
  const double m4 = d.square().square().mean();
  return {mean, m2, m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

}  // namespace nfm
