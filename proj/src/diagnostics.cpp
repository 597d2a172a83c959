#include "nfm/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "nfm/errors.hpp"
#include "nfm/linalg.hpp"
#include "nfm/parallel.hpp"

namespace nfm {

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void check_unit_interval(double u, const char* what) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError(std::string(what) + " must lie strictly inside (0, 1)");
}

/// P(X > h, Y > k); Genz (2004), "Numerical computation of rectangular bivariate
/// and trivariate normal and t probabilities".
double bvn_upper(double h, double k, double r) {
  if (r == 0.0) return norm_cdf(-h) * norm_cdf(-k);
  static constexpr std::array<double, 3> w6{0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
  static constexpr std::array<double, 3> x6{0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  static constexpr std::array<double, 6> w12{0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                             0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
  static constexpr std::array<double, 6> x12{0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                             0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
  static constexpr std::array<double, 10> w20{0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                              0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                              0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                              0.1527533871307259};
  static constexpr std::array<double, 10> x20{0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                              0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                              0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                              0.07652652113349733};
  std::span<const double> w, x;
  if (std::abs(r) < 0.3) {
    w = w6;
    x = x6;
  } else if (std::abs(r) < 0.75) {
    w = w12;
    x = x12;
  } else {
    w = w20;
    x = x20;
  }
  const double tp = 2.0 * M_PI;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = 0.5 * std::asin(r);
    for (std::size_t i = 0; i < w.size(); ++i)
      for (const double node : {1.0 - x[i], 1.0 + x[i]}) {
        const double sn = std::sin(asr * node);
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    return bvn * asr / tp + norm_cdf(-h) * norm_cdf(-k);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 80.0;
    double asr = -0.5 * (bs / as + hk);
    if (asr > -100.0) bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      const double sp = std::sqrt(tp) * norm_cdf(-b / a);
      bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a *= 0.5;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      for (const double node : {1.0 - x[i], 1.0 + x[i]}) {
        const double xs = (a * node) * (a * node);
        asr = -0.5 * (bs / xs + hk);
        if (asr <= -100.0) continue;
        const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
        const double rs = std::sqrt(1.0 - xs);
        const double ep = std::exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
        acc += w[i] * std::exp(asr) * (sp - ep);
      }
    bvn = (a * acc - bvn) / tp;
  }
  if (r > 0.0) return bvn + norm_cdf(-std::max(h, k));
  if (h >= k) return -bvn;
  const double span = h < 0.0 ? norm_cdf(k) - norm_cdf(h) : norm_cdf(-h) - norm_cdf(-k);
  return span - bvn;
}

}  // namespace

Vector pseudo_observations(const Vector& x) {
  const Index T = x.size();
  std::vector<Index> order(static_cast<std::size_t>(T));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x(a) < x(b); });
  Vector u(T);
  const double denom = static_cast<double>(T) + 1.0;
  for (Index lo = 0; lo < T;) {
    Index hi = lo + 1;
    while (hi < T && x(order[hi]) == x(order[lo])) ++hi;
    const double midrank = 0.5 * static_cast<double>(lo + 1 + hi);  // mean of ranks lo+1 .. hi
    for (Index m = lo; m < hi; ++m) u(order[m]) = midrank / denom;
    lo = hi;
  }
  return u;
}

double copula_from_pseudo(const Vector& u_obs, const Vector& v_obs, double u, double v) {
  if (u_obs.size() != v_obs.size()) throw LengthMismatchError("copula: series lengths differ");
  Index hits = 0;
  for (Index t = 0; t < u_obs.size(); ++t) hits += (u_obs(t) <= u && v_obs(t) <= v) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(u_obs.size());
}

double empirical_copula_point(const Vector& x, const Vector& y, double u, double v) {
  if (x.size() != y.size()) throw LengthMismatchError("empirical_copula_point: series lengths differ");
  if (x.size() < 10) throw DimensionError("empirical_copula_point: need at least 10 dates");
  check_unit_interval(u, "u");
  check_unit_interval(v, "v");
  return copula_from_pseudo(pseudo_observations(x), pseudo_observations(y), u, v);
}

double rho_blomqvist(double medial) {
  if (!(medial >= 0.0 && medial <= 0.5)) throw DomainError("medial point must lie in [0, 1/2]");
  return std::cos(2.0 * M_PI * medial);
}

double elliptical_medial(double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("correlation must lie in [-1, 1]");
  return 0.25 + std::asin(rho) / (2.0 * M_PI);
}

double bvn_cdf(double h, double k, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("correlation must lie in [-1, 1]");
  if (std::isnan(h) || std::isnan(k)) throw DomainError("bvn_cdf: NaN limit");
  if (h == -HUGE_VAL || k == -HUGE_VAL) return 0.0;
  if (h == HUGE_VAL) return norm_cdf(k);
  if (k == HUGE_VAL) return norm_cdf(h);
  return std::clamp(bvn_upper(-h, -k, rho), 0.0, 1.0);
}

double gaussian_copula(double u, double v, double rho) {
  check_unit_interval(u, "u");
  check_unit_interval(v, "v");
  const boost::math::normal_distribution<double> n01;
  return bvn_cdf(boost::math::quantile(n01, u), boost::math::quantile(n01, v), rho);
}

std::vector<double> default_copula_grid() {
  std::vector<double> grid(101);
  for (int i = 0; i <= 100; ++i) grid[static_cast<std::size_t>(i)] = 0.01 + 0.98 * i / 100.0;
  grid.back() = 0.99;
  return grid;
}

namespace {

/// C(p, p) and C(p, 1 - p) on an ascending grid in O(T log G): every date covers a
/// contiguous range of grid indices, accumulated through a difference array.
void copula_diagonal_counts(const Vector& u, const Vector& v, std::span<const double> grid, Vector& diag,
                            Vector& anti) {
  const auto G = static_cast<Index>(grid.size());
  std::vector<double> upper(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) upper[g] = 1.0 - grid[g];
  std::vector<Index> diag_start(grid.size() + 1, 0);
  std::vector<Index> anti_delta(grid.size() + 1, 0);
  for (Index t = 0; t < u.size(); ++t) {
    const auto first_u = std::lower_bound(grid.begin(), grid.end(), u(t)) - grid.begin();
    const auto first_v = std::lower_bound(grid.begin(), grid.end(), v(t)) - grid.begin();
    ++diag_start[static_cast<std::size_t>(std::max(first_u, first_v))];
    // last index with 1 - p_g >= v(t); upper is non-increasing
    const auto past = std::upper_bound(upper.begin(), upper.end(), v(t), std::greater<>()) - upper.begin();
    if (first_u < past) {
      ++anti_delta[static_cast<std::size_t>(first_u)];
      --anti_delta[static_cast<std::size_t>(past)];
    }
  }
  diag.resize(G);
  anti.resize(G);
  const double inv_t = 1.0 / static_cast<double>(u.size());
  Index dcount = 0;
  Index acount = 0;
  for (Index g = 0; g < G; ++g) {
    dcount += diag_start[static_cast<std::size_t>(g)];
    acount += anti_delta[static_cast<std::size_t>(g)];
    diag(g) = static_cast<double>(dcount) * inv_t;
    anti(g) = static_cast<double>(acount) * inv_t;
  }
}

void diagonals_from_pseudo(const Vector& u, const Vector& v, double rho, std::span<const double> grid,
                           Vector& diag, Vector& anti) {
  copula_diagonal_counts(u, v, grid, diag, anti);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double p = grid[g];
    const double norm = p * (1.0 - p);
    const auto i = static_cast<Index>(g);
    diag(i) = (diag(i) - gaussian_copula(p, p, rho)) / norm;
    anti(i) = (anti(i) - gaussian_copula(p, 1.0 - p, rho)) / norm;
  }
}

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw DomainError("copula grid is empty");
  for (const double p : grid) check_unit_interval(p, "copula grid point");
  if (!std::is_sorted(grid.begin(), grid.end())) throw DomainError("copula grid must be ascending");
}

}  // namespace

CopulaDiagonals copula_diagonals(const Vector& x, const Vector& y, std::span<const double> grid) {
  if (x.size() != y.size()) throw LengthMismatchError("copula_diagonals: series lengths differ");
  if (x.size() < 10) throw DimensionError("copula_diagonals: need at least 10 dates");
  check_grid(grid);
  CopulaDiagonals out;
  out.grid.assign(grid.begin(), grid.end());
  out.rho_lin = pearson(x, y);
  diagonals_from_pseudo(pseudo_observations(x), pseudo_observations(y), out.rho_lin, grid, out.diag,
                        out.antidiag);
  return out;
}

CopulaDiagnostics copula_diagnostics(const Matrix& returns, const CopulaOptions& options) {
  const Index T = returns.rows();
  const Index N = returns.cols();
  if (T < 10) throw DimensionError("copula_diagnostics: need at least 10 dates");
  if (N < 2) throw DimensionError("copula_diagnostics: need at least 2 assets");
  if (options.diagonals) check_grid(options.grid);
  Matrix pseudo(T, N);
  parallel_for(static_cast<std::size_t>(N), options.threads,
               [&](std::size_t j) { pseudo.col(static_cast<Index>(j)) = pseudo_observations(returns.col(static_cast<Index>(j))); });
  CopulaDiagnostics out;
  for (Index i = 0; i < N; ++i)
    for (Index j = i + 1; j < N; ++j) out.pairs.emplace_back(i, j);
  const std::size_t P = out.pairs.size();
  out.medial.resize(static_cast<Index>(P));
  out.rho_b.resize(static_cast<Index>(P));
  out.rho_lin.resize(static_cast<Index>(P));
  if (options.diagonals) {
    out.grid = options.grid;
    out.diag_delta.resize(P);
    out.antidiag_delta.resize(P);
  }
  parallel_for(P, options.threads, [&](std::size_t q) {
    const auto [i, j] = out.pairs[q];
    const Index row = static_cast<Index>(q);
    const Vector u = pseudo.col(i);
    const Vector v = pseudo.col(j);
    out.medial(row) = copula_from_pseudo(u, v, 0.5, 0.5);
    out.rho_b(row) = rho_blomqvist(out.medial(row));
    out.rho_lin(row) = pearson(returns.col(i), returns.col(j));
    if (options.diagonals)
      diagonals_from_pseudo(u, v, out.rho_lin(row), out.grid, out.diag_delta[q], out.antidiag_delta[q]);
  });
  return out;
}

BinnedCurve binned_log_ratio(const Vector& rho_lin, const Vector& rho_b, int n_bins, double lo, double hi) {
  if (rho_lin.size() != rho_b.size()) throw LengthMismatchError("binned_log_ratio: length mismatch");
  if (n_bins < 1 || !(hi > lo)) throw DomainError("binned_log_ratio: invalid binning");
  const double width = (hi - lo) / n_bins;
  std::vector<double> sum(static_cast<std::size_t>(n_bins), 0.0), sum2(sum);
  BinnedCurve out;
  out.count.assign(static_cast<std::size_t>(n_bins), 0);
  for (Index q = 0; q < rho_lin.size(); ++q) {
    const double r = rho_lin(q);
    if (r == 0.0 || rho_b(q) == 0.0 || r < lo || r > hi || !std::isfinite(r)) continue;
    const auto b = static_cast<std::size_t>(std::min<double>(std::floor((r - lo) / width), n_bins - 1));
    const double value = std::log(std::abs(r / rho_b(q)));
    sum[b] += value;
    sum2[b] += value * value;
    ++out.count[b];
  }
  out.center.resize(n_bins);
  out.mean.resize(n_bins);
  out.standard_error.resize(n_bins);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int b = 0; b < n_bins; ++b) {
    const auto n = static_cast<double>(out.count[static_cast<std::size_t>(b)]);
    out.center(b) = lo + (b + 0.5) * width;
    out.mean(b) = n > 0 ? sum[static_cast<std::size_t>(b)] / n : nan;
    if (n > 1) {
      const double var = (sum2[static_cast<std::size_t>(b)] - n * out.mean(b) * out.mean(b)) / (n - 1.0);
      out.standard_error(b) = std::sqrt(std::max(var, 0.0) / n);
    } else {
      out.standard_error(b) = nan;
    }
  }
  return out;
}

namespace {

void check_quadratic_inputs(const LinearFactorModel& linear, const VolModel& vol) {
  vol.validate();
  if (vol.n_modes != 1) throw DimensionError("quadratic correlations are only available for one-mode models");
  if (vol.A.rows() != linear.n_factors() || vol.B.rows() != linear.n_assets())
    throw DimensionError("volatility and linear models disagree in dimension");
}

}  // namespace

double quadratic_corr_model(const LinearFactorModel& linear, const VolModel& vol, Index i, Index j,
                            const std::optional<LogMgf>& mgf) {
  check_quadratic_inputs(linear, vol);
  const Index N = linear.n_assets();
  if (i < 0 || j < 0 || i >= N || j >= N) throw DimensionError("quadratic_corr_model: asset index out of range");
  const LogMgf k0 = mgf.value_or(LogMgf::cumulant(vol.zeta0, vol.kappa0));
  const auto phi = [&](double a, double b) { return std::exp(k0.log_ratio(2.0 * a, 2.0 * b)); };
  const Matrix& W = linear.weights;
  const Index M = W.rows();
  const Vector v = linear.residual_variances();
  const Vector a = vol.A.col(0);
  const Vector b = vol.B.col(0);
  const double same = i == j ? 1.0 : 0.0;

  double total = 0.0;
  for (Index k = 0; k < M; ++k)
    for (Index l = 0; l < M; ++l) {
      double term = (W(k, i) * W(k, i) * W(l, j) * W(l, j) + 2.0 * W(k, i) * W(k, j) * W(l, i) * W(l, j)) *
                    phi(a(k), a(l));
      if (k == l) term *= std::exp(4.0 * vol.s(k) * vol.s(k));
      total += term;
    }
  double cross_i = 0.0;
  double cross_j = 0.0;
  for (Index l = 0; l < M; ++l) {
    cross_i += W(l, j) * W(l, j) * phi(b(i), a(l));
    cross_j += W(l, i) * W(l, i) * phi(b(j), a(l));
  }
  total += (1.0 + 2.0 * same) * (v(i) * cross_i + v(j) * cross_j);
  double rr = v(i) * v(j) * phi(b(i), b(j));
  if (i == j) rr *= 3.0 * std::exp(4.0 * vol.s_tilde(i) * vol.s_tilde(i));
  return total + rr;
}

Matrix quadratic_corr_matrix(const LinearFactorModel& linear, const VolModel& vol,
                             const std::optional<LogMgf>& mgf) {
  const Index N = linear.n_assets();
  Matrix out(N, N);
  for (Index i = 0; i < N; ++i)
    for (Index j = i; j < N; ++j) out(i, j) = out(j, i) = quadratic_corr_model(linear, vol, i, j, mgf);
  return out;
}

Matrix empirical_quadratic_corr(const Matrix& returns) {
  if (returns.rows() < 1) throw DimensionError("empirical_quadratic_corr: empty panel");
  const Matrix q = returns.cwiseAbs2();
  return q.transpose() * q / static_cast<double>(returns.rows());
}

}  // namespace nfm
