#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nfm/linfactor.hpp"
#include "nfm/mgf.hpp"
#include "nfm/volcal.hpp"

namespace nfm {

/// Midrank pseudo-observations rank / (T + 1).
Vector pseudo_observations(const Vector& x);

/// Fraction of dates with U_t <= u and V_t <= v, where U and V are the
/// pseudo-observations of x and y. Requires T >= 10 and u, v in (0, 1).
double empirical_copula_point(const Vector& x, const Vector& y, double u, double v);

/// Same, for precomputed pseudo-observations.
double copula_from_pseudo(const Vector& u_obs, const Vector& v_obs, double u, double v);

/// cos(2 pi medial); medial must lie in [0, 1/2].
double rho_blomqvist(double medial);

/// Medial point of an elliptical pair: 1/4 + arcsin(rho) / (2 pi).
double elliptical_medial(double rho);

/// P(X <= h, Y <= k) for a standard bivariate normal with correlation rho
/// (Genz's Gauss-Legendre scheme, double precision accuracy).
double bvn_cdf(double h, double k, double rho);

/// Gaussian copula C_G(u, v; rho).
double gaussian_copula(double u, double v, double rho);

/// 101 equally spaced points in [0.01, 0.99].
std::vector<double> default_copula_grid();

struct CopulaDiagonals {
  std::vector<double> grid;
  Vector diag;      ///< (C(p, p) - C_G(p, p)) / (p (1 - p))
  Vector antidiag;  ///< (C(p, 1 - p) - C_G(p, 1 - p)) / (p (1 - p))
  double rho_lin = 0.0;
};

/// Diagonal and anti-diagonal departures from the Gaussian copula with the
/// pair's sample linear correlation.
CopulaDiagonals copula_diagonals(const Vector& x, const Vector& y, std::span<const double> grid);

struct CopulaDiagnostics {
  std::vector<std::pair<Index, Index>> pairs;
  Vector medial;
  Vector rho_b;
  Vector rho_lin;
  std::vector<double> grid;
  std::vector<Vector> diag_delta;      ///< empty unless diagonals were requested
  std::vector<Vector> antidiag_delta;
};

struct CopulaOptions {
  bool diagonals = false;
  std::vector<double> grid = default_copula_grid();
  int threads = 1;
};

/// Per-pair diagnostics for all i < j of a T x N panel.
CopulaDiagnostics copula_diagnostics(const Matrix& returns, const CopulaOptions& options = {});

/// Binned ln|rho / rho^B| against rho.
struct BinnedCurve {
  Vector center;
  Vector mean;            ///< NaN for empty bins
  Vector standard_error;  ///< NaN when fewer than two pairs
  std::vector<Index> count;
};

/// Pairs with rho or rho^B equal to zero are skipped.
BinnedCurve binned_log_ratio(const Vector& rho_lin, const Vector& rho_b, int n_bins = 20,
                             double lo = 0.0, double hi = 1.0);

/// E[r_i^2 r_j^2] under a one-mode nested model. Phi0 ratios of the driver use
/// `mgf` (the four-cumulant truncation of vol.zeta0, vol.kappa0 when absent).
/// All-zero volatility parameters give 1 + 2 rho_ij^2.
double quadratic_corr_model(const LinearFactorModel& linear, const VolModel& vol, Index i, Index j,
                            const std::optional<LogMgf>& mgf = std::nullopt);

/// Full N x N matrix of the above.
Matrix quadratic_corr_matrix(const LinearFactorModel& linear, const VolModel& vol,
                             const std::optional<LogMgf>& mgf = std::nullopt);

/// Sample E[r_i^2 r_j^2] of a panel.
Matrix empirical_quadratic_corr(const Matrix& returns);

}  // namespace nfm
