#pragma once

#include <optional>
#include <span>
#include <string>

#include "nfm/linfactor.hpp"
#include "nfm/nlcorr.hpp"

namespace nfm {

/// Nested volatility model with K in {1, 2} common log-vol drivers:
///   f_k = eps_k exp(A_k0 W0 + A_k1 W1 + s_k w_k),  e_j = eta_j exp(B_j0 W0 + B_j1 W1 + s~_j w~_j).
/// Only the dominant driver W0 carries skewness zeta0 and excess kurtosis kappa0;
/// the second driver is Gaussian.
struct VolModel {
  int n_modes = 1;
  Matrix A;        ///< M x K
  Matrix B;        ///< N x K (may be empty before the residual step)
  Vector s;        ///< M
  Vector s_tilde;  ///< N
  double zeta0 = 0.0;
  double kappa0 = 0.0;

  Index n_factors() const { return A.rows(); }
  Index n_assets() const { return B.rows(); }

  /// All-zero model (Gaussian factors and residuals).
  static VolModel zeros(Index n_factors, Index n_assets, int n_modes = 1);

  /// Throws DimensionError/DomainError when shapes or constraints are violated.
  void validate() const;
};

/// Normalized 2p-moment of |N(0,1)|: p^-2 ln(sqrt(pi) Gamma(1/2+p) / Gamma((1+p)/2)^2).
double gamma_p(double p);

/// phi0(a,b;p) = ab + (p/2) zeta (a^2 b + a b^2) + (p^2/12) kappa (2a^3 b + 3a^2 b^2 + 2a b^3).
double phi0(double a, double b, double p, double zeta0, double kappa0);

/// Partial derivatives of phi0.
struct Phi0Gradient {
  double value, da, db, dzeta, dkappa;
};
Phi0Gradient phi0_gradient(double a, double b, double p, double zeta0, double kappa0);

struct NlcorrPrediction {
  Matrix ff;  ///< M x M
  Matrix fr;  ///< M x N
  Matrix rr;  ///< N x N
};

/// Model log-abs correlation matrices at order p.
NlcorrPrediction model_nlcorr(const VolModel& vol, double p);

/// Fac-fac fitting loss summed over the p-grid and all (k, l), plus
/// overlap_weight * (sum_k A_k0 A_k1)^2 when K = 2. Fills grad (same shape as the
/// model's A, s, zeta0, kappa0 fields) when non-null.
double factor_vol_loss(std::span<const Matrix> cff, std::span<const double> p_grid,
                       const VolModel& vol, double overlap_weight, VolModel* grad = nullptr);

enum class ResidualFit { FacRes, ResRes, Joint };
ResidualFit parse_residual_fit(const std::string& name);
std::string to_string(ResidualFit mode);

/// Residual fitting loss at a single order p. Fills grad.B and grad.s_tilde.
double residual_vol_loss(const Matrix& cfr, const Matrix& crr, double p, const VolModel& vol,
                         ResidualFit mode, VolModel* grad = nullptr);

struct VolCalibrationOptions {
  double rel_tolerance = 1e-10;
  int max_iterations = 2000;
  /// Overlap penalty weight for K = 2; when absent it is set to the mean squared
  /// off-diagonal empirical fac-fac entry.
  std::optional<double> overlap_weight;
  /// Weight of the quadratic penalties that keep kappa0 >= zeta0^2 - 2,
  /// |zeta0| <= 5 and |kappa0| <= 10 during the search.
  double constraint_weight = 1e3;
};

struct VolCalibration {
  VolModel model;
  double loss = 0.0;
  double prior_loss = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Spectral starting point for the factor step: top-K eigenpairs of the p-averaged
/// fac-fac matrix with its diagonal removed.
VolModel factor_vol_prior(const NonlinCorrSet& set, int n_modes);

/// Fits A, s, zeta0, kappa0 on the fac-fac matrices over the whole p-grid.
VolCalibration calibrate_factor_vol(const NonlinCorrSet& set, int n_modes,
                                    const VolCalibrationOptions& options = {});

/// Spectral starting point for B (top-K eigenpairs of the p-averaged res-res
/// matrix with its diagonal removed) and s~ from the diagonal at p_star.
VolModel residual_vol_prior(const NonlinCorrSet& set, const VolModel& partial, double p_star);

/// Fits B (and s~ for ResRes/Joint) at the single order p_star, which must belong
/// to the set's p-grid. In FacRes mode s~ is read off the res-res diagonal.
VolCalibration calibrate_residual_vol(const NonlinCorrSet& set, const VolModel& partial,
                                      double p_star, ResidualFit mode,
                                      const VolCalibrationOptions& options = {});

enum class OmegaSource { FactorRegression, ResidualRegression };

/// Reconstructed driver series.
struct OmegaSeries {
  Vector omega0;
  std::optional<Vector> omega1;
  OmegaSource source = OmegaSource::ResidualRegression;
};

struct OmegaReconstruction {
  /// Absent when the factor loadings A do not determine the drivers, as for a
  /// single factor whose A is not identified by the off-diagonal fac-fac terms.
  std::optional<OmegaSeries> from_factors;
  OmegaSeries from_residuals;
  /// The residual-based series, which averages over N assets.
  const OmegaSeries& canonical() const { return from_residuals; }
};

struct OmegaOptions {
  /// Weight observations by 1 / max(s^2, variance_floor); plain least squares otherwise.
  bool weighted = false;
  double variance_floor = 1e-3;
};

/// Date-by-date regressions of centered ln|F| on A and of centered ln|E| on B.
/// Throws SingularityError when B is (numerically) zero.
OmegaReconstruction reconstruct_omega(const FactorSeries& series, const VolModel& vol,
                                      const OmegaOptions& options = {});

}  // namespace nfm
