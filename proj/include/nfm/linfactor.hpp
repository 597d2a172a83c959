#pragma once

#include <optional>

#include "nfm/data.hpp"
#include "nfm/types.hpp"

namespace nfm {

/// M-factor linear model r_i = sum_k W_ki f_k + e_i on unit-variance returns.
struct LinearFactorModel {
  Matrix weights;  ///< M x N

  Index n_factors() const { return weights.rows(); }
  Index n_assets() const { return weights.cols(); }

  /// v_i = 1 - sum_k W_ki^2, unclamped.
  Vector residual_variances() const;
};

/// Factor and residual series of a panel under a linear model, R = F W + E.
struct FactorSeries {
  Matrix factors;    ///< T x M
  Matrix residuals;  ///< T x N
};

/// Uncentered sample correlation (1/T) R^T R of a standardized return matrix.
Matrix sample_correlation(const Matrix& returns);

/// PCA identification W = Lambda_M^{1/2} V_M^T of a correlation matrix.
/// Negative eigenvalues (numerical noise) are floored at zero.
LinearFactorModel pca_prior(const Matrix& correlation, Index n_factors);
LinearFactorModel pca_prior(const ReturnPanel& panel, Index n_factors);

struct LinearCalibrationOptions {
  double rel_tolerance = 1e-10;
  int max_iterations = 2000;
  /// Weight of the smooth penalty sum_i max(0, sum_k W_ki^2 - 1)^2.
  double barrier_weight = 1e3;
  /// Starting point; the PCA prior of the target is used when absent.
  std::optional<LinearFactorModel> warm_start;
};

struct LinearCalibration {
  LinearFactorModel model;
  double loss = 0.0;        ///< off-diagonal loss at the returned weights
  double prior_loss = 0.0;  ///< off-diagonal loss at the PCA prior
  int iterations = 0;
  bool converged = false;   ///< false: best iterate returned after the iteration budget
};

/// Off-diagonal squared Frobenius distance between `target` and W^T W.
/// Writes dLoss/dW into grad when non-null.
double offdiag_loss(const Matrix& target, const Matrix& weights, Matrix* grad = nullptr);

/// Penalty sum_i max(0, sum_k W_ki^2 - 1)^2 and its gradient (accumulated into grad).
double variance_barrier(const Matrix& weights, Matrix* grad = nullptr);

/// Rank-M fit of the off-diagonal of a correlation matrix, started from its PCA prior.
LinearCalibration calibrate_weights(const Matrix& correlation, Index n_factors,
                                    const LinearCalibrationOptions& options = {});
LinearCalibration calibrate_weights(const ReturnPanel& panel, Index n_factors,
                                    const LinearCalibrationOptions& options = {});

/// Date-by-date GLS regression of returns on the factor weights, residual
/// variances floored at 1e-6.
FactorSeries extract_series(const Matrix& returns, const LinearFactorModel& model);
FactorSeries extract_series(const ReturnPanel& panel, const LinearFactorModel& model);

/// Correlation implied by the model: W^T W off the diagonal, exactly 1 on it.
Matrix model_correlation(const LinearFactorModel& model);

/// Subspace distance -(1/M) ln|det(Q_model^T Q_prior)| between the row spaces of
/// two weight matrices, each orthonormalized first.
double subspace_distance(const LinearFactorModel& model, const LinearFactorModel& prior);

}  // namespace nfm
