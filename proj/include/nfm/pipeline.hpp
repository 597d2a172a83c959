#pragma once

#include <optional>
#include <vector>

#include "nfm/linfactor.hpp"
#include "nfm/nlcorr.hpp"
#include "nfm/volcal.hpp"

namespace nfm {

struct NestedCalibrationOptions {
  Index n_factors = 1;
  int n_modes = 1;
  std::vector<double> p_grid = default_p_grid();
  double p_star = 2.0;
  ResidualFit residual_fit = ResidualFit::Joint;
  LinearCalibrationOptions linear;
  VolCalibrationOptions vol;
  OmegaOptions omega;
  /// Skip the driver reconstruction when only the model is needed.
  bool reconstruct_omega = true;
};

/// Results of the full calibration chain on one standardized return matrix.
struct NestedCalibration {
  LinearCalibration linear;
  FactorSeries series;
  NonlinCorrSet nlcorr;  ///< on the configured grid
  VolCalibration factor_step;
  VolCalibration residual_step;
  std::optional<OmegaReconstruction> omega;

  const VolModel& vol() const { return residual_step.model; }
};

/// calibrate_weights -> extract_series -> estimate_nlcorr -> calibrate_factor_vol
/// -> calibrate_residual_vol -> reconstruct_omega. When p_star is not on the grid,
/// the residual step works on the grid extended by p_star.
NestedCalibration calibrate_nested(const Matrix& standardized_returns, const NestedCalibrationOptions& options);

}  // namespace nfm
