#include "nfm/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace nfm {

NestedCalibration calibrate_nested(const Matrix& returns, const NestedCalibrationOptions& options) {
  NestedCalibration out;
  out.linear = calibrate_weights(sample_correlation(returns), options.n_factors, options.linear);
  out.series = extract_series(returns, out.linear.model);
  out.nlcorr = estimate_nlcorr(out.series, options.p_grid);
  out.factor_step = calibrate_factor_vol(out.nlcorr, options.n_modes, options.vol);

  const auto& grid = options.p_grid;
  const bool on_grid = std::any_of(grid.begin(), grid.end(), [&](double p) {
    return std::abs(p - options.p_star) <= 1e-12 * std::max(1.0, options.p_star);
  });
  if (on_grid) {
    out.residual_step = calibrate_residual_vol(out.nlcorr, out.factor_step.model, options.p_star,
                                               options.residual_fit, options.vol);
  } else {
    std::vector<double> extended = grid;
    extended.push_back(options.p_star);
    std::sort(extended.begin(), extended.end());
    const NonlinCorrSet set = estimate_nlcorr(out.series, extended);
    out.residual_step = calibrate_residual_vol(set, out.factor_step.model, options.p_star,
                                               options.residual_fit, options.vol);
  }
  if (options.reconstruct_omega) out.omega = reconstruct_omega(out.series, out.residual_step.model, options.omega);
  return out;
}

}  // namespace nfm
