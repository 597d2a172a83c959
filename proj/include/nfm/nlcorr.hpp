#pragma once

#include <span>
#include <vector>

#include "nfm/linalg.hpp"
#include "nfm/linfactor.hpp"

namespace nfm {

/// Log-abs correlations C(p) = p^-2 ln(<|XY|^p> / (<|X|^p><|Y|^p>)) among factors
/// and residuals, one matrix triple per moment order.
struct NonlinCorrSet {
  std::vector<double> p_grid;
  std::vector<Matrix> cff;  ///< per p, M x M
  std::vector<Matrix> crr;  ///< per p, N x N
  std::vector<Matrix> cfr;  ///< per p, M x N
  Index clamped_cells = 0;  ///< series values with |x| < 1e-12 replaced by 1e-12

  std::size_t size() const { return p_grid.size(); }
};

/// Eight equally spaced orders from 0.2 to 2.
std::vector<double> default_p_grid();

/// Cross log-abs correlation between the columns of x (T x A) and y (T x B).
/// Symmetric when x and y are the same matrix object.
Matrix log_abs_correlation(const Matrix& x, const Matrix& y, double p);

NonlinCorrSet estimate_nlcorr(const FactorSeries& series, std::span<const double> p_grid);

struct SpectralSummary {
  double p = 0.0;  ///< order, or NaN for the p-averaged summary
  EigenPairs ff;
  EigenPairs rr;
  SingularTriplets fr;
};

/// Spectral decompositions per order, or a single one of the p-averaged matrices.
std::vector<SpectralSummary> spectral_summary(const NonlinCorrSet& set, bool p_average);

/// Element-wise average of a family of equally-shaped matrices.
Matrix average(const std::vector<Matrix>& family);

}  // namespace nfm
