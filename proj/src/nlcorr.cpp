#include "nfm/nlcorr.hpp"

#include <cmath>
#include <limits>

#include "nfm/errors.hpp"

namespace nfm {

namespace {

constexpr double kZeroClamp = 1e-12;

/// |x|^p with the zero clamp; counts clamped cells.
Matrix abs_power(const Matrix& x, double p, Index& clamped) {
  Matrix out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    bool nonzero = false;
    for (Index t = 0; t < x.rows(); ++t) {
      double a = std::abs(x(t, j));
      if (a != 0.0) nonzero = true;
      if (a < kZeroClamp) {
        a = kZeroClamp;
        ++clamped;
      }
      out(t, j) = std::pow(a, p);
    }
    if (!nonzero) throw DegenerateSeriesError("series " + std::to_string(j) + " is identically zero");
  }
  return out;
}

void check_order(double p) {
  if (!(p > 0.0 && p <= 2.0))
    throw DomainError("moment order p = " + std::to_string(p) + " outside (0, 2]");
}

Matrix log_ratio(const Matrix& cross, const Vector& mx, const Vector& my, double p) {
  Matrix out(cross.rows(), cross.cols());
  const double inv_p2 = 1.0 / (p * p);
  for (Index j = 0; j < cross.cols(); ++j)
    for (Index i = 0; i < cross.rows(); ++i)
      out(i, j) = inv_p2 * std::log(cross(i, j) / (mx(i) * my(j)));
  return out;
}

Matrix self_cross(const Matrix& a) {
  Matrix c = Matrix::Zero(a.cols(), a.cols());
  c.selfadjointView<Eigen::Upper>().rankUpdate(a.transpose(), 1.0 / static_cast<double>(a.rows()));
  symmetrize_from_upper(c);
  return c;
}

}  // namespace

std::vector<double> default_p_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 8; ++i) grid.push_back(0.2 + 1.8 * i / 7.0);
  grid.back() = 2.0;
  return grid;
}

Matrix log_abs_correlation(const Matrix& x, const Matrix& y, double p) {
  check_order(p);
  if (x.rows() != y.rows()) throw LengthMismatchError("log_abs_correlation: row counts differ");
  if (x.rows() < 2) throw DimensionError("log_abs_correlation: need at least 2 dates");
  Index clamped = 0;
  const Matrix ax = abs_power(x, p, clamped);
  const double inv_t = 1.0 / static_cast<double>(x.rows());
  if (&x == &y) {
    Matrix c = log_ratio(self_cross(ax), ax.colwise().mean(), ax.colwise().mean(), p);
    symmetrize_from_upper(c);
    return c;
  }
  const Matrix ay = abs_power(y, p, clamped);
  return log_ratio(inv_t * ax.transpose() * ay, ax.colwise().mean(), ay.colwise().mean(), p);
}

NonlinCorrSet estimate_nlcorr(const FactorSeries& series, std::span<const double> p_grid) {
  const Matrix& f = series.factors;
  const Matrix& e = series.residuals;
  if (f.rows() != e.rows()) throw LengthMismatchError("estimate_nlcorr: factor/residual lengths differ");
  if (f.rows() < 2) throw DimensionError("estimate_nlcorr: need T >= 2");
  if (p_grid.empty()) throw DomainError("estimate_nlcorr: empty p grid");
  NonlinCorrSet set;
  const double inv_t = 1.0 / static_cast<double>(f.rows());
  for (const double p : p_grid) {
    check_order(p);
    Index clamped = 0;
    const Matrix af = abs_power(f, p, clamped);
    const Matrix ae = abs_power(e, p, clamped);
    const Vector mf = af.colwise().mean();
    const Vector me = ae.colwise().mean();
    Matrix cff = log_ratio(self_cross(af), mf, mf, p);
    Matrix crr = log_ratio(self_cross(ae), me, me, p);
    symmetrize_from_upper(cff);
    symmetrize_from_upper(crr);
    set.p_grid.push_back(p);
    set.cff.push_back(std::move(cff));
    set.crr.push_back(std::move(crr));
    set.cfr.push_back(log_ratio(inv_t * af.transpose() * ae, mf, me, p));
    set.clamped_cells = clamped;  // identical for every p
  }
  return set;
}

Matrix average(const std::vector<Matrix>& family) {
  if (family.empty()) throw DimensionError("average: empty family");
  Matrix acc = family.front();
  for (std::size_t i = 1; i < family.size(); ++i) acc += family[i];
  return acc / static_cast<double>(family.size());
}

std::vector<SpectralSummary> spectral_summary(const NonlinCorrSet& set, bool p_average) {
  std::vector<SpectralSummary> out;
  if (p_average) {
    out.push_back({std::numeric_limits<double>::quiet_NaN(), sorted_eigen(average(set.cff)),
                   sorted_eigen(average(set.crr)), sorted_svd(average(set.cfr))});
    return out;
  }
  for (std::size_t i = 0; i < set.size(); ++i)
    out.push_back({set.p_grid[i], sorted_eigen(set.cff[i]), sorted_eigen(set.crr[i]),
                   sorted_svd(set.cfr[i])});
  return out;
}

}  // namespace nfm
