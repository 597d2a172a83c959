#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "nfm/simengine.hpp"
#include "nfm/types.hpp"

namespace nfm::test {

/// Central finite-difference gradient.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + step;
    const double fp = f(xp);
    xp(i) = x(i) - step;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-300});
}

inline Matrix uniform_matrix(std::mt19937_64& rng, Index r, Index c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

inline Matrix gaussian_matrix(std::uint64_t seed, Index r, Index c) {
  Matrix m(r, c);
  boost::random::normal_distribution<double> n;
  for (Index t = 0; t < r; ++t) {
    CounterRng rng(seed, 7, static_cast<std::uint64_t>(t));
    for (Index j = 0; j < c; ++j) m(t, j) = n(rng);
  }
  return m;
}

/// Bivariate Gaussian |x| correlation: (2/pi)(sqrt(1-r^2) + r asin r - 1) / (1 - 2/pi).
inline double gaussian_abs_corr(double r) {
  return (2.0 / M_PI) * (std::sqrt(1.0 - r * r) + r * std::asin(r) - 1.0) / (1.0 - 2.0 / M_PI);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nfm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace nfm::test
