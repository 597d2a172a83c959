#include "nfm/mgf.hpp"

#include <cmath>

#include <boost/math/special_functions/hypergeometric_1F1.hpp>

namespace nfm {

LogMgf LogMgf::cumulant(double zeta, double kappa) {
  LogMgf m;
  m.kind_ = Kind::Cumulant;
  m.zeta_ = zeta;
  m.kappa_ = kappa;
  return m;
}

LogMgf LogMgf::gaussian() { return LogMgf{}; }

LogMgf LogMgf::beta(const BetaParams& params) {
  LogMgf m;
  m.kind_ = Kind::Beta;
  m.beta_ = params;
  return m;
}

double LogMgf::operator()(double t) const {
  switch (kind_) {
    case Kind::Gaussian:
      return 0.5 * t * t;
    case Kind::Cumulant: {
      const double t2 = t * t;
      return 0.5 * t2 + zeta_ * t2 * t / 6.0 + kappa_ * t2 * t2 / 24.0;
    }
    case Kind::Beta: {
      // E exp(z Y) = 1F1(alpha; alpha + beta; z) for Y ~ Beta(alpha, beta); for
      // negative z use Kummer's transform so the series stays positive.
      const double a = beta_.alpha;
      const double b = beta_.alpha + beta_.beta;
      const double z = t * beta_.scale;
      const double log_m = z >= 0.0
                               ? std::log(boost::math::hypergeometric_1F1(a, b, z))
                               : z + std::log(boost::math::hypergeometric_1F1(b - a, b, -z));
      return t * beta_.shift + log_m;
    }
  }
  return 0.0;
}

}  // namespace nfm
