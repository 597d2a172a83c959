#pragma once

namespace nfm {

/// Shifted and scaled Beta law: X = shift + scale * Y with Y ~ Beta(alpha, beta).
struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
  double shift = 0.0;
  double scale = 1.0;
};

/// Log moment generating function K(t) = ln E[exp(t X)] of a unit-variance,
/// zero-mean log-volatility driver.
///
/// Three laws are supported: the four-cumulant truncation
/// K(t) = t^2/2 + zeta t^3/6 + kappa t^4/24 used by the calibration, the exact
/// Gaussian, and the exact shifted Beta used by the simulator.
class LogMgf {
 public:
  enum class Kind { Cumulant, Gaussian, Beta };

  static LogMgf cumulant(double zeta, double kappa);
  static LogMgf gaussian();
  static LogMgf beta(const BetaParams& params);

  Kind kind() const { return kind_; }
  double operator()(double t) const;

  /// ln Phi(a, b) = K(a + b) - K(a) - K(b).
  double log_ratio(double a, double b) const { return (*this)(a + b) - (*this)(a) - (*this)(b); }

 private:
  LogMgf() = default;
  Kind kind_ = Kind::Gaussian;
  double zeta_ = 0.0;
  double kappa_ = 0.0;
  BetaParams beta_{};
};

}  // namespace nfm
