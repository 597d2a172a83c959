#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfm/data.hpp"
#include "nfm/pipeline.hpp"
#include "nfm/simengine.hpp"

namespace nfm {

struct CleaningScheme {
  enum class Kind { Empirical, LedoitWolf, Clipped, MultiFactorLinear, GaussianFactor, NestedFactor };
  Kind kind = Kind::Empirical;
  double alpha = 1.0;  ///< LedoitWolf weight on the sample matrix
  Index n_factors = 0; ///< Clipped / factor schemes
  int n_modes = 1;     ///< NestedFactor

  static CleaningScheme empirical() { return {}; }
  static CleaningScheme ledoit_wolf(double alpha) { return {Kind::LedoitWolf, alpha, 0, 1}; }
  static CleaningScheme clipped(Index m) { return {Kind::Clipped, 1.0, m, 1}; }
  static CleaningScheme multi_factor(Index m) { return {Kind::MultiFactorLinear, 1.0, m, 1}; }
  static CleaningScheme gaussian_factor(Index m) { return {Kind::GaussianFactor, 1.0, m, 1}; }
  static CleaningScheme nested_factor(Index m, int k = 1) { return {Kind::NestedFactor, 1.0, m, k}; }

  /// "empirical", "lw:0.5", "clipped:5", "mf:3", "gaussian:5", "nested:5" or "nested:5:2".
  static CleaningScheme parse(const std::string& text);
  std::string name() const;       ///< kind only
  std::string parameter() const;  ///< alpha, M or "M:K"; empty for Empirical
  std::string label() const;      ///< parse() round-trips this

  /// Throws ConfigError when a parameter is out of range for N assets.
  void validate(Index n_assets) const;
};

/// Expands "lw", "clipped", "mf", "gaussian", "nested" without a parameter into the
/// default grids (alpha = 0, 0.05, ..., 1; M in {1,2,3,5,8,12,16,24,32,48,64,...} capped at N).
std::vector<CleaningScheme> expand_schemes(const std::vector<std::string>& specs, Index n_assets);

/// Default M grid {1,2,3,5,8,12,16,24,32,48,64,96,128,...} truncated at N, N included.
std::vector<Index> default_factor_grid(Index n_assets);

/// Window start dates tau_n = T_is + n T_os + 1 (1-based) with tau_n + T_os - 1 <= T.
std::vector<Index> sliding_windows(Index T, Index T_is, Index T_os);

/// Everything the model-based schemes need besides the window itself.
struct CleaningContext {
  /// Standardized raw returns of the in-sample window (T_is x N); required by the
  /// factor schemes, which model abs-correlations from return-level calibrations.
  const Matrix* raw_returns = nullptr;
  NestedCalibrationOptions nested;
  Index n_sim = 100000;
  std::uint64_t seed = 0;
  int threads = 1;
  InfeasiblePolicy policy = InfeasiblePolicy::Fallback;
  /// MultiFactorLinear warm start (not owned).
  const LinearFactorModel* warm_start = nullptr;
};

/// Sample correlation (1/T) Y^T Y of a column-standardized window, unit diagonal.
Matrix empirical_correlation(const Matrix& window);

/// Cleaned correlation for one scheme. `window` holds the track values (returns or
/// transformed absolute returns) standardized over the window.
Matrix clean_correlation(const Matrix& window, const CleaningScheme& scheme, const CleaningContext& context = {});

struct PortfolioWeights {
  Vector weights;
  bool regularized = false;  ///< ridge 1e-8 added because cond > 1e12
};

/// w = C^-1 g / (g^T C^-1 g).
PortfolioWeights optimal_weights(const Matrix& corr, const Vector& g);

/// g_i = y_i / sqrt(mean_j y_j^2).
Vector omniscient_predictor(const Vector& row);

/// N * (1/T') sum_t (sum_i Y_ti w_i / sigma_i)^2; equals 1 for the true-correlation
/// weights in expectation.
double risk(const Vector& weights, const Matrix& eval_panel, const Vector& sigma_is);

/// Centered absolute values scaled to unit population variance, per column.
Matrix abs_return_transform(const Matrix& returns);
Matrix abs_return_transform(const ReturnPanel& panel);

struct RmtRisk {
  double in_sample, out_of_sample;
};
/// (1 - q, 1 / (1 - q)) for q = N / T_is in [0, 1).
RmtRisk rmt_benchmark(double q);

double relative_gain(double r_clip, double r_mf);
double over_perf(double r_fng, double r_fg);

enum class Track { Linear, Absolute };
Track parse_track(const std::string& name);
std::string to_string(Track track);

struct BacktestConfig {
  Index T_is = 0;  ///< 0 means 2N
  Index T_os = 59;
  Track track = Track::Linear;
  Index n_sim = 100000;
  std::uint64_t seed = 0;
  int threads = 1;
  bool warm_start = false;
  InfeasiblePolicy policy = InfeasiblePolicy::Fallback;
  NestedCalibrationOptions nested = [] {
    NestedCalibrationOptions o;
    o.p_star = 1.0;
    return o;
  }();
};

struct WindowRisk {
  Index tau = 0;  ///< 1-based
  double in_sample = 0.0;
  double out_of_sample = 0.0;
  double budget = 0.0;  ///< g^T w
  bool regularized = false;
};

struct BacktestReport {
  CleaningScheme scheme;
  std::vector<WindowRisk> windows;
  double mean_is = 0.0;
  double mean_os = 0.0;
};

/// In-sample/out-of-sample protocol: for each tau the scheme is calibrated on dates
/// tau - T_is .. tau - 1 and evaluated on those dates and on tau + 1 .. tau + T_os
/// (clipped at T). Windows are independent; each derives its seed from config.seed.
std::vector<BacktestReport> run_backtest(const ReturnPanel& panel, const std::vector<CleaningScheme>& schemes,
                                         const BacktestConfig& config);

}  // namespace nfm
