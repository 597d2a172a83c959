#pragma once

#include <cstdint>
#include <limits>
#include <optional>

#include "nfm/data.hpp"
#include "nfm/linfactor.hpp"
#include "nfm/mgf.hpp"
#include "nfm/volcal.hpp"

namespace nfm {

/// Counter-based generator: SplitMix64 seeded from (seed, stream, counter).
/// Every (stream, counter) pair owns an independent sequence, so draws for a given
/// date never depend on which thread produced the neighbouring dates.
class CounterRng {
 public:
  using result_type = std::uint64_t;
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform double in (0, 1).
  double uniform();

 private:
  std::uint64_t state_;
};

/// One SplitMix64 finalization step.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for sub-task `index` of a run seeded with `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Skewness and excess kurtosis of Beta(alpha, beta).
double beta_skewness(double alpha, double beta);
double beta_excess_kurtosis(double alpha, double beta);

/// True when a Beta law can carry skewness zeta and excess kurtosis kappa,
/// i.e. zeta^2 - 2 < kappa < 1.5 zeta^2.
bool beta_feasible(double zeta, double kappa);

/// Shifted and scaled Beta with mean 0, variance 1, skewness zeta and excess
/// kurtosis kappa, in closed form.
/// Throws InfeasibleMomentsError outside the Beta region.
BetaParams match_beta(double zeta, double kappa);

/// Nearest target inside the Beta region: kappa clamped to
/// [zeta^2 - 2 + margin, 1.5 zeta^2 - margin].
std::pair<double, double> project_beta_moments(double zeta, double kappa, double margin = 0.05);

enum class InfeasiblePolicy { Fallback, Project };

/// Sampling law of the dominant log-vol driver.
struct OmegaLaw {
  bool gaussian = true;
  BetaParams beta{};
  bool fallback = false;   ///< Gaussian used in place of the requested moments
  bool projected = false;  ///< moments moved into the Beta region first
  double zeta = 0.0;       ///< moments actually sampled
  double kappa = 0.0;

  LogMgf log_mgf() const { return gaussian ? LogMgf::gaussian() : LogMgf::beta(beta); }
};

/// Gaussian within 1e-3 of (0, 0); Beta when feasible; otherwise per policy.
OmegaLaw resolve_omega_law(double zeta, double kappa, InfeasiblePolicy policy = InfeasiblePolicy::Fallback);

struct GeneratorSpec {
  LinearFactorModel linear;
  VolModel vol;
  Index T_sim = 1;
  std::uint64_t seed = 0;

  /// Throws DimensionError/DomainError on inconsistent shapes or sum_k W_kj^2 > 1.
  void validate() const;
};

struct SimulationOptions {
  int threads = 1;
  InfeasiblePolicy policy = InfeasiblePolicy::Fallback;
  Index block_size = 4096;
};

/// Everything drawn for a range of dates.
struct SimulationBlock {
  Index first_date = 0;
  Matrix returns;    ///< T x N
  Matrix factors;    ///< T x M
  Matrix residuals;  ///< T x N
  Vector omega0;
  Vector omega1;     ///< empty for one-mode models
};

/// Dates [first, first + count) of the run defined by spec.seed.
SimulationBlock simulate_block(const GeneratorSpec& spec, const OmegaLaw& law, Index first, Index count);

/// Full simulated series (returns, factors, residuals, drivers).
SimulationBlock simulate_full(const GeneratorSpec& spec, const SimulationOptions& options = {});

/// Simulated return panel R = F W + E.
ReturnPanel simulate(const GeneratorSpec& spec, const SimulationOptions& options = {});

/// Monte-Carlo corr(|r_i|, |r_j|) over n_samples dates, streamed in blocks.
/// Uses spec.seed; spec.T_sim is ignored.
Matrix model_implied_abs_corr(const GeneratorSpec& spec, Index n_samples,
                              const SimulationOptions& options = {});

struct QuadraticMoments {
  Matrix mean;            ///< E[r_i^2 r_j^2]
  Matrix standard_error;  ///< sample std of r_i^2 r_j^2 over sqrt(n)
  Index n_samples = 0;
};

/// Monte-Carlo E[r_i^2 r_j^2] with standard errors, streamed in blocks.
QuadraticMoments mc_quadratic_moments(const GeneratorSpec& spec, Index n_samples,
                                      const SimulationOptions& options = {});

/// Sample mean, variance, skewness and excess kurtosis of a series.
struct SampleMoments {
  double mean, variance, skewness, excess_kurtosis;
};
SampleMoments sample_moments(const Vector& x);

}  // namespace nfm
