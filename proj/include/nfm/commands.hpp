#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nfm/config.hpp"

namespace nfm {

/// Library version string.
const char* version();

struct CommandResult {
  std::vector<std::filesystem::path> artifacts;  ///< numeric outputs, in write order
  std::vector<std::filesystem::path> plots;
  std::filesystem::path manifest;
};

/// standardize -> calibrate_weights -> extract_series -> estimate_nlcorr ->
/// calibrate_factor_vol -> calibrate_residual_vol -> reconstruct_omega, written to config.out.
CommandResult cmd_calibrate(const RunConfig& config);

/// Simulates the model stored in config.model_dir (or config.out).
CommandResult cmd_simulate(const RunConfig& config);

/// Empirical copula and quadratic-correlation diagnostics of the input panel next to
/// those of the calibrated model.
CommandResult cmd_diagnose(const RunConfig& config);

/// Sliding-window risk comparison of the configured cleaning schemes.
CommandResult cmd_backtest(const RunConfig& config);

/// 2 for input/config/IO failures, 3 for numerical ones.
int exit_code(const std::exception& error);

}  // namespace nfm
