#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nfm/backtest.hpp"
#include "nfm/data.hpp"
#include "nfm/pipeline.hpp"

namespace nfm {

/// Settings of every subcommand. Loaded from an INI-style file; anything not
/// given keeps the defaults shown by render_config().
struct RunConfig {
  // [data]
  std::filesystem::path input;
  PanelFormat format = PanelFormat::Wide;
  std::optional<std::filesystem::path> sectors;
  double max_missing_fraction = 0.0;

  // [model]
  Index factors = 1;
  int modes = 1;
  std::vector<double> p_grid = default_p_grid();
  double p_star = 2.0;
  ResidualFit residual_fit = ResidualFit::Joint;
  bool omega_weighted = false;

  // [optimizer]
  double rel_tolerance = 1e-10;
  int max_iterations = 2000;
  double barrier_weight = 1e3;
  double constraint_weight = 1e3;

  // [simulate]
  std::optional<std::filesystem::path> model_dir;  ///< defaults to the output directory
  Index sim_dates = 2514;
  InfeasiblePolicy beta_policy = InfeasiblePolicy::Fallback;

  // [diagnose]
  Index diag_n_sim = 100000;
  int diag_bins = 20;
  bool diag_diagonals = true;

  // [backtest]
  Index T_is = 0;
  Index T_os = 59;
  Track track = Track::Linear;
  std::vector<std::string> schemes{"empirical", "lw", "clipped", "mf"};
  Index bt_n_sim = 100000;
  bool warm_start = false;
  double bt_p_star = 1.0;

  // [run]
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path out = "out";
  bool plots = true;

  NestedCalibrationOptions nested_options() const;
  BacktestConfig backtest_config() const;
};

/// Reads a config file; relative paths resolve against the file's directory.
/// Unknown sections or keys raise ConfigError.
RunConfig load_config(const std::filesystem::path& path);

/// Unsigned 64-bit seed in decimal; ConfigError otherwise.
std::uint64_t parse_seed(const std::string& text);

/// Complete config text, parseable by load_config.
std::string render_config(const RunConfig& config);

}  // namespace nfm
