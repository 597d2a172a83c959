#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nfm/types.hpp"

namespace nfm {

/// T x N panel of returns with per-date and per-asset metadata.
///
/// Sector codes are carried through the pipeline untouched; nothing downstream
/// interprets them.
struct ReturnPanel {
  Matrix returns;  ///< T x N
  std::vector<std::string> dates;
  std::vector<std::string> asset_ids;
  std::vector<int> sector_codes;

  Index n_dates() const { return returns.rows(); }
  Index n_assets() const { return returns.cols(); }

  /// Checks shape consistency, finiteness and strictly increasing dates.
  void validate() const;

  /// Builds a panel with generated labels ("1".."T", "a1".."aN").
  static ReturnPanel from_matrix(Matrix returns);
};

enum class PanelFormat { Long, Wide };

PanelFormat parse_panel_format(const std::string& name);

struct LoadOptions {
  /// Assets missing more than this fraction of dates are rejected with CoverageError.
  /// Dates left incomplete by tolerated gaps are dropped.
  double max_missing_fraction = 0.0;
  /// Optional `asset,sector_code` sidecar.
  std::optional<std::filesystem::path> sectors;
};

/// Loads a panel from CSV. Wide: `date,<id1>,...`; long: `date,asset,return[,sector]`.
ReturnPanel load_panel(const std::filesystem::path& path, PanelFormat format,
                       const LoadOptions& options = {});

/// Writes the wide CSV layout. precision <= 0 writes shortest round-trip decimals.
void write_panel_wide(const ReturnPanel& panel, const std::filesystem::path& path,
                      int precision = 0);

/// Returns a copy with every column demeaned and scaled to unit population variance.
ReturnPanel standardize(const ReturnPanel& panel);

/// Column-wise standardization of a bare matrix (population denominator).
Matrix standardize_columns(const Matrix& x);

/// Orders date labels numerically when both parse as integers, lexicographically otherwise.
bool date_less(const std::string& a, const std::string& b);

}  // namespace nfm
