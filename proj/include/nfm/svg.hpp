#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nfm::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  ///< scatter points instead of a polyline
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool identity_line = false;  ///< dashed y = x guide
  bool zero_line = false;      ///< dashed y = 0 guide
};

/// Minimal standalone SVG line/scatter chart. Non-finite points are skipped.
void write_plot(const std::filesystem::path& path, const Plot& plot);

}  // namespace nfm::svg
