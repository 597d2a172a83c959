#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nfm/types.hpp"

namespace nfm::csv {

/// Splits one CSV record on commas. Quoting is not supported; fields are trimmed.
std::vector<std::string> split(std::string_view line);

/// Parses a decimal number. Empty, "NA" and "NaN" fields yield NaN.
double parse_number(std::string_view field, std::string_view context);

/// Formats a double. precision <= 0 gives the shortest string that round-trips exactly.
std::string format_number(double value, int precision = 0);

/// Reads all non-empty lines of a file, stripping a UTF-8 BOM and CR line endings.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes a matrix with a header row. An optional leading label column is emitted
/// when row_labels is non-empty.
void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  const std::vector<std::string>& header,
                  const std::vector<std::string>& row_labels = {},
                  const std::string& label_header = "date", int precision = 0);

struct LabeledMatrix {
  std::vector<std::string> header;      ///< column names, label column excluded
  std::vector<std::string> row_labels;  ///< empty when the file has no label column
  Matrix values;
};

/// Reads a matrix written by write_matrix.
LabeledMatrix read_matrix(const std::filesystem::path& path, bool has_row_labels);

}  // namespace nfm::csv
