#include "nfm/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "nfm/errors.hpp"

namespace nfm::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(trim(line.substr(start)));
      break;
    }
    out.emplace_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::string_view context) {
  field = trim(field);
  if (field.empty() || field == "NA" || field == "NaN" || field == "nan")
    return std::numeric_limits<double>::quiet_NaN();
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError("cannot parse number '" + std::string(field) + "' (" +
                     std::string(context) + ")");
  return value;
}

std::string format_number(double value, int precision) {
  std::array<char, 64> buf{};
  const auto res = precision > 0
                       ? std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                       std::chars_format::general, precision)
                       : std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    first = false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  const std::vector<std::string>& header,
                  const std::vector<std::string>& row_labels, const std::string& label_header,
                  int precision) {
  if (static_cast<Index>(header.size()) != m.cols())
    throw DimensionError("header has " + std::to_string(header.size()) + " names for " +
                         std::to_string(m.cols()) + " columns");
  const bool labeled = !row_labels.empty();
  if (labeled && static_cast<Index>(row_labels.size()) != m.rows())
    throw DimensionError("row label count does not match matrix rows");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  std::ostringstream buf;
  if (labeled) buf << label_header << (header.empty() ? "" : ",");
  for (std::size_t j = 0; j < header.size(); ++j) buf << (j ? "," : "") << header[j];
  buf << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    if (labeled) buf << row_labels[static_cast<std::size_t>(i)] << (m.cols() ? "," : "");
    for (Index j = 0; j < m.cols(); ++j) buf << (j ? "," : "") << format_number(m(i, j), precision);
    buf << '\n';
  }
  out << buf.str();
  if (!out) throw IoError("failed writing " + path.string());
}

LabeledMatrix read_matrix(const std::filesystem::path& path, bool has_row_labels) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path.string() + ": empty file");
  LabeledMatrix out;
  auto head = split(lines.front());
  if (has_row_labels) {
    if (head.empty()) throw ParseError(path.string() + ": missing label column");
    head.erase(head.begin());
  }
  out.header = head;
  const auto ncols = static_cast<Index>(head.size());
  out.values.resize(static_cast<Index>(lines.size()) - 1, ncols);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto fields = split(lines[r]);
    const std::string ctx = path.string() + " line " + std::to_string(r + 1);
    if (has_row_labels) {
      out.row_labels.push_back(fields.front());
      fields.erase(fields.begin());
    }
    if (static_cast<Index>(fields.size()) != ncols)
      throw ParseError(ctx + ": expected " + std::to_string(ncols) + " fields, got " +
                       std::to_string(fields.size()));
    for (Index c = 0; c < ncols; ++c)
      out.values(static_cast<Index>(r) - 1, c) = parse_number(fields[static_cast<std::size_t>(c)], ctx);
  }
  return out;
}

}  // namespace nfm::csv
