#include "nfm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "nfm/csv.hpp"
#include "nfm/errors.hpp"

namespace nfm {

namespace {

std::optional<long long> as_integer(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::map<std::string, int> load_sectors(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError(path.string() + ": empty sector file");
  const auto head = csv::split(lines.front());
  if (head.size() != 2 || head[0] != "asset" || head[1] != "sector_code")
    throw ParseError(path.string() + ": expected header 'asset,sector_code'");
  std::map<std::string, int> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = csv::split(lines[r]);
    const auto code = f.size() == 2 ? as_integer(f[1]) : std::nullopt;
    if (!code) throw ParseError(path.string() + " line " + std::to_string(r + 1) + ": malformed row");
    if (!out.emplace(f[0], static_cast<int>(*code)).second)
      throw DuplicateError(path.string() + ": asset '" + f[0] + "' listed twice");
  }
  return out;
}

/// Applies the coverage rule to a matrix with NaN holes.
ReturnPanel finalize(Matrix values, std::vector<std::string> dates, std::vector<std::string> ids,
                     std::vector<int> sectors, const LoadOptions& options,
                     const std::string& source) {
  const Index T = values.rows();
  const Index N = values.cols();
  for (Index j = 0; j < N; ++j) {
    const auto missing = static_cast<double>(values.col(j).array().isNaN().count());
    if (missing > options.max_missing_fraction * static_cast<double>(T))
      throw CoverageError(source + ": asset '" + ids[static_cast<std::size_t>(j)] + "' is missing " +
                          std::to_string(static_cast<long long>(missing)) + " of " +
                          std::to_string(T) + " dates");
  }
  std::vector<Index> keep;
  for (Index t = 0; t < T; ++t)
    if (!values.row(t).array().isNaN().any()) keep.push_back(t);

  ReturnPanel panel;
  panel.returns.resize(static_cast<Index>(keep.size()), N);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    panel.returns.row(static_cast<Index>(r)) = values.row(keep[r]);
    panel.dates.push_back(dates[static_cast<std::size_t>(keep[r])]);
  }
  panel.asset_ids = std::move(ids);
  panel.sector_codes = std::move(sectors);
  if (panel.n_dates() < 2 || panel.n_assets() < 2)
    throw CoverageError(source + ": need at least 2 complete dates and 2 assets, got " +
                        std::to_string(panel.n_dates()) + " x " + std::to_string(panel.n_assets()));
  panel.validate();
  return panel;
}

ReturnPanel load_wide(const std::filesystem::path& path, const LoadOptions& options) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError(path.string() + ": empty file");
  auto head = csv::split(lines.front());
  if (head.size() < 2 || head.front() != "date")
    throw ParseError(path.string() + ": wide header must start with 'date'");
  head.erase(head.begin());
  std::set<std::string> seen;
  for (const auto& id : head)
    if (id.empty() || !seen.insert(id).second)
      throw DuplicateError(path.string() + ": asset id '" + id + "' repeated or empty in header");

  const auto N = static_cast<Index>(head.size());
  Matrix values(static_cast<Index>(lines.size()) - 1, N);
  std::vector<std::string> dates;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = csv::split(lines[r]);
    const std::string ctx = path.string() + " line " + std::to_string(r + 1);
    if (static_cast<Index>(f.size()) != N + 1)
      throw ParseError(ctx + ": expected " + std::to_string(N + 1) + " fields");
    if (!dates.empty() && !date_less(dates.back(), f[0])) {
      if (dates.back() == f[0]) throw DuplicateError(ctx + ": date '" + f[0] + "' repeated");
      throw ParseError(ctx + ": dates must be strictly increasing");
    }
    dates.push_back(f[0]);
    for (Index j = 0; j < N; ++j)
      values(static_cast<Index>(r) - 1, j) = csv::parse_number(f[static_cast<std::size_t>(j) + 1], ctx);
  }
  std::vector<int> sectors(static_cast<std::size_t>(N), 0);
  return finalize(std::move(values), std::move(dates), std::move(head), std::move(sectors), options,
                  path.string());
}

ReturnPanel load_long(const std::filesystem::path& path, const LoadOptions& options) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError(path.string() + ": empty file");
  const auto head = csv::split(lines.front());
  const bool with_sector = head.size() == 4;
  if (!(head.size() == 3 || with_sector) || head[0] != "date" || head[1] != "asset" ||
      head[2] != "return" || (with_sector && head[3] != "sector"))
    throw ParseError(path.string() + ": long header must be 'date,asset,return[,sector]'");

  struct Cell {
    std::string date, asset;
    double value;
  };
  std::vector<Cell> cells;
  std::vector<std::string> ids;
  std::unordered_map<std::string, int> sector_of;
  std::set<std::string, decltype(&date_less)> date_set(&date_less);
  std::set<std::pair<std::string, std::string>> keys;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = csv::split(lines[r]);
    const std::string ctx = path.string() + " line " + std::to_string(r + 1);
    if (f.size() != head.size()) throw ParseError(ctx + ": wrong field count");
    if (f[0].empty() || f[1].empty()) throw ParseError(ctx + ": empty date or asset");
    if (!keys.emplace(f[0], f[1]).second)
      throw DuplicateError(ctx + ": duplicate cell (" + f[0] + ", " + f[1] + ")");
    const double v = csv::parse_number(f[2], ctx);
    if (!sector_of.count(f[1])) {
      ids.push_back(f[1]);
      sector_of[f[1]] = 0;
    }
    if (with_sector) {
      const auto code = as_integer(f[3]);
      if (!code) throw ParseError(ctx + ": sector must be an integer");
      sector_of[f[1]] = static_cast<int>(*code);
    }
    date_set.insert(f[0]);
    cells.push_back({f[0], f[1], v});
  }
  std::vector<std::string> dates(date_set.begin(), date_set.end());
  std::unordered_map<std::string, Index> row_of, col_of;
  for (std::size_t i = 0; i < dates.size(); ++i) row_of[dates[i]] = static_cast<Index>(i);
  for (std::size_t j = 0; j < ids.size(); ++j) col_of[ids[j]] = static_cast<Index>(j);
  Matrix values = Matrix::Constant(static_cast<Index>(dates.size()), static_cast<Index>(ids.size()),
                                   std::numeric_limits<double>::quiet_NaN());
  for (const auto& c : cells) values(row_of[c.date], col_of[c.asset]) = c.value;
  std::vector<int> sectors;
  for (const auto& id : ids) sectors.push_back(sector_of[id]);
  return finalize(std::move(values), std::move(dates), std::move(ids), std::move(sectors), options,
                  path.string());
}

}  // namespace

bool date_less(const std::string& a, const std::string& b) {
  const auto ia = as_integer(a);
  const auto ib = as_integer(b);
  if (ia && ib) return *ia < *ib;
  return a < b;
}

void ReturnPanel::validate() const {
  const auto T = static_cast<std::size_t>(returns.rows());
  const auto N = static_cast<std::size_t>(returns.cols());
  if (T < 1 || N < 1) throw DimensionError("panel must have at least one date and one asset");
  if (dates.size() != T || asset_ids.size() != N || sector_codes.size() != N)
    throw DimensionError("panel metadata does not match the return matrix");
  if (!returns.allFinite()) throw ParseError("panel contains missing or non-finite values");
  for (std::size_t t = 1; t < T; ++t)
    if (!date_less(dates[t - 1], dates[t]))
      throw ParseError("dates not strictly increasing at '" + dates[t] + "'");
}

ReturnPanel ReturnPanel::from_matrix(Matrix returns) {
  ReturnPanel p;
  for (Index t = 0; t < returns.rows(); ++t) p.dates.push_back(std::to_string(t + 1));
  for (Index j = 0; j < returns.cols(); ++j) p.asset_ids.push_back("a" + std::to_string(j + 1));
  p.sector_codes.assign(static_cast<std::size_t>(returns.cols()), 0);
  p.returns = std::move(returns);
  return p;
}

PanelFormat parse_panel_format(const std::string& name) {
  if (name == "wide") return PanelFormat::Wide;
  if (name == "long") return PanelFormat::Long;
  throw ConfigError("unknown panel format '" + name + "' (expected 'wide' or 'long')");
}

ReturnPanel load_panel(const std::filesystem::path& path, PanelFormat format,
                       const LoadOptions& options) {
  if (!std::filesystem::exists(path)) throw IoError("input file not found: " + path.string());
  if (options.max_missing_fraction < 0.0 || options.max_missing_fraction > 1.0)
    throw ConfigError("max_missing_fraction must lie in [0, 1]");
  ReturnPanel panel = format == PanelFormat::Wide ? load_wide(path, options) : load_long(path, options);
  if (options.sectors) {
    const auto sectors = load_sectors(*options.sectors);
    for (std::size_t j = 0; j < panel.asset_ids.size(); ++j) {
      const auto it = sectors.find(panel.asset_ids[j]);
      if (it != sectors.end()) panel.sector_codes[j] = it->second;
    }
  }
  return panel;
}

void write_panel_wide(const ReturnPanel& panel, const std::filesystem::path& path, int precision) {
  panel.validate();
  csv::write_matrix(path, panel.returns, panel.asset_ids, panel.dates, "date", precision);
}

Matrix standardize_columns(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  const auto T = static_cast<double>(x.rows());
  for (Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).sum() / T;
    const Vector centered = x.col(j).array() - mean;
    const double var = centered.squaredNorm() / T;
    if (!(var > 1e-28 * std::max(1.0, mean * mean)))
      throw DegenerateColumnError("column " + std::to_string(j) + " has zero variance");
    out.col(j) = centered / std::sqrt(var);
  }
  return out;
}

ReturnPanel standardize(const ReturnPanel& panel) {
  ReturnPanel out = panel;
  try {
    out.returns = standardize_columns(panel.returns);
  } catch (const DegenerateColumnError&) {
    for (Index j = 0; j < panel.n_assets(); ++j) {
      const auto c = panel.returns.col(j);
      if ((c.array() == c(0)).all())
        throw DegenerateColumnError("asset '" + panel.asset_ids[static_cast<std::size_t>(j)] +
                                    "' has a constant return series");
    }
    throw;
  }
  return out;
}

}  // namespace nfm
