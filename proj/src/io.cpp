#include "nfm/io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nfm/csv.hpp"
#include "nfm/errors.hpp"

namespace nfm::io {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string join(const Vector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += csv::format_number(v(i));
  }
  return s;
}

Vector parse_vector(const std::string& text, const std::string& key) {
  const auto fields = csv::split(text);
  Vector v(static_cast<Index>(fields.size()));
  for (std::size_t i = 0; i < fields.size(); ++i) v(static_cast<Index>(i)) = csv::parse_number(fields[i], key);
  if (text.empty()) v.resize(0);
  return v;
}

std::vector<std::string> numbered(const std::string& prefix, Index n) {
  std::vector<std::string> out;
  for (Index k = 0; k < n; ++k) out.push_back(prefix + std::to_string(k + 1));
  return out;
}

}  // namespace

void require_artifact(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifactError("missing artifact " + path.string());
}

void write_weights(const fs::path& path, const LinearFactorModel& model, const std::vector<std::string>& asset_ids) {
  if (static_cast<Index>(asset_ids.size()) != model.n_assets())
    throw DimensionError("write_weights: asset id count does not match the weights");
  csv::write_matrix(path, model.weights, asset_ids, numbered("f", model.n_factors()), "factor");
}

LinearFactorModel read_weights(const fs::path& path, std::vector<std::string>* asset_ids) {
  require_artifact(path);
  csv::LabeledMatrix m = csv::read_matrix(path, true);
  if (!m.values.allFinite()) throw ParseError(path.string() + ": weights contain missing values");
  if (asset_ids) *asset_ids = m.header;
  return LinearFactorModel{std::move(m.values)};
}

void write_vol_model(const fs::path& path, const VolModel& vol) {
  vol.validate();
  std::ofstream out = open_out(path);
  out << "[model]\n"
      << "n_modes = " << vol.n_modes << "\n"
      << "n_factors = " << vol.A.rows() << "\n"
      << "n_assets = " << vol.B.rows() << "\n"
      << "zeta0 = " << csv::format_number(vol.zeta0) << "\n"
      << "kappa0 = " << csv::format_number(vol.kappa0) << "\n\n"
      << "[factors]\n";
  for (int k = 0; k < vol.n_modes; ++k) out << "A" << k << " = " << join(vol.A.col(k)) << "\n";
  out << "s = " << join(vol.s) << "\n\n[assets]\n";
  for (int k = 0; k < vol.n_modes; ++k) out << "B" << k << " = " << join(vol.B.col(k)) << "\n";
  out << "s_tilde = " << join(vol.s_tilde) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

VolModel read_vol_model(const fs::path& path) {
  require_artifact(path);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
    const int modes = tree.get<int>("model.n_modes");
    const auto M = tree.get<Index>("model.n_factors");
    const auto N = tree.get<Index>("model.n_assets");
    VolModel vol = VolModel::zeros(M, N, modes);
    vol.zeta0 = csv::parse_number(tree.get<std::string>("model.zeta0"), "zeta0");
    vol.kappa0 = csv::parse_number(tree.get<std::string>("model.kappa0"), "kappa0");
    const auto column = [&](const std::string& key, Index n) {
      Vector v = parse_vector(tree.get<std::string>(key), key);
      if (v.size() != n) throw ParseError(path.string() + ": '" + key + "' has the wrong length");
      return v;
    };
    for (int k = 0; k < modes; ++k) {
      vol.A.col(k) = column("factors.A" + std::to_string(k), M);
      vol.B.col(k) = column("assets.B" + std::to_string(k), N);
    }
    vol.s = column("factors.s", M);
    vol.s_tilde = column("assets.s_tilde", N);
    vol.validate();
    return vol;
  } catch (const boost::property_tree::ptree_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_series(const fs::path& path, const Matrix& series, const std::string& prefix,
                  const std::vector<std::string>& dates) {
  csv::write_matrix(path, series, numbered(prefix, series.cols()), dates, "date");
}

void write_nlcorr(const fs::path& path, const NonlinCorrSet& set) {
  std::ofstream out = open_out(path);
  out << "matrix,p,row,col,value\n";
  const auto emit = [&](const char* name, double p, const Matrix& m, bool symmetric) {
    const std::string prefix = std::string(name) + "," + csv::format_number(p) + ",";
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = symmetric ? i : 0; j < m.cols(); ++j)
        out << prefix << i << ',' << j << ',' << csv::format_number(m(i, j)) << '\n';
  };
  for (std::size_t q = 0; q < set.size(); ++q) {
    emit("ff", set.p_grid[q], set.cff[q], true);
    emit("rr", set.p_grid[q], set.crr[q], true);
    emit("fr", set.p_grid[q], set.cfr[q], false);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

NonlinCorrSet read_nlcorr(const fs::path& path) {
  require_artifact(path);
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != "matrix,p,row,col,value") throw ParseError(path.string() + ": bad header");
  struct Entry {
    Index i, j;
    double v;
  };
  std::map<double, std::map<std::string, std::vector<Entry>>> by_p;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto f = csv::split(lines[l]);
    if (f.size() != 5) throw ParseError(path.string() + ": line " + std::to_string(l + 1) + " has wrong arity");
    const double p = csv::parse_number(f[1], "p");
    by_p[p][f[0]].push_back({static_cast<Index>(csv::parse_number(f[2], "row")),
                             static_cast<Index>(csv::parse_number(f[3], "col")), csv::parse_number(f[4], "value")});
  }
  NonlinCorrSet set;
  for (auto& [p, mats] : by_p) {
    const auto build = [&](const std::string& name, bool symmetric) {
      Index rows = 0, cols = 0;
      for (const auto& e : mats[name]) {
        rows = std::max(rows, e.i + 1);
        cols = std::max(cols, e.j + 1);
      }
      Matrix m = Matrix::Zero(rows, cols);
      for (const auto& e : mats[name]) {
        m(e.i, e.j) = e.v;
        if (symmetric) m(e.j, e.i) = e.v;
      }
      return m;
    };
    set.p_grid.push_back(p);
    set.cff.push_back(build("ff", true));
    set.crr.push_back(build("rr", true));
    set.cfr.push_back(build("fr", false));
  }
  return set;
}

void write_omega(const fs::path& path, const OmegaReconstruction& omega, const std::vector<std::string>& dates) {
  const OmegaSeries& res = omega.from_residuals;
  const bool two = res.omega1.has_value();
  const Index T = res.omega0.size();
  const Index per = two ? 2 : 1;
  Matrix m(T, omega.from_factors ? 2 * per : per);
  std::vector<std::string> header;
  Index c = 0;
  m.col(c++) = res.omega0;
  header.push_back("omega0");
  if (two) {
    m.col(c++) = *res.omega1;
    header.push_back("omega1");
  }
  if (const auto& fac = omega.from_factors) {
    m.col(c++) = fac->omega0;
    header.push_back("omega0_factors");
    if (two) {
      m.col(c++) = *fac->omega1;
      header.push_back("omega1_factors");
    }
  }
  csv::write_matrix(path, m, header, dates, "date");
}

}  // namespace nfm::io
