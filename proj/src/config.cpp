#include "nfm/config.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nfm/csv.hpp"
#include "nfm/errors.hpp"

namespace nfm {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"data", {"input", "format", "sectors", "max_missing_fraction"}},
      {"model", {"factors", "modes", "p_grid", "p_star", "residual_fit", "omega_weighted"}},
      {"optimizer", {"rel_tolerance", "max_iterations", "barrier_weight", "constraint_weight"}},
      {"simulate", {"model_dir", "dates", "beta_policy"}},
      {"diagnose", {"n_sim", "bins", "diagonals"}},
      {"backtest", {"T_is", "T_os", "track", "schemes", "n_sim", "warm_start", "p_star"}},
      {"run", {"seed", "threads", "out", "plots"}},
  };
  return keys;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (auto& f : csv::split(text))
    if (!f.empty()) out.push_back(f);
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
  return s;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

double parse_real(const std::string& v, const std::string& key) {
  const double x = csv::parse_number(v, key);
  if (!std::isfinite(x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

long long parse_int(const std::string& v, const std::string& key) {
  const double x = parse_real(v, key);
  if (x != std::floor(x)) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<long long>(x);
}

}  // namespace

std::uint64_t parse_seed(const std::string& v) {
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &used, 10);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("seed must be an unsigned 64-bit integer, got '" + v + "'");
  }
}

namespace {

InfeasiblePolicy parse_policy(const std::string& v) {
  if (v == "fallback") return InfeasiblePolicy::Fallback;
  if (v == "project") return InfeasiblePolicy::Project;
  throw ConfigError("beta_policy must be 'fallback' or 'project'");
}

}  // namespace

NestedCalibrationOptions RunConfig::nested_options() const {
  NestedCalibrationOptions o;
  o.n_factors = factors;
  o.n_modes = modes;
  o.p_grid = p_grid;
  o.p_star = p_star;
  o.residual_fit = residual_fit;
  o.linear.rel_tolerance = rel_tolerance;
  o.linear.max_iterations = max_iterations;
  o.linear.barrier_weight = barrier_weight;
  o.vol.rel_tolerance = rel_tolerance;
  o.vol.max_iterations = max_iterations;
  o.vol.constraint_weight = constraint_weight;
  o.omega.weighted = omega_weighted;
  return o;
}

BacktestConfig RunConfig::backtest_config() const {
  BacktestConfig b;
  b.T_is = T_is;
  b.T_os = T_os;
  b.track = track;
  b.n_sim = bt_n_sim;
  b.seed = seed;
  b.threads = threads;
  b.warm_start = warm_start;
  b.policy = beta_policy;
  b.nested = nested_options();
  b.nested.p_star = bt_p_star;
  return b;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  RunConfig c;
  for (const auto& [section, body] : tree) {
    const auto known = known_keys().find(section);
    if (known == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& [key, node] : body) {
      if (!known->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      const std::string v = node.data();
      const std::string name = section + "." + key;
      if (name == "data.input") c.input = v.empty() ? fs::path{} : resolve(v);
      else if (name == "data.format") c.format = parse_panel_format(v);
      else if (name == "data.sectors") c.sectors = v.empty() ? std::nullopt : std::optional(resolve(v));
      else if (name == "data.max_missing_fraction") c.max_missing_fraction = parse_real(v, name);
      else if (name == "model.factors") c.factors = parse_int(v, name);
      else if (name == "model.modes") c.modes = static_cast<int>(parse_int(v, name));
      else if (name == "model.p_grid") {
        c.p_grid.clear();
        for (const auto& f : split_list(v)) c.p_grid.push_back(parse_real(f, name));
      } else if (name == "model.p_star") c.p_star = parse_real(v, name);
      else if (name == "model.residual_fit") c.residual_fit = parse_residual_fit(v);
      else if (name == "model.omega_weighted") c.omega_weighted = parse_bool(v, name);
      else if (name == "optimizer.rel_tolerance") c.rel_tolerance = parse_real(v, name);
      else if (name == "optimizer.max_iterations") c.max_iterations = static_cast<int>(parse_int(v, name));
      else if (name == "optimizer.barrier_weight") c.barrier_weight = parse_real(v, name);
      else if (name == "optimizer.constraint_weight") c.constraint_weight = parse_real(v, name);
      else if (name == "simulate.model_dir") c.model_dir = v.empty() ? std::nullopt : std::optional(resolve(v));
      else if (name == "simulate.dates") c.sim_dates = parse_int(v, name);
      else if (name == "simulate.beta_policy") c.beta_policy = parse_policy(v);
      else if (name == "diagnose.n_sim") c.diag_n_sim = parse_int(v, name);
      else if (name == "diagnose.bins") c.diag_bins = static_cast<int>(parse_int(v, name));
      else if (name == "diagnose.diagonals") c.diag_diagonals = parse_bool(v, name);
      else if (name == "backtest.T_is") c.T_is = parse_int(v, name);
      else if (name == "backtest.T_os") c.T_os = parse_int(v, name);
      else if (name == "backtest.track") c.track = parse_track(v);
      else if (name == "backtest.schemes") c.schemes = split_list(v);
      else if (name == "backtest.n_sim") c.bt_n_sim = parse_int(v, name);
      else if (name == "backtest.warm_start") c.warm_start = parse_bool(v, name);
      else if (name == "backtest.p_star") c.bt_p_star = parse_real(v, name);
      else if (name == "run.seed") c.seed = parse_seed(v);
      else if (name == "run.threads") c.threads = static_cast<int>(parse_int(v, name));
      else if (name == "run.out") c.out = resolve(v);
      else if (name == "run.plots") c.plots = parse_bool(v, name);
    }
  }
  if (c.factors < 1) throw ConfigError("model.factors must be positive");
  if (c.modes != 1 && c.modes != 2) throw ConfigError("model.modes must be 1 or 2");
  if (c.p_grid.empty()) throw ConfigError("model.p_grid is empty");
  for (const double p : c.p_grid)
    if (!(p > 0.0 && p <= 2.0)) throw ConfigError("model.p_grid entries must lie in (0, 2]");
  if (!(c.p_star > 0.0 && c.p_star <= 2.0) || !(c.bt_p_star > 0.0 && c.bt_p_star <= 2.0))
    throw ConfigError("p_star must lie in (0, 2]");
  if (c.schemes.empty()) throw ConfigError("backtest.schemes is empty");
  if (c.threads < 1) throw ConfigError("run.threads must be positive");
  if (c.sim_dates < 1 || c.diag_n_sim < 2 || c.bt_n_sim < 2) throw ConfigError("simulation lengths must be positive");
  if (c.diag_bins < 1) throw ConfigError("diagnose.bins must be positive");
  return c;
}

std::string render_config(const RunConfig& c) {
  std::ostringstream o;
  const auto num = [](double x) { return csv::format_number(x); };
  std::vector<std::string> grid;
  for (const double p : c.p_grid) grid.push_back(num(p));
  o << "[data]\n"
    << "input = " << c.input.string() << "\n"
    << "format = " << (c.format == PanelFormat::Wide ? "wide" : "long") << "\n"
    << "sectors = " << (c.sectors ? c.sectors->string() : "") << "\n"
    << "max_missing_fraction = " << num(c.max_missing_fraction) << "\n\n"
    << "[model]\n"
    << "factors = " << c.factors << "\n"
    << "modes = " << c.modes << "\n"
    << "p_grid = " << join_list(grid) << "\n"
    << "p_star = " << num(c.p_star) << "\n"
    << "residual_fit = " << to_string(c.residual_fit) << "\n"
    << "omega_weighted = " << (c.omega_weighted ? "true" : "false") << "\n\n"
    << "[optimizer]\n"
    << "rel_tolerance = " << num(c.rel_tolerance) << "\n"
    << "max_iterations = " << c.max_iterations << "\n"
    << "barrier_weight = " << num(c.barrier_weight) << "\n"
    << "constraint_weight = " << num(c.constraint_weight) << "\n\n"
    << "[simulate]\n"
    << "model_dir = " << (c.model_dir ? c.model_dir->string() : "") << "\n"
    << "dates = " << c.sim_dates << "\n"
    << "beta_policy = " << (c.beta_policy == InfeasiblePolicy::Fallback ? "fallback" : "project") << "\n\n"
    << "[diagnose]\n"
    << "n_sim = " << c.diag_n_sim << "\n"
    << "bins = " << c.diag_bins << "\n"
    << "diagonals = " << (c.diag_diagonals ? "true" : "false") << "\n\n"
    << "[backtest]\n"
    << "T_is = " << c.T_is << "\n"
    << "T_os = " << c.T_os << "\n"
    << "track = " << to_string(c.track) << "\n"
    << "schemes = " << join_list(c.schemes) << "\n"
    << "n_sim = " << c.bt_n_sim << "\n"
    << "warm_start = " << (c.warm_start ? "true" : "false") << "\n"
    << "p_star = " << num(c.bt_p_star) << "\n\n"
    << "[run]\n"
    << "seed = " << c.seed << "\n"
    << "threads = " << c.threads << "\n"
    << "out = " << c.out.string() << "\n"
    << "plots = " << (c.plots ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace nfm
