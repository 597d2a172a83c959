#include "nfm/commands.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "nfm/csv.hpp"
#include "nfm/diagnostics.hpp"
#include "nfm/errors.hpp"
#include "nfm/io.hpp"
#include "nfm/simengine.hpp"
#include "nfm/svg.hpp"

#ifndef NFM_VERSION
#define NFM_VERSION "0.0.0"
#endif

namespace nfm {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const char* version() { return NFM_VERSION; }

namespace {

ReturnPanel load_input(const RunConfig& c) {
  if (c.input.empty()) throw ConfigError("no input panel configured ([data] input)");
  LoadOptions opts;
  opts.max_missing_fraction = c.max_missing_fraction;
  opts.sectors = c.sectors;
  return load_panel(c.input, c.format, opts);
}

fs::path model_dir(const RunConfig& c) { return c.model_dir.value_or(c.out); }

/// Small CSV table writer for mixed text/number rows.
class Table {
 public:
  Table(const fs::path& path, const std::vector<std::string>& header) : path_(path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::binary);
    if (!out_) throw IoError("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::string num(double v) { return csv::format_number(v); }

void write_manifest(CommandResult& result, const RunConfig& c, const std::string& command,
                    const ordered_json& extra = ordered_json::object()) {
  ordered_json j;
  j["command"] = command;
  j["version"] = version();
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["artifacts"] = ordered_json::array();
  for (const auto& a : result.artifacts) j["artifacts"].push_back(a.filename().string());
  j["plots"] = ordered_json::array();
  for (const auto& p : result.plots) j["plots"].push_back(p.filename().string());
  j["details"] = extra;
  j["config"] = render_config(c);
  result.manifest = c.out / ("manifest_" + command + ".json");
  std::ofstream out(result.manifest, std::ios::binary);
  if (!out) throw IoError("cannot write " + result.manifest.string());
  out << j.dump(2) << '\n';
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

CommandResult cmd_calibrate(const RunConfig& c) {
  const ReturnPanel panel = standardize(load_input(c));
  const NestedCalibrationOptions opts = c.nested_options();
  if (opts.n_factors > panel.n_assets())
    throw ConfigError("model.factors exceeds the number of assets (" + std::to_string(panel.n_assets()) + ")");
  const NestedCalibration cal = calibrate_nested(panel.returns, opts);
  fs::create_directories(c.out);

  CommandResult r;
  const auto add = [&](const std::string& name) { return r.artifacts.emplace_back(c.out / name); };
  io::write_weights(add("weights.csv"), cal.linear.model, panel.asset_ids);
  io::write_series(add("factors.csv"), cal.series.factors, "f", panel.dates);
  csv::write_matrix(add("residuals.csv"), cal.series.residuals, panel.asset_ids, panel.dates, "date");
  io::write_nlcorr(add("nlcorr.csv"), cal.nlcorr);
  io::write_vol_model(add("vol_model.txt"), cal.vol());
  io::write_omega(add("omega.csv"), *cal.omega, panel.dates);

  {
    Table t(add("calibration_summary.csv"), {"step", "loss", "prior_loss", "iterations", "converged"});
    const auto line = [&](const char* step, double loss, double prior, int it, bool ok) {
      t.row({step, num(loss), num(prior), std::to_string(it), ok ? "true" : "false"});
    };
    line("linear", cal.linear.loss, cal.linear.prior_loss, cal.linear.iterations, cal.linear.converged);
    line("factor_vol", cal.factor_step.loss, cal.factor_step.prior_loss, cal.factor_step.iterations,
         cal.factor_step.converged);
    line("residual_vol", cal.residual_step.loss, cal.residual_step.prior_loss, cal.residual_step.iterations,
         cal.residual_step.converged);
  }
  {
    const auto summary = spectral_summary(cal.nlcorr, true).front();
    Table t(add("nlcorr_spectrum.csv"), {"matrix", "rank", "value"});
    for (Index k = 0; k < summary.ff.values.size(); ++k) t.row({"ff", std::to_string(k + 1), num(summary.ff.values(k))});
    for (Index k = 0; k < summary.rr.values.size(); ++k) t.row({"rr", std::to_string(k + 1), num(summary.rr.values(k))});
    for (Index k = 0; k < summary.fr.values.size(); ++k) t.row({"fr", std::to_string(k + 1), num(summary.fr.values(k))});
  }
  ordered_json extra;
  extra["n_dates"] = panel.n_dates();
  extra["n_assets"] = panel.n_assets();
  extra["clamped_cells"] = cal.nlcorr.clamped_cells;
  extra["zeta0"] = cal.vol().zeta0;
  extra["kappa0"] = cal.vol().kappa0;
  extra["beta_feasible"] = beta_feasible(cal.vol().zeta0, cal.vol().kappa0);
  write_manifest(r, c, "calibrate", extra);
  return r;
}

namespace {

GeneratorSpec load_generator(const RunConfig& c, std::vector<std::string>& asset_ids) {
  const fs::path dir = model_dir(c);
  GeneratorSpec spec;
  spec.linear = io::read_weights(dir / "weights.csv", &asset_ids);
  spec.vol = io::read_vol_model(dir / "vol_model.txt");
  spec.seed = c.seed;
  spec.T_sim = c.sim_dates;
  // A smooth barrier lets sum_k W_kj^2 overshoot 1 very slightly.
  for (Index j = 0; j < spec.linear.weights.cols(); ++j) {
    const double n2 = spec.linear.weights.col(j).squaredNorm();
    if (n2 > 1.0) spec.linear.weights.col(j) /= std::sqrt(n2);
  }
  spec.validate();
  return spec;
}

}  // namespace

CommandResult cmd_simulate(const RunConfig& c) {
  std::vector<std::string> ids;
  const GeneratorSpec spec = load_generator(c, ids);
  SimulationOptions sim;
  sim.threads = c.threads;
  sim.policy = c.beta_policy;
  const OmegaLaw law = resolve_omega_law(spec.vol.zeta0, spec.vol.kappa0, sim.policy);
  const SimulationBlock full = simulate_full(spec, sim);
  fs::create_directories(c.out);

  CommandResult r;
  ReturnPanel panel = ReturnPanel::from_matrix(full.returns);
  panel.asset_ids = ids;
  write_panel_wide(panel, r.artifacts.emplace_back(c.out / "simulated_panel.csv"));
  {
    Matrix om(full.omega0.size(), full.omega1.size() ? 2 : 1);
    om.col(0) = full.omega0;
    if (full.omega1.size()) om.col(1) = full.omega1;
    csv::write_matrix(r.artifacts.emplace_back(c.out / "simulated_omega.csv"), om,
                      full.omega1.size() ? std::vector<std::string>{"omega0", "omega1"} : std::vector<std::string>{"omega0"},
                      panel.dates, "date");
  }
  {
    Table t(r.artifacts.emplace_back(c.out / "moment_check.csv"), {"quantity", "target", "sample", "tolerance"});
    const double T = static_cast<double>(spec.T_sim);
    if (spec.T_sim >= 2) {
      const SampleMoments m = sample_moments(full.omega0);
      const double zeta = law.gaussian ? 0.0 : law.zeta;
      const double kappa = law.gaussian ? 0.0 : law.kappa;
      // rough 5-sigma bands under the Gaussian approximation
      t.row({"omega0_mean", "0", num(m.mean), num(5.0 / std::sqrt(T))});
      t.row({"omega0_variance", "1", num(m.variance), num(5.0 * std::sqrt(2.0 / T))});
      t.row({"omega0_skewness", num(zeta), num(m.skewness), num(5.0 * std::sqrt(6.0 / T))});
      t.row({"omega0_excess_kurtosis", num(kappa), num(m.excess_kurtosis), num(5.0 * std::sqrt(24.0 / T))});
      for (Index j = 0; j < full.returns.cols(); ++j) {
        const double var = full.returns.col(j).squaredNorm() / T;
        t.row({"variance_" + ids[static_cast<std::size_t>(j)], "1", num(var), num(3.0 / std::sqrt(T))});
      }
    }
  }
  ordered_json extra;
  extra["dates"] = spec.T_sim;
  extra["omega_law"] = law.gaussian ? "gaussian" : "beta";
  extra["gaussian_fallback"] = law.fallback;
  extra["projected"] = law.projected;
  if (!law.gaussian) {
    extra["beta"] = {{"alpha", law.beta.alpha}, {"beta", law.beta.beta}, {"shift", law.beta.shift}, {"scale", law.beta.scale}};
  }
  write_manifest(r, c, "simulate", extra);
  return r;
}

CommandResult cmd_diagnose(const RunConfig& c) {
  std::vector<std::string> ids;
  const fs::path dir = model_dir(c);
  io::require_artifact(dir / "weights.csv");
  io::require_artifact(dir / "vol_model.txt");
  GeneratorSpec spec = load_generator(c, ids);
  const ReturnPanel panel = standardize(load_input(c));
  if (panel.n_assets() != spec.linear.n_assets())
    throw DimensionError("calibrated model and input panel disagree on the number of assets");
  spec.T_sim = c.diag_n_sim;
  SimulationOptions sim;
  sim.threads = c.threads;
  sim.policy = c.beta_policy;
  const Matrix simulated = simulate_full(spec, sim).returns;

  CopulaOptions copts;
  copts.diagonals = c.diag_diagonals;
  copts.threads = c.threads;
  const CopulaDiagnostics emp = copula_diagnostics(panel.returns, copts);
  const CopulaDiagnostics mod = copula_diagnostics(simulated, copts);
  fs::create_directories(c.out);
  CommandResult r;

  const auto log_ratio = [](double rho, double rho_b) {
    return rho == 0.0 || rho_b == 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::log(std::abs(rho / rho_b));
  };
  {
    Table t(r.artifacts.emplace_back(c.out / "copula_pairs.csv"),
            {"i", "j", "asset_i", "asset_j", "rho", "medial", "rho_b", "log_ratio", "model_rho", "model_medial",
             "model_rho_b", "model_log_ratio"});
    for (std::size_t q = 0; q < emp.pairs.size(); ++q) {
      const auto [i, j] = emp.pairs[q];
      const auto k = static_cast<Index>(q);
      t.row({std::to_string(i), std::to_string(j), panel.asset_ids[static_cast<std::size_t>(i)],
             panel.asset_ids[static_cast<std::size_t>(j)], num(emp.rho_lin(k)), num(emp.medial(k)), num(emp.rho_b(k)),
             num(log_ratio(emp.rho_lin(k), emp.rho_b(k))), num(mod.rho_lin(k)), num(mod.medial(k)), num(mod.rho_b(k)),
             num(log_ratio(mod.rho_lin(k), mod.rho_b(k)))});
    }
  }
  const BinnedCurve ce = binned_log_ratio(emp.rho_lin, emp.rho_b, c.diag_bins);
  const BinnedCurve cm = binned_log_ratio(mod.rho_lin, mod.rho_b, c.diag_bins);
  {
    Table t(r.artifacts.emplace_back(c.out / "copula_curve.csv"),
            {"rho", "log_ratio", "log_ratio_se", "pairs", "model_log_ratio", "model_log_ratio_se", "model_pairs"});
    for (Index b = 0; b < ce.center.size(); ++b)
      t.row({num(ce.center(b)), num(ce.mean(b)), num(ce.standard_error(b)),
             std::to_string(ce.count[static_cast<std::size_t>(b)]), num(cm.mean(b)), num(cm.standard_error(b)),
             std::to_string(cm.count[static_cast<std::size_t>(b)])});
  }
  Vector d_emp, a_emp, d_mod, a_mod;
  if (c.diag_diagonals) {
    const auto mean_of = [](const std::vector<Vector>& v) {
      Vector acc = Vector::Zero(v.front().size());
      for (const auto& x : v) acc += x;
      return Vector(acc / static_cast<double>(v.size()));
    };
    d_emp = mean_of(emp.diag_delta);
    a_emp = mean_of(emp.antidiag_delta);
    d_mod = mean_of(mod.diag_delta);
    a_mod = mean_of(mod.antidiag_delta);
    Table t(r.artifacts.emplace_back(c.out / "copula_diagonals.csv"),
            {"p", "diag", "antidiag", "model_diag", "model_antidiag"});
    for (std::size_t g = 0; g < emp.grid.size(); ++g) {
      const auto k = static_cast<Index>(g);
      t.row({num(emp.grid[g]), num(d_emp(k)), num(a_emp(k)), num(d_mod(k)), num(a_mod(k))});
    }
  }
  const Matrix q_emp = empirical_quadratic_corr(panel.returns);
  const Matrix q_mod = spec.vol.n_modes == 1 ? quadratic_corr_matrix(spec.linear, spec.vol)
                                             : empirical_quadratic_corr(simulated);
  {
    Table t(r.artifacts.emplace_back(c.out / "quadratic_corr.csv"), {"i", "j", "empirical", "model"});
    for (Index i = 0; i < q_emp.rows(); ++i)
      for (Index j = i; j < q_emp.cols(); ++j)
        t.row({std::to_string(i), std::to_string(j), num(q_emp(i, j)), num(q_mod(i, j))});
  }

  if (c.plots) {
    svg::Plot curve{"Copula medial departure", "rho", "ln|rho / rho_B|",
                    {{"empirical", to_std(ce.center), to_std(ce.mean), false},
                     {"model", to_std(cm.center), to_std(cm.mean), false}},
                    false, true};
    svg::write_plot(r.plots.emplace_back(c.out / "copula_curve.svg"), curve);
    if (c.diag_diagonals) {
      svg::Plot diag{"Copula diagonals vs Gaussian", "p", "Delta(p)",
                     {{"diagonal", emp.grid, to_std(d_emp), false},
                      {"anti-diagonal", emp.grid, to_std(a_emp), false},
                      {"model diagonal", emp.grid, to_std(d_mod), false},
                      {"model anti-diagonal", emp.grid, to_std(a_mod), false}},
                     false, true};
      svg::write_plot(r.plots.emplace_back(c.out / "copula_diagonals.svg"), diag);
    }
    svg::Series pts{"pairs", {}, {}, true};
    for (Index i = 0; i < q_emp.rows(); ++i)
      for (Index j = i + 1; j < q_emp.cols(); ++j) {
        pts.x.push_back(q_mod(i, j));
        pts.y.push_back(q_emp(i, j));
      }
    svg::write_plot(r.plots.emplace_back(c.out / "quadratic_corr.svg"),
                    {"Quadratic correlations", "model E[r_i^2 r_j^2]", "empirical", {pts}, true, false});
  }
  ordered_json extra;
  extra["model_dates"] = c.diag_n_sim;
  extra["pairs"] = emp.pairs.size();
  write_manifest(r, c, "diagnose", extra);
  return r;
}

CommandResult cmd_backtest(const RunConfig& c) {
  const ReturnPanel panel = standardize(load_input(c));
  const std::vector<CleaningScheme> schemes = expand_schemes(c.schemes, panel.n_assets());
  const BacktestConfig bc = c.backtest_config();
  const std::vector<BacktestReport> reports = run_backtest(panel, schemes, bc);
  fs::create_directories(c.out);
  CommandResult r;

  {
    Table t(r.artifacts.emplace_back(c.out / "backtest_report.csv"),
            {"scheme", "parameter", "mean_IS", "mean_OS", "n_windows", "regularized_windows"});
    for (const auto& rep : reports) {
      std::size_t reg = 0;
      for (const auto& w : rep.windows) reg += w.regularized ? 1 : 0;
      t.row({rep.scheme.name(), rep.scheme.parameter(), num(rep.mean_is), num(rep.mean_os),
             std::to_string(rep.windows.size()), std::to_string(reg)});
    }
  }
  {
    Table t(r.artifacts.emplace_back(c.out / "backtest_windows.csv"),
            {"scheme", "parameter", "tau", "R2_IS", "R2_OS", "budget", "regularized"});
    for (const auto& rep : reports)
      for (const auto& w : rep.windows)
        t.row({rep.scheme.name(), rep.scheme.parameter(), std::to_string(w.tau), num(w.in_sample),
               num(w.out_of_sample), num(w.budget), w.regularized ? "true" : "false"});
  }
  const Index T_is = bc.T_is > 0 ? bc.T_is : 2 * panel.n_assets();
  const double q = static_cast<double>(panel.n_assets()) / static_cast<double>(T_is);
  {
    // Parametric IS/OS curve: one line per scheme family, ordered by parameter.
    Table t(r.artifacts.emplace_back(c.out / "backtest_curve.csv"), {"scheme", "parameter", "R2_IS", "R2_OS"});
    for (const auto& rep : reports)
      t.row({rep.scheme.name(), rep.scheme.parameter(), num(rep.mean_is), num(rep.mean_os)});
    if (q < 1.0) {
      const RmtRisk rmt = rmt_benchmark(q);
      t.row({"rmt", num(q), num(rmt.in_sample), num(rmt.out_of_sample)});
    }
  }
  {
    std::map<std::pair<int, std::string>, double> os;
    for (const auto& rep : reports) os[{static_cast<int>(rep.scheme.kind), rep.scheme.parameter()}] = rep.mean_os;
    Table t(r.artifacts.emplace_back(c.out / "backtest_gains.csv"), {"measure", "M", "value"});
    using K = CleaningScheme::Kind;
    for (const auto& rep : reports) {
      const std::string m = rep.scheme.parameter();
      if (rep.scheme.kind == K::MultiFactorLinear) {
        const auto it = os.find({static_cast<int>(K::Clipped), m});
        if (it != os.end() && it->second != 1.0) t.row({"relative_gain", m, num(relative_gain(it->second, rep.mean_os))});
      }
      if (rep.scheme.kind == K::GaussianFactor) {
        const auto it = os.find({static_cast<int>(K::NestedFactor), m});
        if (it != os.end() && rep.mean_os != 1.0) t.row({"over_perf", m, num(over_perf(rep.mean_os, it->second))});
      }
    }
  }
  if (c.plots) {
    std::map<std::string, svg::Series> families;
    for (const auto& rep : reports) {
      auto& s = families[rep.scheme.name()];
      s.name = rep.scheme.name();
      s.x.push_back(rep.mean_is);
      s.y.push_back(rep.mean_os);
      s.markers = reports.size() < 3;
    }
    svg::Plot plot{"Out-of-sample vs in-sample risk", "R2 in-sample", "R2 out-of-sample", {}, false, false};
    for (auto& [name, s] : families) plot.series.push_back(std::move(s));
    svg::write_plot(r.plots.emplace_back(c.out / "backtest_curve.svg"), plot);
  }
  ordered_json extra;
  extra["track"] = to_string(c.track);
  extra["T_is"] = T_is;
  extra["T_os"] = c.T_os;
  extra["windows"] = reports.front().windows.size();
  extra["schemes"] = schemes.size();
  write_manifest(r, c, "backtest", extra);
  return r;
}

int exit_code(const std::exception& error) {
  if (const auto* e = dynamic_cast<const Error*>(&error)) return e->kind() == ErrorKind::Input ? 2 : 3;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&error)) return 2;
  return 3;
}

}  // namespace nfm
