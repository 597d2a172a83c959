#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nfm/backtest.hpp"
#include "nfm/commands.hpp"
#include "nfm/config.hpp"
#include "nfm/diagnostics.hpp"
#include "nfm/errors.hpp"
#include "nfm/pipeline.hpp"
#include "nfm/simengine.hpp"

namespace py = pybind11;
using namespace nfm;

namespace {

GeneratorSpec make_spec(const LinearFactorModel& linear, const VolModel& vol, Index T, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.linear = linear;
  spec.vol = vol;
  spec.T_sim = T;
  spec.seed = seed;
  return spec;
}

InfeasiblePolicy policy_from(const std::string& name) {
  if (name == "fallback") return InfeasiblePolicy::Fallback;
  if (name == "project") return InfeasiblePolicy::Project;
  throw ConfigError("policy must be 'fallback' or 'project'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nested factor model core";
  m.attr("__version__") = NFM_VERSION;

  static py::exception<Error> base(m, "NfmError", PyExc_RuntimeError);
  static py::exception<Error> input(m, "InputError", base.ptr());
  static py::exception<Error> numerical(m, "NumericalError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      (e.kind() == ErrorKind::Input ? input : numerical)(e.what());
    }
  });

  py::class_<LinearFactorModel>(m, "LinearFactorModel")
      .def(py::init([](Matrix w) { return LinearFactorModel{std::move(w)}; }), py::arg("weights"))
      .def_readwrite("weights", &LinearFactorModel::weights)
      .def("residual_variances", &LinearFactorModel::residual_variances)
      .def("correlation", [](const LinearFactorModel& l) { return model_correlation(l); });

  py::class_<VolModel>(m, "VolModel")
      .def(py::init([](Index n_factors, Index n_assets, int n_modes) { return VolModel::zeros(n_factors, n_assets, n_modes); }),
           py::arg("n_factors"), py::arg("n_assets"), py::arg("n_modes") = 1)
      .def_readwrite("n_modes", &VolModel::n_modes)
      .def_readwrite("A", &VolModel::A)
      .def_readwrite("B", &VolModel::B)
      .def_readwrite("s", &VolModel::s)
      .def_readwrite("s_tilde", &VolModel::s_tilde)
      .def_readwrite("zeta0", &VolModel::zeta0)
      .def_readwrite("kappa0", &VolModel::kappa0)
      .def("validate", &VolModel::validate);

  py::class_<NestedCalibration>(m, "Calibration")
      .def_property_readonly("linear", [](const NestedCalibration& c) { return c.linear.model; })
      .def_property_readonly("vol", [](const NestedCalibration& c) { return c.vol(); })
      .def_property_readonly("factors", [](const NestedCalibration& c) { return c.series.factors; })
      .def_property_readonly("residuals", [](const NestedCalibration& c) { return c.series.residuals; })
      .def_property_readonly("linear_loss", [](const NestedCalibration& c) { return c.linear.loss; })
      .def_property_readonly("factor_loss", [](const NestedCalibration& c) { return c.factor_step.loss; })
      .def_property_readonly("residual_loss", [](const NestedCalibration& c) { return c.residual_step.loss; })
      .def_property_readonly("p_grid", [](const NestedCalibration& c) { return c.nlcorr.p_grid; })
      .def_property_readonly("cff", [](const NestedCalibration& c) { return c.nlcorr.cff; })
      .def_property_readonly("omega0", [](const NestedCalibration& c) -> std::optional<Vector> {
        if (!c.omega) return std::nullopt;
        return c.omega->canonical().omega0;
      });

  m.def(
      "calibrate",
      [](const Matrix& returns, Index n_factors, int n_modes, double p_star, const std::string& residual_fit) {
        NestedCalibrationOptions o;
        o.n_factors = n_factors;
        o.n_modes = n_modes;
        o.p_star = p_star;
        o.residual_fit = parse_residual_fit(residual_fit);
        py::gil_scoped_release release;
        return calibrate_nested(standardize_columns(returns), o);
      },
      py::arg("returns"), py::arg("n_factors"), py::arg("n_modes") = 1, py::arg("p_star") = 2.0,
      py::arg("residual_fit") = "joint",
      "Full calibration chain on a T x N return matrix (columns are standardized first).");

  m.def(
      "simulate",
      [](const LinearFactorModel& linear, const VolModel& vol, Index T, std::uint64_t seed, int threads,
         const std::string& policy) {
        SimulationOptions o;
        o.threads = threads;
        o.policy = policy_from(policy);
        const GeneratorSpec spec = make_spec(linear, vol, T, seed);
        py::gil_scoped_release release;
        return simulate_full(spec, o).returns;
      },
      py::arg("linear"), py::arg("vol"), py::arg("T"), py::arg("seed") = 0, py::arg("threads") = 1,
      py::arg("policy") = "fallback", "T x N simulated returns; identical for any thread count.");

  m.def("gamma_p", &gamma_p, py::arg("p"));
  m.def("phi0", &phi0, py::arg("a"), py::arg("b"), py::arg("p"), py::arg("zeta0"), py::arg("kappa0"));
  m.def("log_abs_correlation", &log_abs_correlation, py::arg("x"), py::arg("y"), py::arg("p"));
  m.def(
      "match_beta",
      [](double zeta, double kappa) {
        const BetaParams b = match_beta(zeta, kappa);
        return py::make_tuple(b.alpha, b.beta);
      },
      py::arg("zeta"), py::arg("kappa"), "Beta shapes (alpha, beta) with the given skewness and excess kurtosis.");

  m.def("empirical_copula_point", &empirical_copula_point, py::arg("x"), py::arg("y"), py::arg("u"), py::arg("v"));
  m.def("rho_blomqvist", &rho_blomqvist, py::arg("medial"));
  m.def("elliptical_medial", &elliptical_medial, py::arg("rho"));
  m.def(
      "copula_pairs",
      [](const Matrix& returns, int threads) {
        CopulaOptions o;
        o.threads = threads;
        CopulaDiagnostics d;
        {
          py::gil_scoped_release release;
          d = copula_diagnostics(returns, o);
        }
        py::dict out;
        out["pairs"] = d.pairs;
        out["medial"] = d.medial;
        out["rho_b"] = d.rho_b;
        out["rho_lin"] = d.rho_lin;
        return out;
      },
      py::arg("returns"), py::arg("threads") = 1, "Medial point, Blomqvist and linear correlation for every pair i < j.");

  m.def(
      "backtest",
      [](const Matrix& returns, const std::vector<std::string>& schemes, Index T_is, Index T_os,
         const std::string& track, std::uint64_t seed, int threads) {
        BacktestConfig cfg;
        cfg.T_is = T_is;
        cfg.T_os = T_os;
        cfg.track = parse_track(track);
        cfg.seed = seed;
        cfg.threads = threads;
        const ReturnPanel panel = standardize(ReturnPanel::from_matrix(returns));
        const std::vector<CleaningScheme> parsed = expand_schemes(schemes, panel.n_assets());
        std::vector<BacktestReport> reports;
        {
          py::gil_scoped_release release;
          reports = run_backtest(panel, parsed, cfg);
        }
        py::list out;
        for (const BacktestReport& r : reports) {
          py::dict d;
          d["scheme"] = r.scheme.label();
          d["mean_is"] = r.mean_is;
          d["mean_os"] = r.mean_os;
          d["windows"] = r.windows.size();
          out.append(d);
        }
        return out;
      },
      py::arg("returns"), py::arg("schemes"), py::arg("T_is") = 0, py::arg("T_os") = 59, py::arg("track") = "linear",
      py::arg("seed") = 0, py::arg("threads") = 1, "Mean in- and out-of-sample risk per cleaning scheme.");

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_path, const std::string& out) {
        RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (!out.empty()) c.out = out;
        c.plots = false;
        CommandResult r;
        {
          py::gil_scoped_release release;
          if (command == "calibrate") r = cmd_calibrate(c);
          else if (command == "simulate") r = cmd_simulate(c);
          else if (command == "diagnose") r = cmd_diagnose(c);
          else if (command == "backtest") r = cmd_backtest(c);
          else throw ConfigError("unknown command '" + command + "'");
        }
        std::vector<std::string> paths;
        for (const auto& a : r.artifacts) paths.push_back(a.string());
        return paths;
      },
      py::arg("command"), py::arg("config") = "", py::arg("out") = "",
      "Runs one command-line subcommand in-process and returns the artifact paths.");
}
