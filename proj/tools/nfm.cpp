#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nfm/commands.hpp"
#include "nfm/errors.hpp"

namespace {

void report(const nfm::CommandResult& result) {
  for (const auto& a : result.artifacts) std::cout << "wrote " << a.string() << '\n';
  for (const auto& p : result.plots) std::cout << "wrote " << p.string() << '\n';
  std::cout << "manifest " << result.manifest.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested factor model: calibration, simulation, diagnostics and risk backtests"};
  app.set_version_flag("--version", std::string(nfm::version()));
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string seed_text;
  int threads = 0;
  std::string out_dir;
  bool print_config = false;
  bool no_plots = false;
  app.add_option("--config", config_path, "INI-style run configuration");
  app.add_option("--seed", seed_text, "master seed (unsigned 64-bit)");
  app.add_option("--threads", threads, "worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--print-config", print_config, "print the effective configuration and exit");
  app.add_flag("--no-plots", no_plots, "skip SVG output");

  auto* calibrate = app.add_subcommand("calibrate", "calibrate linear and volatility structure on a panel");
  auto* simulate = app.add_subcommand("simulate", "simulate a calibrated model");
  auto* diagnose = app.add_subcommand("diagnose", "copula and quadratic-correlation diagnostics");
  auto* backtest = app.add_subcommand("backtest", "in-sample / out-of-sample risk of cleaning schemes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    nfm::RunConfig config = config_path.empty() ? nfm::RunConfig{} : nfm::load_config(config_path);
    if (!seed_text.empty()) config.seed = nfm::parse_seed(seed_text);
    if (threads > 0) config.threads = threads;
    if (!out_dir.empty()) config.out = out_dir;
    if (no_plots) config.plots = false;

    if (print_config) {
      std::cout << nfm::render_config(config);
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << "error: a subcommand is required (calibrate, simulate, diagnose, backtest)\n";
      return 2;
    }
    if (calibrate->parsed()) report(nfm::cmd_calibrate(config));
    else if (simulate->parsed()) report(nfm::cmd_simulate(config));
    else if (diagnose->parsed()) report(nfm::cmd_diagnose(config));
    else if (backtest->parsed()) report(nfm::cmd_backtest(config));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return nfm::exit_code(e);
  }
}
