#include "nfm/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nfm/csv.hpp"
#include "nfm/errors.hpp"
#include "nfm/linalg.hpp"
#include "nfm/parallel.hpp"

namespace nfm {

namespace {

using Kind = CleaningScheme::Kind;

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::Empirical: return "empirical";
    case Kind::LedoitWolf: return "lw";
    case Kind::Clipped: return "clipped";
    case Kind::MultiFactorLinear: return "mf";
    case Kind::GaussianFactor: return "gaussian";
    case Kind::NestedFactor: return "nested";
  }
  return "empirical";
}

std::vector<std::string> split_colon(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  return parts;
}

double parse_real(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in scheme '" + context + "'");
  }
}

Index parse_count(const std::string& s, const std::string& context) {
  const double v = parse_real(s, context);
  if (v != std::floor(v)) throw ConfigError("scheme '" + context + "' needs an integer parameter");
  return static_cast<Index>(v);
}

/// Columns with sum_k W_kj^2 > 1 are scaled back onto the unit sphere.
LinearFactorModel cap_unit_variance(LinearFactorModel model) {
  for (Index j = 0; j < model.weights.cols(); ++j) {
    const double n2 = model.weights.col(j).squaredNorm();
    if (n2 > 1.0) model.weights.col(j) /= std::sqrt(n2);
  }
  return model;
}

/// Mean and population std of each column; throws on constant columns.
void column_stats(const Matrix& x, Vector& mean, Vector& sd) {
  mean = x.colwise().mean();
  sd.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - mean(j)).square().mean();
    if (!(var > 1e-28 * std::max(1.0, mean(j) * mean(j))))
      throw DegenerateColumnError("column " + std::to_string(j) + " is constant over the window");
    sd(j) = std::sqrt(var);
  }
}

}  // namespace

CleaningScheme CleaningScheme::parse(const std::string& text) {
  const auto parts = split_colon(text);
  if (parts.empty()) throw ConfigError("empty scheme");
  const std::string& kind = parts[0];
  const auto need = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() < lo || parts.size() > hi) throw ConfigError("malformed scheme '" + text + "'");
  };
  if (kind == "empirical") {
    need(1, 1);
    return empirical();
  }
  if (kind == "lw") {
    need(2, 2);
    return ledoit_wolf(parse_real(parts[1], text));
  }
  if (kind == "clipped") {
    need(2, 2);
    return clipped(parse_count(parts[1], text));
  }
  if (kind == "mf") {
    need(2, 2);
    return multi_factor(parse_count(parts[1], text));
  }
  if (kind == "gaussian") {
    need(2, 2);
    return gaussian_factor(parse_count(parts[1], text));
  }
  if (kind == "nested") {
    need(2, 3);
    return nested_factor(parse_count(parts[1], text),
                         parts.size() == 3 ? static_cast<int>(parse_count(parts[2], text)) : 1);
  }
  throw ConfigError("unknown scheme '" + text + "'");
}

std::string CleaningScheme::name() const { return kind_name(kind); }

std::string CleaningScheme::parameter() const {
  switch (kind) {
    case Kind::Empirical: return "";
    case Kind::LedoitWolf: return csv::format_number(alpha);
    case Kind::NestedFactor:
      return n_modes == 1 ? std::to_string(n_factors) : std::to_string(n_factors) + ":" + std::to_string(n_modes);
    default: return std::to_string(n_factors);
  }
}

std::string CleaningScheme::label() const {
  const std::string p = parameter();
  return p.empty() ? name() : name() + ":" + p;
}

void CleaningScheme::validate(Index n_assets) const {
  switch (kind) {
    case Kind::Empirical: return;
    case Kind::LedoitWolf:
      if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("Ledoit-Wolf alpha must lie in [0, 1]");
      return;
    case Kind::NestedFactor:
      if (n_modes != 1 && n_modes != 2) throw ConfigError("nested scheme needs 1 or 2 volatility modes");
      [[fallthrough]];
    default:
      if (n_factors < 1 || n_factors > n_assets)
        throw ConfigError("scheme " + label() + ": M must lie in [1, " + std::to_string(n_assets) + "]");
  }
}

std::vector<Index> default_factor_grid(Index n_assets) {
  std::vector<Index> grid;
  for (const Index m : {1, 2, 3, 5, 8, 12, 16, 24}) grid.push_back(m);
  for (Index m = 32; m < n_assets; m *= 2) {
    grid.push_back(m);
    grid.push_back(m + m / 2);
  }
  std::erase_if(grid, [&](Index m) { return m >= n_assets; });
  grid.push_back(n_assets);
  return grid;
}

std::vector<CleaningScheme> expand_schemes(const std::vector<std::string>& specs, Index n_assets) {
  std::vector<CleaningScheme> out;
  for (const auto& spec : specs) {
    if (spec == "lw") {
      for (int i = 0; i <= 20; ++i) out.push_back(CleaningScheme::ledoit_wolf(i == 20 ? 1.0 : 0.05 * i));
    } else if (spec == "clipped" || spec == "mf" || spec == "gaussian" || spec == "nested") {
      for (const Index m : default_factor_grid(n_assets)) out.push_back(CleaningScheme::parse(spec + ":" + std::to_string(m)));
    } else {
      out.push_back(CleaningScheme::parse(spec));
    }
  }
  for (const auto& s : out) s.validate(n_assets);
  return out;
}

std::vector<Index> sliding_windows(Index T, Index T_is, Index T_os) {
  if (T_is < 2 || T_os < 1) throw ConfigError("window sizes must satisfy T_is >= 2 and T_os >= 1");
  if (T_is + T_os > T)
    throw ConfigError("panel of " + std::to_string(T) + " dates holds no complete window (T_is = " +
                      std::to_string(T_is) + ", T_os = " + std::to_string(T_os) + ")");
  std::vector<Index> taus;
  for (Index tau = T_is + 1; tau + T_os - 1 <= T; tau += T_os) taus.push_back(tau);
  return taus;
}

Matrix empirical_correlation(const Matrix& window) {
  Matrix c = sample_correlation(window);
  c.diagonal().setOnes();
  return c;
}

Matrix clean_correlation(const Matrix& window, const CleaningScheme& scheme, const CleaningContext& context) {
  const Index N = window.cols();
  scheme.validate(N);
  switch (scheme.kind) {
    case Kind::Empirical:
      return empirical_correlation(window);
    case Kind::LedoitWolf: {
      const Matrix emp = empirical_correlation(window);
      const double off_mean = N > 1 ? (emp.sum() - emp.trace()) / static_cast<double>(N * (N - 1)) : 0.0;
      Matrix target = Matrix::Constant(N, N, off_mean);
      target.diagonal().setOnes();
      Matrix out = scheme.alpha * emp + (1.0 - scheme.alpha) * target;
      out.diagonal().setOnes();
      return out;
    }
    case Kind::Clipped: {
      const Matrix emp = empirical_correlation(window);
      const Index M = scheme.n_factors;
      if (M == N) return emp;
      const EigenPairs eig = sorted_eigen(emp);
      const double kept = eig.values.head(M).sum();
      const double flat = (static_cast<double>(N) - kept) / static_cast<double>(N - M);
      Matrix out = flat * Matrix::Identity(N, N);
      for (Index k = 0; k < M; ++k)
        out += (eig.values(k) - flat) * eig.vectors.col(k) * eig.vectors.col(k).transpose();
      symmetrize_from_upper(out);
      return out;
    }
    case Kind::MultiFactorLinear: {
      LinearCalibrationOptions opts = context.nested.linear;
      if (context.warm_start) opts.warm_start = *context.warm_start;
      return model_correlation(calibrate_weights(empirical_correlation(window), scheme.n_factors, opts).model);
    }
    case Kind::GaussianFactor:
    case Kind::NestedFactor: {
      if (!context.raw_returns)
        throw ConfigError("scheme " + scheme.label() + " models absolute returns and needs the absolute track");
      const Matrix& raw = *context.raw_returns;
      GeneratorSpec spec;
      spec.seed = context.seed;
      spec.T_sim = context.n_sim;
      if (scheme.kind == Kind::GaussianFactor) {
        spec.linear = calibrate_weights(sample_correlation(raw), scheme.n_factors, context.nested.linear).model;
        spec.vol = VolModel::zeros(scheme.n_factors, N, 1);
      } else {
        NestedCalibrationOptions opts = context.nested;
        opts.n_factors = scheme.n_factors;
        opts.n_modes = scheme.n_modes;
        opts.reconstruct_omega = false;
        NestedCalibration cal = calibrate_nested(raw, opts);
        spec.linear = cal.linear.model;
        spec.vol = cal.vol();
      }
      spec.linear = cap_unit_variance(std::move(spec.linear));
      SimulationOptions sim;
      sim.threads = context.threads;
      sim.policy = context.policy;
      return model_implied_abs_corr(spec, context.n_sim, sim);
    }
  }
  return empirical_correlation(window);
}

PortfolioWeights optimal_weights(const Matrix& corr, const Vector& g) {
  const Index N = corr.rows();
  if (corr.cols() != N || g.size() != N) throw DimensionError("optimal_weights: dimension mismatch");
  PortfolioWeights out;
  Matrix c = corr;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(c, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    c.diagonal().array() += 1e-8;
    out.regularized = true;
  }
  const Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success)
    throw SingularMatrixError("correlation matrix is not positive definite even after regularization");
  const Vector x = llt.solve(g);
  const double denom = g.dot(x);
  if (!(std::abs(denom) > 0.0) || !x.allFinite())
    throw SingularMatrixError("portfolio normalization g^T C^-1 g vanishes");
  out.weights = x / denom;
  return out;
}

Vector omniscient_predictor(const Vector& row) {
  const double rms = std::sqrt(row.squaredNorm() / static_cast<double>(row.size()));
  if (!(rms > 0.0) || !std::isfinite(rms)) throw ZeroRowError("predictor row is identically zero");
  return row / rms;
}

double risk(const Vector& weights, const Matrix& eval_panel, const Vector& sigma_is) {
  const Index N = weights.size();
  if (eval_panel.cols() != N || sigma_is.size() != N)
    throw DimensionError("risk: weights, panel and volatilities disagree in dimension");
  if (eval_panel.rows() < 1) throw DimensionError("risk: empty evaluation window");
  if ((sigma_is.array() <= 0.0).any()) throw DomainError("risk: in-sample volatilities must be positive");
  const Vector scaled = weights.cwiseQuotient(sigma_is);
  const Vector pnl = eval_panel * scaled;
  return static_cast<double>(N) * pnl.squaredNorm() / static_cast<double>(eval_panel.rows());
}

Matrix abs_return_transform(const Matrix& returns) { return standardize_columns(returns.cwiseAbs()); }

Matrix abs_return_transform(const ReturnPanel& panel) { return abs_return_transform(panel.returns); }

RmtRisk rmt_benchmark(double q) {
  if (!(q >= 0.0 && q < 1.0)) throw DomainError("quality factor q must lie in [0, 1)");
  return {1.0 - q, 1.0 / (1.0 - q)};
}

double relative_gain(double r_clip, double r_mf) {
  if (r_clip == 1.0) throw DivisionByZeroError("relative_gain: reference risk equals the true risk");
  return (r_clip - r_mf) / (r_clip - 1.0);
}

double over_perf(double r_fng, double r_fg) {
  if (r_fng == 1.0) throw DivisionByZeroError("over_perf: reference risk equals the true risk");
  return (r_fng - r_fg) / (r_fng - 1.0);
}

Track parse_track(const std::string& name) {
  if (name == "linear") return Track::Linear;
  if (name == "absolute") return Track::Absolute;
  throw ConfigError("unknown track '" + name + "' (linear, absolute)");
}

std::string to_string(Track track) { return track == Track::Linear ? "linear" : "absolute"; }

std::vector<BacktestReport> run_backtest(const ReturnPanel& panel, const std::vector<CleaningScheme>& schemes,
                                         const BacktestConfig& config) {
  const Index T = panel.n_dates();
  const Index N = panel.n_assets();
  if (schemes.empty()) throw ConfigError("no cleaning scheme requested");
  for (const auto& s : schemes) s.validate(N);
  const Index T_is = config.T_is > 0 ? config.T_is : 2 * N;
  const Index T_os = config.T_os;
  std::vector<Index> taus = sliding_windows(T, T_is, T_os);
  std::erase_if(taus, [&](Index tau) { return tau >= T; });  // no out-of-sample date left
  if (taus.empty()) throw ConfigError("no window leaves an out-of-sample date");

  const Matrix& R = panel.returns;
  const Matrix Y = config.track == Track::Linear ? R : Matrix(R.cwiseAbs());
  const std::size_t W = taus.size();
  const std::size_t S = schemes.size();
  std::vector<WindowRisk> cells(W * S);

  const auto run_window = [&](std::size_t w, std::vector<std::optional<LinearFactorModel>>* warm) {
    const Index tau = taus[w];
    const Index is_begin = tau - T_is - 1;  // 0-based first in-sample row
    const Index os_begin = tau;             // 0-based row of date tau + 1
    const Index os_count = std::min(T_os, T - tau);
    const Matrix y_is = Y.middleRows(is_begin, T_is);
    Vector mu, sd;
    column_stats(y_is, mu, sd);
    const Matrix centered_is = y_is.rowwise() - mu.transpose();
    const Matrix centered_os = Y.middleRows(os_begin, os_count).rowwise() - mu.transpose();
    const Matrix z_is = centered_is * sd.cwiseInverse().asDiagonal();
    const Vector g = omniscient_predictor(((Y.row(tau - 1) - mu.transpose()).cwiseQuotient(sd.transpose())).transpose());

    Matrix raw;
    CleaningContext ctx;
    ctx.nested = config.nested;
    ctx.n_sim = config.n_sim;
    ctx.seed = derive_seed(config.seed, static_cast<std::uint64_t>(tau));
    ctx.threads = warm ? config.threads : 1;
    ctx.policy = config.policy;
    if (config.track == Track::Absolute) {
      raw = standardize_columns(R.middleRows(is_begin, T_is));
      ctx.raw_returns = &raw;
    }
    for (std::size_t s = 0; s < S; ++s) {
      const CleaningScheme& scheme = schemes[s];
      Matrix corr;
      if (warm && scheme.kind == Kind::MultiFactorLinear) {
        LinearCalibrationOptions opts = config.nested.linear;
        if ((*warm)[s]) opts.warm_start = *(*warm)[s];
        (*warm)[s] = calibrate_weights(empirical_correlation(z_is), scheme.n_factors, opts).model;
        corr = model_correlation(*(*warm)[s]);
      } else {
        corr = clean_correlation(z_is, scheme, ctx);
      }
      const PortfolioWeights pw = optimal_weights(corr, g);
      WindowRisk& cell = cells[w * S + s];
      cell.tau = tau;
      cell.in_sample = risk(pw.weights, centered_is, sd);
      cell.out_of_sample = risk(pw.weights, centered_os, sd);
      cell.budget = g.dot(pw.weights);
      cell.regularized = pw.regularized;
    }
  };

  if (config.warm_start) {
    std::vector<std::optional<LinearFactorModel>> warm(S);
    for (std::size_t w = 0; w < W; ++w) run_window(w, &warm);
  } else {
    parallel_for(W, config.threads, [&](std::size_t w) { run_window(w, nullptr); });
  }

  std::vector<BacktestReport> reports(S);
  for (std::size_t s = 0; s < S; ++s) {
    BacktestReport& rep = reports[s];
    rep.scheme = schemes[s];
    for (std::size_t w = 0; w < W; ++w) {
      rep.windows.push_back(cells[w * S + s]);
      rep.mean_is += cells[w * S + s].in_sample;
      rep.mean_os += cells[w * S + s].out_of_sample;
    }
    rep.mean_is /= static_cast<double>(W);
    rep.mean_os /= static_cast<double>(W);
  }
  return reports;
}

}  // namespace nfm
