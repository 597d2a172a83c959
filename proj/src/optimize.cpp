#include "nfm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace nfm {

namespace {

struct Probe {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative
  Vector x;
  Vector grad;
};

/// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), safeguarded
/// into the interior of [a, b].
double interpolate(const Probe& a, const Probe& b) {
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.slope * b.slope;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double cand =
        b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    if (std::isfinite(cand)) t = cand;
  }
  const double margin = 0.1 * (hi - lo);
  if (t < lo + margin || t > hi - margin) t = 0.5 * (lo + hi);
  return t;
}

class LineSearch {
 public:
  LineSearch(const Objective& f, const Vector& x, double fx, const Vector& dir, double slope0,
             int budget)
      : f_(f), x_(x), fx_(fx), dir_(dir), slope0_(slope0), budget_(budget) {}

  /// Returns true when a strong-Wolfe point was found. `best` always holds the
  /// lowest-valued probe evaluated.
  bool run(double alpha0, Probe& best) {
    best.value = std::numeric_limits<double>::infinity();
    Probe prev{0.0, fx_, slope0_, x_, Vector()};
    double alpha = alpha0;
    for (int i = 0; i < budget_; ++i) {
      Probe cur = eval(alpha, best);
      if (!std::isfinite(cur.value) || cur.value > fx_ + c1 * alpha * slope0_ ||
          (i > 0 && cur.value >= prev.value))
        return zoom(prev, cur, best);
      if (std::abs(cur.slope) <= -c2 * slope0_) return true;
      if (cur.slope >= 0.0) return zoom(cur, prev, best);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return best.value < fx_;
  }

 private:
  static constexpr double c1 = 1e-4;
  static constexpr double c2 = 0.9;

  Probe eval(double alpha, Probe& best) {
    --budget_;
    Probe p;
    p.alpha = alpha;
    p.x = x_ + alpha * dir_;
    p.grad.resize(x_.size());
    p.value = f_(p.x, p.grad);
    p.slope = p.grad.dot(dir_);
    if (std::isfinite(p.value) && p.value < best.value) best = p;
    return p;
  }

  bool zoom(Probe lo, Probe hi, Probe& best) {
    while (budget_ > 0) {
      if (!std::isfinite(hi.value)) {
        hi.value = lo.value + 1e300;
        hi.slope = 0.0;
      }
      const double alpha = interpolate(lo, hi);
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
      Probe cur = eval(alpha, best);
      if (!std::isfinite(cur.value) || cur.value > fx_ + c1 * alpha * slope0_ ||
          cur.value >= lo.value) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -c2 * slope0_) return true;
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    return best.value < fx_;
  }

  const Objective& f_;
  const Vector& x_;
  double fx_;
  const Vector& dir_;
  double slope0_;
  int budget_;
};

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Vector x0, const LbfgsOptions& options) {
  const Index n = x0.size();
  LbfgsResult result;
  Vector grad(n);
  double fx = objective(x0, grad);
  result.x = x0;
  result.value = fx;
  if (n == 0 || grad.lpNorm<Eigen::Infinity>() <= options.grad_tolerance) {
    result.converged = true;
    return result;
  }

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector x = std::move(x0);
  Vector dir(n);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // Two-loop recursion for dir = -H grad.
    dir = -grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    const double alpha0 = s_hist.empty() ? std::min(1.0, 1.0 / grad.lpNorm<Eigen::Infinity>()) : 1.0;

    Probe best;
    LineSearch ls(objective, x, fx, dir, slope, options.max_line_search);
    ls.run(alpha0, best);
    result.iterations = iter + 1;
    if (!std::isfinite(best.value) || best.value >= fx) {
      // No descent possible along this direction: restart once from steepest descent.
      if (!s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      result.converged = grad.lpNorm<Eigen::Infinity>() <= std::sqrt(options.grad_tolerance);
      break;
    }

    Vector s = best.x - x;
    Vector y = best.grad - grad;
    const double sy = s.dot(y);
    const double fprev = fx;
    x = std::move(best.x);
    grad = std::move(best.grad);
    fx = best.value;
    result.x = x;
    result.value = fx;

    if (sy > 1e-12 * std::sqrt(s.squaredNorm() * y.squaredNorm())) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double scale = std::max({std::abs(fprev), std::abs(fx), 1.0});
    if ((fprev - fx) / scale <= options.rel_tolerance ||
        grad.lpNorm<Eigen::Infinity>() <= options.grad_tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace nfm
