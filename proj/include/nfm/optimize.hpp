#pragma once

#include <functional>

#include "nfm/types.hpp"

namespace nfm {

/// Objective callback: returns f(x) and writes the gradient into grad.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsOptions {
  int max_iterations = 2000;
  int history = 10;
  /// Stop when (f_prev - f) / max(|f_prev|, |f|, 1) <= rel_tolerance.
  double rel_tolerance = 1e-10;
  /// Stop when the infinity norm of the gradient drops below this.
  double grad_tolerance = 1e-12;
  int max_line_search = 40;
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with a strong-Wolfe line search. Always returns the best
/// iterate seen; `converged` is false when the iteration budget ran out or the
/// line search could not make progress before a tolerance was met.
LbfgsResult minimize_lbfgs(const Objective& objective, Vector x0, const LbfgsOptions& options = {});

}  // namespace nfm
