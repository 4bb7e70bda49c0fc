#pragma once
// Limited-memory quasi-Newton minimizer with Armijo backtracking.

#include <functional>
#include <span>
#include <vector>

#include "deform/errors.hpp"

namespace deform {

struct OptimizeOptions {
  double tol = 1e-8;
  int max_iters = 20000;
  int memory = 8;
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 60;
};

struct ObjectiveValue {
  double f = 0.0;
  /// Convergence measure; stop when it drops to tol.
  double norm = 0.0;
};

/// Evaluates f and its gradient at x. May throw SingularError or
/// EmbeddingError, which make a trial step count as rejected.
using Objective = std::function<ObjectiveValue(std::span<const double> x, std::span<double> grad)>;

struct OptimizeResult {
  std::vector<double> x;
  double f = 0.0;
  double norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
};

/// Does not throw on non-convergence; callers decide (see `converged`).
OptimizeResult minimize(const Objective& objective, std::vector<double> x0, const OptimizeOptions& opt);

}  // namespace deform
