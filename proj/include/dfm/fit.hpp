#pragma once

#include <functional>
#include <span>
#include <vector>

namespace dfm {

struct FitBounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct FitOptions {
  double diameter_tol = 1e-10;
  int max_evaluations = 10000;
};

struct FitResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  int iterations = 0;
  bool hit_max_evaluations = false;  // best-so-far returned
  bool at_bound = false;             // some coordinate sits on a bound
};

using Objective = std::function<double(std::span<const double>)>;

/// Bounded Nelder-Mead simplex descent. Vertices are projected onto the box.
/// Stops when every vertex lies within `diameter_tol` (max-norm) of the best
/// one, or after `max_evaluations` objective calls. The returned value never
/// exceeds objective(initial).
FitResult fit_nonlinear(const Objective& objective, std::vector<double> initial, const FitBounds& bounds,
                        const FitOptions& options = {});

}  // namespace dfm
