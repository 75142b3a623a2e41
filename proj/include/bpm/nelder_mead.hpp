#pragma once

#include <functional>
#include <span>
#include <vector>

namespace bpm {

using Objective = std::function<double(std::span<const double>)>;

struct NelderMeadOptions {
  /// Per-coordinate offsets of the initial simplex vertices from x0. A single
  /// entry is broadcast to every coordinate.
  std::vector<double> initial_step{0.05};
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  /// Stop once max f - min f over the simplex falls below this.
  double f_tolerance = 1e-4;
  /// 0 means 200 * dimension.
  int max_iterations = 0;
  /// 0 means unlimited.
  long max_evaluations = 0;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  long evaluations = 0;
  int iterations = 0;
  bool converged = false;
};

/// Minimise `objective` from `x0` with the standard simplex moves
/// (reflect / expand / contract / shrink). Throws kNonFiniteObjective if the
/// objective returns NaN or +-inf, kInvalidArgument on an empty x0.
NelderMeadResult nelder_mead(const Objective& objective, std::span<const double> x0,
                             const NelderMeadOptions& options = {});

}  // namespace bpm
