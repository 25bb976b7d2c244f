#pragma once

#include <functional>
#include <span>

#include "dsch/tape.hpp"

namespace dsch {

/// A scalar function recorded on a tape, given one leaf per parameter block.
using TapedFunction = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_block = 0;
  Index worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t evaluations = 0;
};

/// Compares the taped gradient of `f` against central differences with step
/// `h`, entry by entry over every parameter block. The error of an entry is
/// |analytic - central| / max(1, |central|).
GradCheckResult finite_diff_check(const TapedFunction& f, std::span<const Matrix> params, double h = 1e-5);

/// Single-block convenience overload; returns the max relative error.
double finite_diff_check(const std::function<ad::Var(ad::Tape&, const ad::Var&)>& f, const Matrix& theta,
                         double h = 1e-5);

}  // namespace dsch
