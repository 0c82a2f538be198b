#pragma once

#include <functional>
#include <span>
#include <vector>

#include "yieldnet/autodiff.hpp"

namespace yieldnet::ad {

/// Builds a scalar from leaf variables recorded on the given tape.
using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients of `f` against central differences at
/// `points`. Relative error per coordinate is
/// |analytic - numeric| / max(1, |analytic|). Throws NumericalError when an
/// evaluation is not finite.
GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& points,
                           double eps = 1e-5, GradMode mode = GradMode::standard);

/// Single-input convenience form.
double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point,
                  double eps = 1e-5);

}  // namespace yieldnet::ad
