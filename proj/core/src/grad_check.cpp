#include "yieldnet/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "yieldnet/error.hpp"

namespace yieldnet::ad {
namespace {

double evaluate(const ScalarFunction& f, const std::vector<Tensor>& points, GradMode mode) {
  Tape tape(mode);
  std::vector<Var> leaves;
  leaves.reserve(points.size());
  for (const Tensor& p : points) leaves.push_back(tape.input(p));
  Var out = f(tape, leaves);
  require(out.size() == 1, "grad_check function must return a scalar");
  const double value = out.item();
  if (!std::isfinite(value)) throw NumericalError("grad_check: function evaluated to a non-finite value");
  return value;
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& points, double eps,
                           GradMode mode) {
  require(eps > 0.0, "grad_check step must be positive");

  Tape tape(mode);
  std::vector<Var> leaves;
  for (const Tensor& p : points) leaves.push_back(tape.input(p));
  Var out = f(tape, leaves);
  require(out.size() == 1, "grad_check function must return a scalar");
  if (!std::isfinite(out.item())) throw NumericalError("grad_check: function evaluated to a non-finite value");
  tape.backward(out);

  GradCheckResult result;
  std::vector<Tensor> probe = points;
  for (std::size_t p = 0; p < points.size(); ++p) {
    auto analytic = tape.grad(leaves[p]);
    for (std::size_t i = 0; i < points[p].size(); ++i) {
      const double original = points[p][i];
      probe[p][i] = original + eps;
      const double up = evaluate(f, probe, mode);
      probe[p][i] = original - eps;
      const double down = evaluate(f, probe, mode);
      probe[p][i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      if (!std::isfinite(analytic[i])) throw NumericalError("grad_check: non-finite analytic gradient");
      const double error = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      if (error > result.max_relative_error) {
        result.max_relative_error = error;
        result.worst_input = p;
        result.worst_index = i;
      }
    }
  }
  return result;
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point, double eps) {
  ScalarFunction wrapped = [&f](Tape& tape, std::span<const Var> leaves) { return f(tape, leaves[0]); };
  return grad_check(wrapped, std::vector<Tensor>{point}, eps).max_relative_error;
}

}  // namespace yieldnet::ad
