#include "dsch/gradcheck.hpp"

#include <cmath>
#include <vector>

namespace dsch {

namespace {

double evaluate(const TapedFunction& f, const std::vector<Matrix>& params) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const Matrix& p : params) leaves.push_back(tape.parameter_ref(p));
  return f(tape, leaves).scalar();
}

}  // namespace

GradCheckResult finite_diff_check(const TapedFunction& f, std::span<const Matrix> params, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_check: step must be positive");
  std::vector<Matrix> work(params.begin(), params.end());

  std::vector<Matrix> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const Matrix& p : work) leaves.push_back(tape.parameter_ref(p));
    const ad::Var out = f(tape, leaves);
    analytic = tape.backward(out).all();
  }

  GradCheckResult result;
  result.evaluations = 1;
  for (std::size_t block = 0; block < work.size(); ++block) {
    Matrix& p = work[block];
    for (Index e = 0; e < p.size(); ++e) {
      const double saved = p.data()[e];
      p.data()[e] = saved + h;
      const double up = evaluate(f, work);
      p.data()[e] = saved - h;
      const double down = evaluate(f, work);
      p.data()[e] = saved;
      result.evaluations += 2;

      const double central = (up - down) / (2.0 * h);
      const double a = analytic[block].data()[e];
      const double err = std::abs(a - central) / std::max(1.0, std::abs(central));
      if (!(err <= result.max_rel_error)) {
        result.max_rel_error = err;
        result.worst_block = block;
        result.worst_entry = e;
        result.analytic = a;
        result.numeric = central;
      }
    }
  }
  return result;
}

double finite_diff_check(const std::function<ad::Var(ad::Tape&, const ad::Var&)>& f, const Matrix& theta,
                         double h) {
  const TapedFunction wrapped = [&f](ad::Tape& tape, std::span<const ad::Var> leaves) {
    return f(tape, leaves[0]);
  };
  return finite_diff_check(wrapped, std::span<const Matrix>(&theta, 1), h).max_rel_error;
}

}  // namespace dsch
