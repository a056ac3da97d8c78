#include "metsfuse/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace metsfuse::num {

GradCheckReport grad_check(ParameterSet& params, const LossBuilder& build, double h, double floor) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
  }
  auto evaluate = [&]() {
    Tape tape;
    return build(tape).value().item();
  };
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.requires_grad) continue;
    ParamGradError err{p.name, 0.0, 0.0};
    auto& w = p.value.storage();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double original = w[k];
      w[k] = original + h;
      const double plus = evaluate();
      w[k] = original - h;
      const double minus = evaluate();
      w[k] = original;
      const double numeric = (plus - minus) / (2.0 * h);
      const double analytic = p.grad[k];
      const double abs_err = std::abs(analytic - numeric);
      const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), floor});
      err.max_absolute_error = std::max(err.max_absolute_error, abs_err);
      err.max_relative_error = std::max(err.max_relative_error, rel);
    }
    report.max_relative_error = std::max(report.max_relative_error, err.max_relative_error);
    report.params.push_back(std::move(err));
  }
  return report;
}

}  // namespace metsfuse::num
