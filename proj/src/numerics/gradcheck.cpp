#include "cmp/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cmp/common/error.hpp"

namespace cmp::num {
namespace {

double evaluate(const std::function<Tensor<double>()>& loss) {
  const double v = loss().item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckReport gradient_check(const std::function<Tensor<double>()>& loss, std::vector<Tensor<double>> params,
                               const GradCheckOptions& options) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  const Tensor<double> root = loss();
  if (!std::isfinite(root.item())) throw NumericError("gradient_check: non-finite loss");
  root.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_data();
    std::size_t stride = 1;
    if (options.max_elements_per_param > 0 && values.size() > options.max_elements_per_param) {
      stride = (values.size() + options.max_elements_per_param - 1) / options.max_elements_per_param;
    }
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double up = evaluate(loss);
      values[i] = saved - options.eps;
      const double down = evaluate(loss);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[pi][i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.floor});
      ++report.elements_checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = pi;
        report.worst_element = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  for (auto& p : params) p.zero_grad();
  return report;
}

}  // namespace cmp::num
