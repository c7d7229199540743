#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cmp/numerics/tensor.hpp"

namespace cmp::num {

struct GradCheckOptions {
  double eps = 1e-5;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  /// The floor keeps derivatives that are zero up to roundoff from reporting
  /// 0/0-style blowups.
  double floor = 1e-6;
  /// 0 checks every element; otherwise an evenly strided subset per tensor.
  std::size_t max_elements_per_param = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t elements_checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_element = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients of `loss` with central differences for
/// every element of every tensor in `params`. `loss` must be deterministic and
/// return a single-element tensor. Parameter grads are left zeroed.
GradCheckReport gradient_check(const std::function<Tensor<double>()>& loss,
                               std::vector<Tensor<double>> params, const GradCheckOptions& options = {});

}  // namespace cmp::num
