#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cmp/nn/parameters.hpp"

namespace cmp::obj {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay: θ ← θ − lr·(m̂/(√v̂ + ε) + λθ).
template <typename T>
class AdamW {
 public:
  AdamW(nn::ParameterStore<T>& params, AdamWConfig config = {});

  /// Applies one update from the accumulated gradients, then clears them.
  void step(double lr);
  std::size_t steps() const { return steps_; }
  const AdamWConfig& config() const { return config_; }

  /// Moment estimates as "adam.m.<param>" / "adam.v.<param>" tensors.
  std::vector<std::pair<std::string, num::Tensor<T>>> state() const;
  void load_state(const std::vector<std::pair<std::string, num::Tensor<T>>>& state, std::size_t steps);

 private:
  nn::ParameterStore<T>& params_;
  AdamWConfig config_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::size_t steps_ = 0;
};

/// Linear warm-up to `start` over `warmup_steps`, then linear decay to `end`
/// at the last of `total_steps`.
struct LrSchedule {
  double start = 1e-4;
  double end = 1e-5;
  std::size_t warmup_steps = 500;
  std::size_t total_steps = 0;

  double at(std::size_t step) const;
};

}  // namespace cmp::obj
