#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cmp/numerics/tensor.hpp"

namespace cmp::testing {

template <typename T = double>
num::Tensor<T> random_tensor(num::Shape shape, std::uint64_t seed, double scale = 1.0, bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<T> data(num::numel(shape));
  for (auto& v : data) v = static_cast<T>(dist(rng));
  return num::Tensor<T>(std::move(shape), std::move(data), requires_grad);
}

inline std::vector<double> values(const num::Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace cmp::testing
