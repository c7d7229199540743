#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cmp/numerics/tensor.hpp"

namespace cmp::nn {

using num::Shape;
using num::Tensor;

/// Insertion-ordered registry of trainable tensors, keyed by checkpoint name
/// ("<encoder>.<block_index>.<param_name>" for block parameters).
template <typename T>
class ParameterStore {
 public:
  /// Registers `t` (marked trainable) and returns a handle sharing its storage.
  Tensor<T> add(std::string name, Tensor<T> t);
  Tensor<T> get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }
  std::size_t element_count() const;
  void zero_grad();

  /// Overwrites values from `other`; names and shapes must match exactly.
  template <typename U>
  void copy_values_from(const std::vector<std::pair<std::string, Tensor<U>>>& other);

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
};

/// Seeded weight initialization.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  template <typename T>
  Tensor<T> normal(Shape shape, double stddev);
  /// Glorot normal for a [fan_in×fan_out] matrix.
  template <typename T>
  Tensor<T> glorot(std::size_t fan_in, std::size_t fan_out);

 private:
  std::mt19937_64 rng_;
};

}  // namespace cmp::nn
