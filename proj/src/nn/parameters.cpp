#include "cmp/nn/parameters.hpp"

#include <cmath>

#include "cmp/common/error.hpp"

namespace cmp::nn {

template <typename T>
Tensor<T> ParameterStore<T>::add(std::string name, Tensor<T> t) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name, name);
  t.set_requires_grad(true);
  items_.emplace_back(std::move(name), t);
  return t;
}

template <typename T>
Tensor<T> ParameterStore<T>::get(const std::string& name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return t;
  }
  throw ConfigError("unknown parameter " + name, name);
}

template <typename T>
bool ParameterStore<T>::contains(const std::string& name) const {
  for (const auto& item : items_) {
    if (item.first == name) return true;
  }
  return false;
}

template <typename T>
std::size_t ParameterStore<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& item : items_) n += item.second.size();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& item : items_) item.second.zero_grad();
}

template <typename T>
template <typename U>
void ParameterStore<T>::copy_values_from(const std::vector<std::pair<std::string, Tensor<U>>>& other) {
  if (other.size() != items_.size()) {
    throw ShapeError("parameter count mismatch: " + std::to_string(other.size()) + " vs " +
                     std::to_string(items_.size()));
  }
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto& [name, dst] = items_[i];
    const auto& [src_name, src] = other[i];
    if (name != src_name || dst.shape() != src.shape()) {
      throw ShapeError("parameter mismatch at " + name + ": got " + src_name + " " + num::shape_string(src.shape()));
    }
    auto out = dst.mutable_data();
    const auto in = src.data();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<T>(in[j]);
  }
}

template <typename T>
Tensor<T> Initializer::normal(Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> data(num::numel(shape));
  for (auto& v : data) v = static_cast<T>(dist(rng_));
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> Initializer::glorot(std::size_t fan_in, std::size_t fan_out) {
  return normal<T>({fan_in, fan_out}, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void ParameterStore<float>::copy_values_from(const std::vector<std::pair<std::string, Tensor<float>>>&);
template void ParameterStore<float>::copy_values_from(const std::vector<std::pair<std::string, Tensor<double>>>&);
template void ParameterStore<double>::copy_values_from(const std::vector<std::pair<std::string, Tensor<float>>>&);
template void ParameterStore<double>::copy_values_from(const std::vector<std::pair<std::string, Tensor<double>>>&);
template Tensor<float> Initializer::normal(Shape, double);
template Tensor<double> Initializer::normal(Shape, double);
template Tensor<float> Initializer::glorot(std::size_t, std::size_t);
template Tensor<double> Initializer::glorot(std::size_t, std::size_t);

}  // namespace cmp::nn
