#include "cmp/objectives/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "cmp/common/error.hpp"

namespace cmp::obj {

template <typename T>
AdamW<T>::AdamW(nn::ParameterStore<T>& params, AdamWConfig config) : params_(params), config_(config) {
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)", "beta1");
  if (!(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)", "beta2");
  if (!(config_.eps > 0.0)) throw ConfigError("eps must be positive", "eps");
  if (!(config_.weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative", "weight_decay");
  for (const auto& [name, t] : params_.items()) {
    m_.emplace_back(t.size(), T(0));
    v_.emplace_back(t.size(), T(0));
  }
}

template <typename T>
void AdamW<T>::step(double lr) {
  if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("learning rate must be finite and non-negative", "lr");
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const auto& items = params_.items();
  for (std::size_t p = 0; p < items.size(); ++p) {
    auto t = items[p].second;
    auto value = t.mutable_data();
    const auto grad = t.grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = static_cast<T>(b1 * m[i] + (1.0 - b1) * g);
      v[i] = static_cast<T>(b2 * v[i] + (1.0 - b2) * g * g);
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps) + config_.weight_decay * value[i];
      value[i] = static_cast<T>(value[i] - lr * update);
    }
    if (!std::all_of(value.begin(), value.end(), [](T x) { return std::isfinite(static_cast<double>(x)); })) {
      throw NumericError("optimizer produced a non-finite value in " + items[p].first);
    }
  }
  params_.zero_grad();
}

template <typename T>
std::vector<std::pair<std::string, num::Tensor<T>>> AdamW<T>::state() const {
  std::vector<std::pair<std::string, num::Tensor<T>>> out;
  const auto& items = params_.items();
  for (std::size_t p = 0; p < items.size(); ++p) {
    out.emplace_back("adam.m." + items[p].first, num::Tensor<T>(items[p].second.shape(), m_[p]));
  }
  for (std::size_t p = 0; p < items.size(); ++p) {
    out.emplace_back("adam.v." + items[p].first, num::Tensor<T>(items[p].second.shape(), v_[p]));
  }
  return out;
}

template <typename T>
void AdamW<T>::load_state(const std::vector<std::pair<std::string, num::Tensor<T>>>& state, std::size_t steps) {
  const auto& items = params_.items();
  if (state.size() != 2 * items.size()) throw ShapeError("optimizer state has the wrong number of tensors");
  for (std::size_t p = 0; p < items.size(); ++p) {
    const auto& [m_name, m] = state[p];
    const auto& [v_name, v] = state[items.size() + p];
    if (m_name != "adam.m." + items[p].first || v_name != "adam.v." + items[p].first ||
        m.shape() != items[p].second.shape() || v.shape() != items[p].second.shape()) {
      throw ShapeError("optimizer state does not match parameter " + items[p].first);
    }
    m_[p].assign(m.data().begin(), m.data().end());
    v_[p].assign(v.data().begin(), v.data().end());
  }
  steps_ = steps;
}

double LrSchedule::at(std::size_t step) const {
  if (step < warmup_steps) {
    return start * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  const std::size_t decay_steps = total_steps > warmup_steps + 1 ? total_steps - warmup_steps - 1 : 0;
  if (decay_steps == 0) return start;
  const double t = std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(decay_steps));
  return start + (end - start) * t;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace cmp::obj
