#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cmp/numerics/tensor.hpp"

namespace cmp::num {

// All matrix ops take rank-2 tensors unless noted. Broadcasting is limited to
// add_bias (a vector over the last axis).

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a · bᵀ without materializing the transpose.
template <typename T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
/// x[..., j] + bias[j]
template <typename T> Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);

/// Any rank; normalizes along `axis` with max subtraction.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
template <typename T> Tensor<T> log_softmax(const Tensor<T>& x, std::size_t axis);

/// Normalizes over the last axis, then gamma * x̂ + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
/// Column means of a matrix, shape [1×n].
template <typename T> Tensor<T> mean_rows(const Tensor<T>& x);

template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end);

/// Row lookup: out[i] = table[ids[i]].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> ids);
/// Element lookup: out[i] = x[rows[i], cols[i]], shape [n].
template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> rows, std::span<const std::size_t> cols);

/// Each row divided by its L2 norm. Zero rows are a NumericError.
template <typename T> Tensor<T> l2_normalize_rows(const Tensor<T>& x);

/// Multi-head scaled dot-product attention on pre-projected inputs.
/// q: [Lq×D], k, v: [Lk×D]; heads split D into contiguous slices of D/heads.
/// When `weights` is non-null it receives the per-head attention matrices
/// laid out [heads][Lq][Lk].
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                    std::vector<T>* weights = nullptr);

}  // namespace cmp::num
