#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cmp/nn/parameters.hpp"

namespace cmp::nn {

/// y = x · weight + bias, weight is [in×out]. An undefined bias is skipped.
template <typename T>
struct Linear {
  Tensor<T> weight;
  Tensor<T> bias;

  Tensor<T> operator()(const Tensor<T>& x) const;
  std::size_t in_dim() const { return weight.shape()[0]; }
  std::size_t out_dim() const { return weight.shape()[1]; }
};

template <typename T>
struct LayerNorm {
  Tensor<T> gamma;
  Tensor<T> beta;
  T eps = T(1e-5);

  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// Bias-free multi-head attention projections. Tokens are row vectors, so
/// q = x · w_q and the output is concat(heads) · w_o.
template <typename T>
struct AttentionParams {
  Tensor<T> w_q, w_k, w_v, w_o;
  std::size_t heads = 1;

  std::size_t model_dim() const { return w_q.shape()[0]; }
  std::size_t head_dim() const { return model_dim() / heads; }
  /// Throws ShapeError unless all projections are [D×D] and heads divides D.
  void validate() const;
};

/// Cross-attention from `q_tokens` onto `kv_tokens`; self-attention when both
/// are the same tensor. `weights`, when given, receives [heads][Lq][Lkv].
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q_tokens, const Tensor<T>& kv_tokens, const AttentionParams<T>& p,
                               std::vector<T>* weights = nullptr);

template <typename T>
struct FeedForward {
  Linear<T> in;
  Linear<T> out;

  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// Pre-norm block: x + Attn(LN(x)), then x + FFN(LN(x)).
template <typename T>
struct TransformerBlock {
  LayerNorm<T> ln_attn;
  AttentionParams<T> attn;
  LayerNorm<T> ln_ffn;
  FeedForward<T> ffn;
};

template <typename T>
Tensor<T> transformer_block(const Tensor<T>& tokens, const TransformerBlock<T>& block);

/// Pre-norm block with an extra cross-attention sublayer over `memory`.
template <typename T>
struct CrossBlock {
  LayerNorm<T> ln_self;
  AttentionParams<T> self_attn;
  LayerNorm<T> ln_cross;
  AttentionParams<T> cross_attn;
  LayerNorm<T> ln_ffn;
  FeedForward<T> ffn;
};

template <typename T>
Tensor<T> cross_block(const Tensor<T>& tokens, const Tensor<T>& memory, const CrossBlock<T>& block);

// Builders register parameters under `prefix` and return handles into the store.
template <typename T>
Linear<T> make_linear(ParameterStore<T>& store, Initializer& init, const std::string& prefix, std::size_t in,
                      std::size_t out, bool bias = true);
template <typename T>
LayerNorm<T> make_layer_norm(ParameterStore<T>& store, const std::string& prefix, std::size_t dim);
template <typename T>
AttentionParams<T> make_attention(ParameterStore<T>& store, Initializer& init, const std::string& prefix,
                                  std::size_t dim, std::size_t heads);
template <typename T>
TransformerBlock<T> make_transformer_block(ParameterStore<T>& store, Initializer& init, const std::string& prefix,
                                           std::size_t dim, std::size_t heads, std::size_t ffn_dim);
template <typename T>
CrossBlock<T> make_cross_block(ParameterStore<T>& store, Initializer& init, const std::string& prefix,
                               std::size_t dim, std::size_t heads, std::size_t ffn_dim);

}  // namespace cmp::nn
