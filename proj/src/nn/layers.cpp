#include "cmp/nn/layers.hpp"

#include "cmp/common/error.hpp"
#include "cmp/numerics/ops.hpp"

namespace cmp::nn {

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  auto y = num::matmul(x, weight);
  return bias.defined() ? num::add_bias(y, bias) : y;
}

template <typename T>
Tensor<T> LayerNorm<T>::operator()(const Tensor<T>& x) const {
  return num::layer_norm(x, gamma, beta, eps);
}

template <typename T>
void AttentionParams<T>::validate() const {
  const std::size_t d = w_q.shape()[0];
  for (const auto* w : {&w_q, &w_k, &w_v, &w_o}) {
    if (w->shape() != Shape{d, d}) {
      throw ShapeError("attention projection " + num::shape_string(w->shape()) + " is not " +
                       num::shape_string({d, d}));
    }
  }
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("model dim " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q_tokens, const Tensor<T>& kv_tokens, const AttentionParams<T>& p,
                               std::vector<T>* weights) {
  p.validate();
  if (q_tokens.cols() != p.model_dim() || kv_tokens.cols() != p.model_dim()) {
    throw ShapeError("multi_head_attention: token dims " + num::shape_string(q_tokens.shape()) + " / " +
                     num::shape_string(kv_tokens.shape()) + " do not match model dim " +
                     std::to_string(p.model_dim()));
  }
  const auto q = num::matmul(q_tokens, p.w_q);
  const auto k = num::matmul(kv_tokens, p.w_k);
  const auto v = num::matmul(kv_tokens, p.w_v);
  return num::matmul(num::attention(q, k, v, p.heads, weights), p.w_o);
}

template <typename T>
Tensor<T> FeedForward<T>::operator()(const Tensor<T>& x) const {
  return out(num::gelu(in(x)));
}

template <typename T>
Tensor<T> transformer_block(const Tensor<T>& tokens, const TransformerBlock<T>& block) {
  const auto h = block.ln_attn(tokens);
  auto x = num::add(tokens, multi_head_attention(h, h, block.attn));
  return num::add(x, block.ffn(block.ln_ffn(x)));
}

template <typename T>
Tensor<T> cross_block(const Tensor<T>& tokens, const Tensor<T>& memory, const CrossBlock<T>& block) {
  const auto h = block.ln_self(tokens);
  auto x = num::add(tokens, multi_head_attention(h, h, block.self_attn));
  x = num::add(x, multi_head_attention(block.ln_cross(x), memory, block.cross_attn));
  return num::add(x, block.ffn(block.ln_ffn(x)));
}

template <typename T>
Linear<T> make_linear(ParameterStore<T>& store, Initializer& init, const std::string& prefix, std::size_t in,
                      std::size_t out, bool bias) {
  Linear<T> l;
  l.weight = store.add(prefix + ".weight", init.glorot<T>(in, out));
  if (bias) l.bias = store.add(prefix + ".bias", Tensor<T>::zeros({out}));
  return l;
}

template <typename T>
LayerNorm<T> make_layer_norm(ParameterStore<T>& store, const std::string& prefix, std::size_t dim) {
  LayerNorm<T> ln;
  ln.gamma = store.add(prefix + ".gamma", Tensor<T>::full({dim}, T(1)));
  ln.beta = store.add(prefix + ".beta", Tensor<T>::zeros({dim}));
  return ln;
}

template <typename T>
AttentionParams<T> make_attention(ParameterStore<T>& store, Initializer& init, const std::string& prefix,
                                  std::size_t dim, std::size_t heads) {
  AttentionParams<T> a;
  a.heads = heads;
  a.w_q = store.add(prefix + ".w_q", init.glorot<T>(dim, dim));
  a.w_k = store.add(prefix + ".w_k", init.glorot<T>(dim, dim));
  a.w_v = store.add(prefix + ".w_v", init.glorot<T>(dim, dim));
  a.w_o = store.add(prefix + ".w_o", init.glorot<T>(dim, dim));
  a.validate();
  return a;
}

template <typename T>
TransformerBlock<T> make_transformer_block(ParameterStore<T>& store, Initializer& init, const std::string& prefix,
                                           std::size_t dim, std::size_t heads, std::size_t ffn_dim) {
  TransformerBlock<T> b;
  b.ln_attn = make_layer_norm(store, prefix + ".ln_attn", dim);
  b.attn = make_attention(store, init, prefix + ".attn", dim, heads);
  b.ln_ffn = make_layer_norm(store, prefix + ".ln_ffn", dim);
  b.ffn.in = make_linear(store, init, prefix + ".ffn.in", dim, ffn_dim);
  b.ffn.out = make_linear(store, init, prefix + ".ffn.out", ffn_dim, dim);
  return b;
}

template <typename T>
CrossBlock<T> make_cross_block(ParameterStore<T>& store, Initializer& init, const std::string& prefix,
                               std::size_t dim, std::size_t heads, std::size_t ffn_dim) {
  CrossBlock<T> b;
  b.ln_self = make_layer_norm(store, prefix + ".ln_self", dim);
  b.self_attn = make_attention(store, init, prefix + ".self_attn", dim, heads);
  b.ln_cross = make_layer_norm(store, prefix + ".ln_cross", dim);
  b.cross_attn = make_attention(store, init, prefix + ".cross_attn", dim, heads);
  b.ln_ffn = make_layer_norm(store, prefix + ".ln_ffn", dim);
  b.ffn.in = make_linear(store, init, prefix + ".ffn.in", dim, ffn_dim);
  b.ffn.out = make_linear(store, init, prefix + ".ffn.out", ffn_dim, dim);
  return b;
}

#define CMP_INSTANTIATE_NN(T)                                                                                   \
  template struct Linear<T>;                                                                                    \
  template struct LayerNorm<T>;                                                                                 \
  template struct AttentionParams<T>;                                                                           \
  template struct FeedForward<T>;                                                                               \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&, const AttentionParams<T>&,        \
                                          std::vector<T>*);                                                     \
  template Tensor<T> transformer_block(const Tensor<T>&, const TransformerBlock<T>&);                           \
  template Tensor<T> cross_block(const Tensor<T>&, const Tensor<T>&, const CrossBlock<T>&);                     \
  template Linear<T> make_linear(ParameterStore<T>&, Initializer&, const std::string&, std::size_t,             \
                                 std::size_t, bool);                                                            \
  template LayerNorm<T> make_layer_norm(ParameterStore<T>&, const std::string&, std::size_t);                   \
  template AttentionParams<T> make_attention(ParameterStore<T>&, Initializer&, const std::string&, std::size_t, \
                                             std::size_t);                                                      \
  template TransformerBlock<T> make_transformer_block(ParameterStore<T>&, Initializer&, const std::string&,     \
                                                      std::size_t, std::size_t, std::size_t);                   \
  template CrossBlock<T> make_cross_block(ParameterStore<T>&, Initializer&, const std::string&, std::size_t,    \
                                          std::size_t, std::size_t);

CMP_INSTANTIATE_NN(float)
CMP_INSTANTIATE_NN(double)

}  // namespace cmp::nn
