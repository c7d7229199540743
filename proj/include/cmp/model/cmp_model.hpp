#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cmp/model/config.hpp"
#include "cmp/model/inputs.hpp"
#include "cmp/nn/layers.hpp"

namespace cmp::model {

using num::Tensor;

/// Splits an H×W×C image into row-major non-overlapping patches, each
/// flattened in (row, col, channel) order: result is [L × patch²·C].
template <typename T>
Tensor<T> patchify(const ImageInput& image, std::size_t patch_size);

/// f = normalize(fc([mean(rows 1..), row 0])). Needs at least two rows.
template <typename T>
Tensor<T> pool_global(const Tensor<T>& token_feats, const nn::Linear<T>& fc);

template <typename T>
struct CrossOutput {
  Tensor<T> itm_logits;  // [1×2], column 1 is "match"
  Tensor<T> mlm_logits;  // [L_text × vocab]
};

/// Pose-aware image encoder, text encoder and cross encoder with ITM/MLM
/// heads. Image and pose share the transformer trunk and positions; only the
/// patch stems differ. Encoders return token matrices with the CLS row first.
template <typename T>
class CmpModel {
 public:
  CmpModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore<T>& parameters() { return params_; }
  const nn::ParameterStore<T>& parameters() const { return params_; }

  Tensor<T> encode_image(const ImageInput& image) const;
  Tensor<T> encode_pose(const PoseInput& pose) const;
  /// f_V = f_I + CA(q = LN(f_P), kv = f_I).
  Tensor<T> fuse_pose(const Tensor<T>& f_image, const Tensor<T>& f_pose) const;
  /// Pose-fused features when pose is enabled, plain image features otherwise.
  Tensor<T> encode_visual(const ImageInput& image, const PoseInput& pose) const;
  Tensor<T> encode_text(const TextInput& text) const;

  Tensor<T> pool_image(const Tensor<T>& f_visual) const { return pool_global(f_visual, image_pool_); }
  Tensor<T> pool_text(const Tensor<T>& f_text) const { return pool_global(f_text, text_pool_); }

  /// Text tokens attending to visual tokens through every cross block.
  Tensor<T> cross_hidden(const Tensor<T>& f_visual, const Tensor<T>& f_text) const;
  Tensor<T> itm_logits(const Tensor<T>& hidden) const;
  /// Vocabulary logits for the given rows of `hidden` (all rows when empty).
  Tensor<T> mlm_logits(const Tensor<T>& hidden, std::span<const std::size_t> rows = {}) const;
  CrossOutput<T> cross_encode(const Tensor<T>& f_visual, const TextInput& text) const;

  /// Shared trunk applied to patch rows through `stem`.
  Tensor<T> trunk(const Tensor<T>& patches, const nn::Linear<T>& stem) const;
  const nn::Linear<T>& image_stem() const { return image_stem_; }
  const nn::Linear<T>& pose_stem() const { return pose_stem_; }
  const nn::AttentionParams<T>& fusion_attention() const { return fusion_attn_; }

  void set_pose_enabled(bool on) { config_.pose_enabled = on; }

 private:
  ModelConfig config_;
  nn::ParameterStore<T> params_;

  nn::Linear<T> image_stem_;
  nn::Linear<T> pose_stem_;
  Tensor<T> image_pos_;
  std::vector<nn::TransformerBlock<T>> image_blocks_;
  nn::LayerNorm<T> image_final_ln_;

  nn::LayerNorm<T> fusion_ln_;
  nn::AttentionParams<T> fusion_attn_;

  Tensor<T> token_embed_;
  Tensor<T> text_pos_;
  std::vector<nn::TransformerBlock<T>> text_blocks_;
  nn::LayerNorm<T> text_final_ln_;

  std::vector<nn::CrossBlock<T>> cross_blocks_;
  nn::LayerNorm<T> cross_final_ln_;

  nn::Linear<T> image_pool_;
  nn::Linear<T> text_pool_;
  nn::FeedForward<T> itm_head_;
  nn::Linear<T> mlm_hidden_;
  nn::LayerNorm<T> mlm_ln_;
  nn::Linear<T> mlm_out_;
};

}  // namespace cmp::model
