#pragma once

#include <cstddef>
#include <cstdint>

namespace cmp::model {

struct ModelConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t image_channels = 3;
  std::size_t pose_channels = 17;
  std::size_t vocab_size = 512;
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  /// Heads of the pose-aware cross-attention.
  std::size_t fusion_heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t image_blocks = 2;
  std::size_t text_blocks = 2;
  std::size_t cross_blocks = 2;
  std::size_t proj_dim = 256;
  bool pose_enabled = true;
  double ln_eps = 1e-5;

  std::size_t patches_per_side() const { return image_size / patch_size; }
  std::size_t num_patches() const { return patches_per_side() * patches_per_side(); }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

}  // namespace cmp::model
