#include "cmp/model/cmp_model.hpp"

#include <algorithm>
#include <string>

#include "cmp/common/error.hpp"
#include "cmp/numerics/ops.hpp"

namespace cmp::model {

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* field, const std::string& msg) {
    if (!ok) throw ConfigError(std::string(field) + ": " + msg, field);
  };
  require(image_size > 0, "image_size", "must be positive");
  require(patch_size > 0 && image_size % patch_size == 0, "patch_size", "must divide image_size");
  require(image_size / std::max<std::size_t>(patch_size, 1) >= 1, "patch_size", "too large");
  require(image_channels > 0, "image_channels", "must be positive");
  require(pose_channels > 0, "pose_channels", "must be positive");
  require(vocab_size > kNumSpecialTokens, "vocab_size", "must exceed the special tokens");
  require(model_dim > 0, "model_dim", "must be positive");
  require(heads > 0 && model_dim % heads == 0, "heads", "must divide model_dim");
  require(fusion_heads > 0 && model_dim % fusion_heads == 0, "fusion_heads", "must divide model_dim");
  require(ffn_dim > 0, "ffn_dim", "must be positive");
  require(proj_dim > 0, "proj_dim", "must be positive");
  require(ln_eps > 0.0, "ln_eps", "must be positive");
}

template <typename T>
Tensor<T> patchify(const ImageInput& image, std::size_t patch_size) {
  const std::size_t s = image.size, c = image.channels;
  if (patch_size == 0 || s % patch_size != 0) {
    throw ConfigError("patch size " + std::to_string(patch_size) + " does not divide image size " +
                          std::to_string(s),
                      "patch_size");
  }
  if (image.pixels.size() != s * s * c) throw ShapeError("image pixel count does not match size×size×channels");
  const std::size_t grid = s / patch_size;
  const std::size_t width = patch_size * patch_size * c;
  std::vector<T> out(grid * grid * width);
  std::size_t at = 0;
  for (std::size_t gr = 0; gr < grid; ++gr) {
    for (std::size_t gc = 0; gc < grid; ++gc) {
      for (std::size_t dr = 0; dr < patch_size; ++dr) {
        const std::size_t row = gr * patch_size + dr;
        for (std::size_t dc = 0; dc < patch_size; ++dc) {
          const std::size_t col = gc * patch_size + dc;
          for (std::size_t ch = 0; ch < c; ++ch) out[at++] = static_cast<T>(image.pixels[(row * s + col) * c + ch]);
        }
      }
    }
  }
  return Tensor<T>({grid * grid, width}, std::move(out));
}

template <typename T>
Tensor<T> pool_global(const Tensor<T>& token_feats, const nn::Linear<T>& fc) {
  if (token_feats.rows() < 2) throw ShapeError("pool_global: need a CLS row and at least one token row");
  const auto avg = num::mean_rows(num::slice_rows(token_feats, 1, token_feats.rows()));
  const auto cls = num::slice_rows(token_feats, 0, 1);
  return num::l2_normalize_rows(fc(num::concat_cols<T>({avg, cls})));
}

template <typename T>
CmpModel<T>::CmpModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Initializer init(seed);
  const std::size_t d = config_.model_dim;
  const std::size_t p2 = config_.patch_size * config_.patch_size;

  image_stem_ = nn::make_linear(params_, init, "image.stem", p2 * config_.image_channels, d);
  pose_stem_ = nn::make_linear(params_, init, "pose.stem", p2 * config_.pose_channels, d);
  image_pos_ = params_.add("image.pos", init.normal<T>({config_.num_patches(), d}, 0.02));
  for (std::size_t i = 0; i < config_.image_blocks; ++i) {
    image_blocks_.push_back(
        nn::make_transformer_block(params_, init, "image." + std::to_string(i), d, config_.heads, config_.ffn_dim));
  }
  image_final_ln_ = nn::make_layer_norm(params_, "image.final_ln", d);

  fusion_ln_ = nn::make_layer_norm(params_, "fusion.ln", d);
  fusion_attn_ = nn::make_attention(params_, init, "fusion.ca", d, config_.fusion_heads);

  token_embed_ = params_.add("text.embed", init.normal<T>({config_.vocab_size, d}, 0.02));
  text_pos_ = params_.add("text.pos", init.normal<T>({kMaxTextLength, d}, 0.02));
  for (std::size_t i = 0; i < config_.text_blocks; ++i) {
    text_blocks_.push_back(
        nn::make_transformer_block(params_, init, "text." + std::to_string(i), d, config_.heads, config_.ffn_dim));
  }
  text_final_ln_ = nn::make_layer_norm(params_, "text.final_ln", d);

  for (std::size_t i = 0; i < config_.cross_blocks; ++i) {
    cross_blocks_.push_back(
        nn::make_cross_block(params_, init, "cross." + std::to_string(i), d, config_.heads, config_.ffn_dim));
  }
  cross_final_ln_ = nn::make_layer_norm(params_, "cross.final_ln", d);

  image_pool_ = nn::make_linear(params_, init, "pool.image", 2 * d, config_.proj_dim);
  text_pool_ = nn::make_linear(params_, init, "pool.text", 2 * d, config_.proj_dim);
  itm_head_.in = nn::make_linear(params_, init, "itm.dense", d, d);
  itm_head_.out = nn::make_linear(params_, init, "itm.out", d, 2);
  mlm_hidden_ = nn::make_linear(params_, init, "mlm.dense", d, d);
  mlm_ln_ = nn::make_layer_norm(params_, "mlm.ln", d);
  mlm_out_ = nn::make_linear(params_, init, "mlm.out", d, config_.vocab_size);

  const T eps = static_cast<T>(config_.ln_eps);
  for (auto* ln : {&image_final_ln_, &fusion_ln_, &text_final_ln_, &cross_final_ln_, &mlm_ln_}) ln->eps = eps;
  for (auto& b : image_blocks_) b.ln_attn.eps = b.ln_ffn.eps = eps;
  for (auto& b : text_blocks_) b.ln_attn.eps = b.ln_ffn.eps = eps;
  for (auto& b : cross_blocks_) b.ln_self.eps = b.ln_cross.eps = b.ln_ffn.eps = eps;
}

template <typename T>
Tensor<T> CmpModel<T>::trunk(const Tensor<T>& patches, const nn::Linear<T>& stem) const {
  if (patches.rows() != config_.num_patches()) {
    throw ShapeError("trunk: expected " + std::to_string(config_.num_patches()) + " patches, got " +
                     std::to_string(patches.rows()));
  }
  auto x = num::add(stem(patches), image_pos_);
  for (const auto& block : image_blocks_) x = nn::transformer_block(x, block);
  x = image_final_ln_(x);
  return num::concat_rows<T>({num::mean_rows(x), x});
}

template <typename T>
Tensor<T> CmpModel<T>::encode_image(const ImageInput& image) const {
  if (image.size != config_.image_size || image.channels != config_.image_channels) {
    throw ShapeError("encode_image: expected " + std::to_string(config_.image_size) + "x" +
                     std::to_string(config_.image_size) + "x" + std::to_string(config_.image_channels) + " input");
  }
  return trunk(patchify<T>(image, config_.patch_size), image_stem_);
}

template <typename T>
Tensor<T> CmpModel<T>::encode_pose(const PoseInput& pose) const {
  const auto& map = pose.rasterized;
  if (map.size != config_.image_size || map.channels != config_.pose_channels) {
    throw ShapeError("encode_pose: pose map grid " + std::to_string(map.size) + "x" + std::to_string(map.size) +
                     "x" + std::to_string(map.channels) + " does not match the image grid");
  }
  return trunk(patchify<T>(map, config_.patch_size), pose_stem_);
}

template <typename T>
Tensor<T> CmpModel<T>::fuse_pose(const Tensor<T>& f_image, const Tensor<T>& f_pose) const {
  if (f_image.shape() != f_pose.shape()) {
    throw ShapeError("fuse_pose: token mismatch " + num::shape_string(f_image.shape()) + " vs " +
                     num::shape_string(f_pose.shape()));
  }
  return num::add(f_image, nn::multi_head_attention(fusion_ln_(f_pose), f_image, fusion_attn_));
}

template <typename T>
Tensor<T> CmpModel<T>::encode_visual(const ImageInput& image, const PoseInput& pose) const {
  auto f_image = encode_image(image);
  if (!config_.pose_enabled) return f_image;
  return fuse_pose(f_image, encode_pose(pose));
}

template <typename T>
Tensor<T> CmpModel<T>::encode_text(const TextInput& text) const {
  validate_text(text, config_.vocab_size);
  const std::size_t len = text.tokens.size();
  std::vector<std::size_t> ids(text.tokens.begin(), text.tokens.end());
  auto x = num::add(num::gather_rows(token_embed_, std::span<const std::size_t>(ids)),
                    num::slice_rows(text_pos_, 0, len));
  for (const auto& block : text_blocks_) x = nn::transformer_block(x, block);
  return text_final_ln_(x);
}

template <typename T>
Tensor<T> CmpModel<T>::cross_hidden(const Tensor<T>& f_visual, const Tensor<T>& f_text) const {
  if (f_visual.cols() != config_.model_dim || f_text.cols() != config_.model_dim) {
    throw ShapeError("cross_hidden: feature width does not match model_dim");
  }
  auto x = f_text;
  for (const auto& block : cross_blocks_) x = nn::cross_block(x, f_visual, block);
  return cross_final_ln_(x);
}

template <typename T>
Tensor<T> CmpModel<T>::itm_logits(const Tensor<T>& hidden) const {
  return itm_head_(num::slice_rows(hidden, 0, 1));
}

template <typename T>
Tensor<T> CmpModel<T>::mlm_logits(const Tensor<T>& hidden, std::span<const std::size_t> rows) const {
  const auto selected = rows.empty() ? hidden : num::gather_rows(hidden, rows);
  return mlm_out_(mlm_ln_(num::gelu(mlm_hidden_(selected))));
}

template <typename T>
CrossOutput<T> CmpModel<T>::cross_encode(const Tensor<T>& f_visual, const TextInput& text) const {
  const auto hidden = cross_hidden(f_visual, encode_text(text));
  return {itm_logits(hidden), mlm_logits(hidden)};
}

template class CmpModel<float>;
template class CmpModel<double>;
template Tensor<float> patchify(const ImageInput&, std::size_t);
template Tensor<double> patchify(const ImageInput&, std::size_t);
template Tensor<float> pool_global(const Tensor<float>&, const nn::Linear<float>&);
template Tensor<double> pool_global(const Tensor<double>&, const nn::Linear<double>&);

}  // namespace cmp::model
