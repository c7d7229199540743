#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace cmp::model {

inline constexpr std::uint32_t kClsToken = 0;
inline constexpr std::uint32_t kPadToken = 1;
inline constexpr std::uint32_t kMaskToken = 2;
inline constexpr std::uint32_t kSepToken = 3;
inline constexpr std::uint32_t kNumSpecialTokens = 4;
inline constexpr std::size_t kMaxTextLength = 56;
inline constexpr std::size_t kNumJoints = 17;

inline bool is_special_token(std::uint32_t id) { return id < kNumSpecialTokens; }

/// Square H×W×C image, row-major HWC.
struct ImageInput {
  std::size_t size = 0;
  std::size_t channels = 3;
  std::vector<float> pixels;
};

/// Normalized image coordinates in [0,1]²; confidence in [0,1].
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
};

/// COCO-17 skeleton order.
struct PoseInput {
  std::array<Keypoint, kNumJoints> keypoints{};
  /// H×W×17 Gaussian heatmaps on the image grid.
  ImageInput rasterized;
};

struct TextInput {
  std::vector<std::uint32_t> tokens;
};

enum class MaskAction : std::uint8_t { kMask, kRandom, kKeep };

/// A text after MLM corruption plus what is needed to score it.
struct MaskedText {
  TextInput text;
  std::vector<std::size_t> positions;
  std::vector<std::uint32_t> original_ids;
  std::vector<MaskAction> actions;
};

/// Channel k holds confidence_k · exp(-d²/(2σ²)) around joint k, with pixel
/// centres at ((col + 0.5)/size, (row + 0.5)/size) and σ in pixels.
ImageInput rasterize_pose(const std::array<Keypoint, kNumJoints>& keypoints, std::size_t size, double sigma_px);

/// Throws ShapeError when the text is empty, too long, lacks a leading CLS,
/// or has ids outside the vocabulary.
void validate_text(const TextInput& text, std::size_t vocab_size);

}  // namespace cmp::model
