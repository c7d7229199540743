#include "cmp/model/inputs.hpp"

#include <cmath>
#include <string>

#include "cmp/common/error.hpp"

namespace cmp::model {

ImageInput rasterize_pose(const std::array<Keypoint, kNumJoints>& keypoints, std::size_t size, double sigma_px) {
  if (size == 0 || !(sigma_px > 0.0)) throw ShapeError("rasterize_pose: size and sigma must be positive");
  ImageInput map;
  map.size = size;
  map.channels = kNumJoints;
  map.pixels.assign(size * size * kNumJoints, 0.0f);
  const double denom = 2.0 * sigma_px * sigma_px;
  for (std::size_t k = 0; k < kNumJoints; ++k) {
    const Keypoint& kp = keypoints[k];
    if (kp.confidence <= 0.0) continue;
    const double cx = kp.x * static_cast<double>(size);
    const double cy = kp.y * static_cast<double>(size);
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        const double dx = static_cast<double>(c) + 0.5 - cx;
        const double dy = static_cast<double>(r) + 0.5 - cy;
        map.pixels[(r * size + c) * kNumJoints + k] =
            static_cast<float>(kp.confidence * std::exp(-(dx * dx + dy * dy) / denom));
      }
    }
  }
  return map;
}

void validate_text(const TextInput& text, std::size_t vocab_size) {
  if (text.tokens.empty()) throw ShapeError("text has no tokens");
  if (text.tokens.size() > kMaxTextLength) {
    throw ShapeError("text length " + std::to_string(text.tokens.size()) + " exceeds " +
                     std::to_string(kMaxTextLength));
  }
  if (text.tokens.front() != kClsToken) throw ShapeError("text must start with CLS");
  for (std::uint32_t id : text.tokens) {
    if (id >= vocab_size) {
      throw ShapeError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab_size));
    }
  }
}

}  // namespace cmp::model
