#include <cmath>
#include <numeric>

#include "cmp/common/error.hpp"
#include "cmp/model/cmp_model.hpp"
#include "cmp/numerics/ops.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cmp;
using model::CmpModel;
using model::ImageInput;
using model::ModelConfig;
using num::Tensor;

namespace {

ModelConfig tiny_config(std::size_t image_size = 8, std::size_t patch = 2) {
  ModelConfig c;
  c.image_size = image_size;
  c.patch_size = patch;
  c.model_dim = 8;
  c.heads = 2;
  c.fusion_heads = 2;
  c.ffn_dim = 16;
  c.image_blocks = c.text_blocks = c.cross_blocks = 1;
  c.proj_dim = 6;
  return c;
}

ImageInput random_image(std::size_t size, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  ImageInput img{size, channels, std::vector<float>(size * size * channels)};
  for (auto& p : img.pixels) p = u(rng);
  return img;
}

model::PoseInput random_pose(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  model::PoseInput pose;
  for (auto& kp : pose.keypoints) kp = {u(rng), u(rng), 1.0};
  pose.rasterized = model::rasterize_pose(pose.keypoints, size, 1.0);
  return pose;
}

template <typename T>
void check_equal(const Tensor<T>& a, const Tensor<T>& b) {
  REQUIRE(a.shape() == b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

}  // namespace

TEST_CASE("patchify flattens patches in row, column, channel order") {
  ImageInput img{4, 1, std::vector<float>(16)};
  std::iota(img.pixels.begin(), img.pixels.end(), 0.f);
  const auto p = model::patchify<double>(img, 2);
  REQUIRE(p.shape() == num::Shape{4, 4});
  CHECK(testing::values(num::slice_rows(p, 0, 1)) == std::vector<double>{0, 1, 4, 5});
  CHECK(testing::values(num::slice_rows(p, 3, 4)) == std::vector<double>{10, 11, 14, 15});
  CHECK_THROWS_AS(model::patchify<double>(img, 3), ConfigError);
}

TEST_CASE("image encoder token counts") {
  auto big = tiny_config(224, 16);
  big.ffn_dim = 8;
  const CmpModel<float> m224(big, 1);
  CHECK(m224.encode_image(random_image(224, 3, 2)).shape() == num::Shape{197, 8});

  const CmpModel<float> m32(tiny_config(32, 8), 3);
  CHECK(m32.encode_image(random_image(32, 3, 4)).shape() == num::Shape{17, 8});
}

TEST_CASE("image CLS row is the mean of the patch rows") {
  const CmpModel<double> m(tiny_config(), 5);
  const auto f = m.encode_image(random_image(8, 3, 6));
  for (std::size_t c = 0; c < f.cols(); ++c) {
    double mean = 0;
    for (std::size_t r = 1; r < f.rows(); ++r) mean += f.at(r, c);
    CHECK(f.at(0, c) == doctest::Approx(mean / (f.rows() - 1)).epsilon(1e-12));
  }
}

TEST_CASE("model config validation names the bad field") {
  auto c = tiny_config();
  c.patch_size = 3;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "patch_size");
  }
  c = tiny_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("encoders reject inputs off the configured grid") {
  const CmpModel<float> m(tiny_config(), 7);
  CHECK_THROWS_AS(m.encode_image(random_image(16, 3, 1)), ShapeError);
  CHECK_THROWS_AS(m.encode_pose(random_pose(16, 1)), ShapeError);
  const auto a = m.encode_image(random_image(8, 3, 1));
  CHECK_THROWS_AS(m.fuse_pose(a, num::slice_rows(a, 0, 5)), ShapeError);
}

TEST_CASE("pose encoder shares the image trunk") {
  const CmpModel<float> m(tiny_config(), 8);
  const auto pose = random_pose(8, 9);
  CHECK(m.encode_pose(pose).shape() == m.encode_image(random_image(8, 3, 1)).shape());

  model::PoseInput blank;
  blank.rasterized = ImageInput{8, model::kNumJoints, std::vector<float>(8 * 8 * model::kNumJoints, 0.f)};
  check_equal(m.encode_pose(blank), m.trunk(Tensor<float>::zeros({16, 4 * model::kNumJoints}), m.pose_stem()));

  auto moved = pose;
  moved.keypoints[5].x = pose.keypoints[5].x > 0.5 ? 0.15 : 0.85;
  moved.rasterized = model::rasterize_pose(moved.keypoints, 8, 1.0);
  const auto a = m.encode_pose(pose), b = m.encode_pose(moved);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a.data()[i] != b.data()[i];
  CHECK(differs);
}

TEST_CASE("image and pose paths agree when given the same stem") {
  auto c = tiny_config();
  c.pose_channels = 3;
  CmpModel<double> m(c, 10);
  auto pose_stem = m.pose_stem();
  const auto& image_stem = m.image_stem();
  std::copy(image_stem.weight.data().begin(), image_stem.weight.data().end(), pose_stem.weight.mutable_data().begin());
  std::copy(image_stem.bias.data().begin(), image_stem.bias.data().end(), pose_stem.bias.mutable_data().begin());
  model::PoseInput pose;
  pose.rasterized = random_image(8, 3, 11);
  check_equal(m.encode_pose(pose), m.encode_image(pose.rasterized));
}

TEST_CASE("zero fusion value projection leaves image features unchanged") {
  const CmpModel<float> m(tiny_config(), 12);
  auto w_v = m.fusion_attention().w_v;
  for (auto& x : w_v.mutable_data()) x = 0.f;
  const auto image = random_image(8, 3, 13);
  const auto pose = random_pose(8, 14);
  const auto fused = m.encode_visual(image, pose);
  check_equal(fused, m.encode_image(image));
}

TEST_CASE("pose-disabled visual encoding is the image encoding") {
  CmpModel<float> m(tiny_config(), 15);
  const auto image = random_image(8, 3, 16);
  const auto pose = random_pose(8, 17);
  const auto with_pose = m.encode_visual(image, pose);
  CHECK(with_pose.shape() == m.encode_image(image).shape());
  m.set_pose_enabled(false);
  check_equal(m.encode_visual(image, pose), m.encode_image(image));
}

TEST_CASE("text encoder shapes, determinism and errors") {
  const CmpModel<float> m(tiny_config(), 18);
  const model::TextInput text{{0, 7, 9, 11, 3, 20}};
  const auto a = m.encode_text(text);
  CHECK(a.shape() == num::Shape{6, 8});
  check_equal(a, m.encode_text(text));
  CHECK_THROWS_AS(m.encode_text({{0, 512}}), ShapeError);
  CHECK_THROWS_AS(m.encode_text({{5, 6}}), ShapeError);
  CHECK_THROWS_AS(m.encode_text({{}}), ShapeError);
  model::TextInput long_text{std::vector<std::uint32_t>(57, 9)};
  long_text.tokens[0] = model::kClsToken;
  CHECK_THROWS_AS(m.encode_text(long_text), ShapeError);
  long_text.tokens.pop_back();
  CHECK(m.encode_text(long_text).rows() == 56);
}

TEST_CASE("global pooling matches the direct formula") {
  nn::ParameterStore<double> store;
  nn::Initializer init(19);
  const auto fc = nn::make_linear(store, init, "fc", 8, 5);
  const auto feats = testing::random_tensor({4, 4}, 20);
  const auto out = model::pool_global(feats, fc);
  std::vector<double> concat(8, 0.0);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t r = 1; r < 4; ++r) concat[c] += feats.at(r, c) / 3.0;
    concat[4 + c] = feats.at(0, c);
  }
  std::vector<double> y(5);
  double norm = 0;
  for (std::size_t j = 0; j < 5; ++j) {
    y[j] = fc.bias.data()[j];
    for (std::size_t i = 0; i < 8; ++i) y[j] += concat[i] * fc.weight.at(i, j);
    norm += y[j] * y[j];
  }
  for (std::size_t j = 0; j < 5; ++j) CHECK(out.data()[j] == doctest::Approx(y[j] / std::sqrt(norm)).epsilon(1e-10));
  double n2 = 0;
  for (double v : out.data()) n2 += v * v;
  CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(model::pool_global(num::slice_rows(feats, 0, 1), fc), ShapeError);
}

TEST_CASE("pooling equal rows through an identity projection repeats the row") {
  std::vector<double> eye(36, 0.0);
  for (std::size_t i = 0; i < 6; ++i) eye[i * 6 + i] = 1.0;
  const nn::Linear<double> fc{Tensor<double>({6, 6}, eye), Tensor<double>::zeros({6})};
  const std::vector<double> u{1.0, -2.0, 0.5};
  std::vector<double> rows;
  for (int r = 0; r < 4; ++r) rows.insert(rows.end(), u.begin(), u.end());
  const auto out = model::pool_global(Tensor<double>({4, 3}, rows), fc);
  const double scale = std::sqrt(2.0 * (1.0 + 4.0 + 0.25));
  for (std::size_t j = 0; j < 6; ++j) CHECK(out.data()[j] == doctest::Approx(u[j % 3] / scale).epsilon(1e-12));
}

TEST_CASE("cross encoder output contracts") {
  const CmpModel<float> m(tiny_config(), 21);
  const auto f_v = m.encode_visual(random_image(8, 3, 22), random_pose(8, 23));
  const model::TextInput text{{0, 4, 5, 6, 7}};
  const auto out = m.cross_encode(f_v, text);
  CHECK(out.itm_logits.shape() == num::Shape{1, 2});
  CHECK(out.mlm_logits.shape() == num::Shape{5, 512});
  const auto p = num::softmax(out.itm_logits, 1);
  CHECK(p.data()[0] + p.data()[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(m.cross_hidden(Tensor<float>::zeros({3, 4}), m.encode_text(text)), ShapeError);
}

TEST_CASE("same seed gives bitwise identical models and outputs") {
  const CmpModel<float> a(tiny_config(), 24), b(tiny_config(), 24), c(tiny_config(), 25);
  const auto image = random_image(8, 3, 26);
  check_equal(a.encode_image(image), b.encode_image(image));
  CHECK(a.parameters().items()[0].second.data()[0] != c.parameters().items()[0].second.data()[0]);
}

TEST_CASE("pose rasterization peaks at each keypoint") {
  std::array<model::Keypoint, model::kNumJoints> kps{};
  for (std::size_t k = 0; k < model::kNumJoints; ++k) {
    kps[k] = {(k % 4 + 0.5) / 4.0, (k / 4 % 4 + 0.5) / 4.0, k == 3 ? 0.0 : 1.0};
  }
  const auto map = model::rasterize_pose(kps, 16, 1.0);
  REQUIRE(map.channels == model::kNumJoints);
  for (std::size_t k = 0; k < model::kNumJoints; ++k) {
    std::size_t best = 0;
    float top = -1.f;
    for (std::size_t px = 0; px < 256; ++px) {
      const float v = map.pixels[px * model::kNumJoints + k];
      if (v > top) top = v, best = px;
    }
    if (k == 3) {
      CHECK(top == 0.f);
      continue;
    }
    const double col = best % 16 + 0.5, row = best / 16 + 0.5;
    CHECK(std::abs(col - kps[k].x * 16) <= 0.5);
    CHECK(std::abs(row - kps[k].y * 16) <= 0.5);
    CHECK(top <= 1.f);
  }
  CHECK_THROWS_AS(model::rasterize_pose(kps, 16, 0.0), ShapeError);
}
