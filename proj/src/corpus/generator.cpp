#include "cmp/corpus/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "cmp/common/error.hpp"
#include "cmp/corpus/filters.hpp"
#include "cmp/corpus/vocabulary.hpp"

namespace cmp::corpus {
namespace {

using model::Keypoint;
using model::kNumJoints;
using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, 10> kColorRgb{{{0.85, 0.15, 0.15},
                                         {0.15, 0.25, 0.85},
                                         {0.15, 0.7, 0.2},
                                         {0.9, 0.85, 0.15},
                                         {0.08, 0.08, 0.08},
                                         {0.95, 0.95, 0.95},
                                         {0.5, 0.5, 0.5},
                                         {0.95, 0.55, 0.1},
                                         {0.55, 0.2, 0.7},
                                         {0.5, 0.3, 0.12}}};
constexpr std::array<Rgb, 5> kSubjectRgb{
    {{0.35, 0.22, 0.12}, {0.8, 0.6, 0.3}, {0.2, 0.15, 0.1}, {0.95, 0.75, 0.55}, {0.6, 0.45, 0.35}}};
constexpr std::array<Rgb, 8> kSceneRgb{{{0.3, 0.55, 0.3},
                                        {0.45, 0.45, 0.5},
                                        {0.6, 0.55, 0.45},
                                        {0.75, 0.7, 0.65},
                                        {0.55, 0.5, 0.35},
                                        {0.35, 0.35, 0.4},
                                        {0.5, 0.6, 0.45},
                                        {0.25, 0.25, 0.3}}};
constexpr Rgb kSkin{0.9, 0.72, 0.6};

// Person box in unit coordinates.
constexpr double kBoxLeft = 0.3, kBoxRight = 0.7;
constexpr double kHeadTop = 0.08, kUpperTop = 0.25, kLowerTop = 0.55, kBoxBottom = 0.95;

// Upright skeleton in body units, origin at the hip centre, y pointing down.
constexpr std::array<std::array<double, 2>, kNumJoints> kUpright{{{0.0, -0.85},
                                                                  {-0.03, -0.88},
                                                                  {0.03, -0.88},
                                                                  {-0.06, -0.86},
                                                                  {0.06, -0.86},
                                                                  {-0.12, -0.65},
                                                                  {0.12, -0.65},
                                                                  {-0.15, -0.4},
                                                                  {0.15, -0.4},
                                                                  {-0.16, -0.15},
                                                                  {0.16, -0.15},
                                                                  {-0.08, 0.0},
                                                                  {0.08, 0.0},
                                                                  {-0.09, 0.25},
                                                                  {0.09, 0.25},
                                                                  {-0.09, 0.5},
                                                                  {0.09, 0.5}}};

enum Joint : std::size_t {
  kLeftElbow = 7,
  kRightElbow = 8,
  kLeftWrist = 9,
  kRightWrist = 10,
  kLeftKnee = 13,
  kRightKnee = 14,
  kLeftAnkle = 15,
  kRightAnkle = 16,
};

struct ActionShape {
  double angle_deg;
  std::vector<std::pair<std::size_t, std::array<double, 2>>> moves;  // joint → absolute body position
};

ActionShape action_shape(Variant variant, std::size_t action) {
  if (variant == Variant::kNormal) {
    switch (action) {
      case 0:  // walking
        return {0.0, {{kLeftKnee, {-0.13, 0.25}}, {kRightKnee, {0.12, 0.25}}, {kLeftAnkle, {-0.2, 0.48}},
                      {kRightAnkle, {0.18, 0.48}}}};
      case 1:  // standing
        return {0.0, {}};
      case 2:  // running
        return {8.0, {{kLeftElbow, {-0.22, -0.48}}, {kRightElbow, {0.22, -0.48}}, {kLeftWrist, {-0.12, -0.6}},
                      {kRightWrist, {0.14, -0.6}}, {kLeftKnee, {-0.2, 0.18}}, {kRightKnee, {0.2, 0.22}},
                      {kLeftAnkle, {-0.3, 0.42}}, {kRightAnkle, {0.3, 0.45}}}};
      case 3:  // jogging
        return {4.0, {{kLeftWrist, {-0.12, -0.35}}, {kRightWrist, {0.12, -0.35}}, {kLeftAnkle, {-0.16, 0.48}},
                      {kRightAnkle, {0.15, 0.48}}}};
      case 4:  // talking
        return {0.0, {{kRightElbow, {0.2, -0.55}}, {kRightWrist, {0.08, -0.78}}}};
      default:  // waiting
        return {0.0, {{kLeftWrist, {-0.03, -0.3}}, {kRightWrist, {0.03, -0.3}}}};
    }
  }
  switch (action) {
    case 0:  // falling
      return {60.0, {{kLeftWrist, {-0.3, -0.5}}, {kRightWrist, {0.3, -0.5}}}};
    case 1:  // lying
      return {90.0, {}};
    case 2:  // slipping
      return {-50.0, {{kLeftKnee, {-0.1, 0.15}}, {kRightAnkle, {0.25, 0.1}}, {kLeftWrist, {-0.3, -0.3}}}};
    case 3:  // fainting
      return {75.0, {{kLeftKnee, {-0.15, 0.2}}, {kRightKnee, {0.1, 0.2}}, {kLeftWrist, {-0.1, -0.1}}}};
    case 4:  // crawling
      return {90.0, {{kLeftWrist, {-0.2, -0.5}}, {kRightWrist, {0.2, -0.5}}, {kLeftKnee, {-0.2, 0.2}},
                     {kRightKnee, {0.2, 0.2}}}};
    default:  // tumbling
      return {135.0, {{kLeftWrist, {-0.25, -0.6}}, {kRightWrist, {0.25, -0.6}}}};
  }
}

std::array<Keypoint, kNumJoints> place(const ActionShape& shape, double angle_jitter_deg, double scale_jitter,
                                       double dx, double dy) {
  auto body = kUpright;
  for (const auto& [joint, pos] : shape.moves) body[joint] = pos;
  const double a = (shape.angle_deg + angle_jitter_deg) * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  std::array<std::array<double, 2>, kNumJoints> rotated{};
  double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
  for (std::size_t k = 0; k < kNumJoints; ++k) {
    rotated[k] = {c * body[k][0] - s * body[k][1], s * body[k][0] + c * body[k][1]};
    min_x = std::min(min_x, rotated[k][0]);
    max_x = std::max(max_x, rotated[k][0]);
    min_y = std::min(min_y, rotated[k][1]);
    max_y = std::max(max_y, rotated[k][1]);
  }
  const double scale = 0.6 * scale_jitter;
  const double cx = 0.5 * (min_x + max_x), cy = 0.5 * (min_y + max_y);
  std::array<Keypoint, kNumJoints> out{};
  for (std::size_t k = 0; k < kNumJoints; ++k) {
    out[k].x = std::clamp(0.5 + dx + scale * (rotated[k][0] - cx), 0.0, 1.0);
    out[k].y = std::clamp(0.55 + dy + scale * (rotated[k][1] - cy), 0.0, 1.0);
    out[k].confidence = 1.0;
  }
  return out;
}

Rgb garment_texture(const Rgb& base, std::size_t texture, bool lower, std::size_t row, std::size_t col,
                    std::size_t region_row, std::size_t region_rows) {
  double f = 1.0;
  if (lower && texture == 1) {  // shorts: legs below the hem
    if (region_row * 2 >= region_rows) return kSkin;
    return base;
  }
  switch (texture) {
    case 0:
      break;
    case 1:
      f = (row % 2 == 0) ? 1.0 : 0.55;
      break;
    case 2:
      f = lower ? ((row % 2 == 0) ? 1.0 : 0.55) : (((row / 2 + col / 2) % 2 == 0) ? 1.0 : 0.55);
      break;
    default:
      f = (col % 2 == 0) ? 1.0 : 0.55;
      break;
  }
  return {base[0] * f, base[1] * f, base[2] * f};
}

std::size_t to_pixel(double frac, std::size_t size) {
  return static_cast<std::size_t>(std::floor(frac * static_cast<double>(size)));
}

IdentitySpec make_identity(std::uint32_t id, std::size_t combo, std::mt19937_64& rng) {
  IdentitySpec spec;
  spec.identity_id = id;
  const std::size_t n_sub = Lexicon::subjects().size(), n_col = Lexicon::colors().size();
  const std::size_t n_up = Lexicon::upper_garments().size(), n_low = Lexicon::lower_garments().size();
  spec.appearance.subject = combo % n_sub;
  combo /= n_sub;
  spec.appearance.upper_color = combo % n_col;
  combo /= n_col;
  spec.appearance.upper_garment = combo % n_up;
  combo /= n_up;
  spec.appearance.lower_color = combo % n_col;
  combo /= n_col;
  spec.appearance.lower_garment = combo % n_low;
  combo /= n_low;
  spec.scene = combo % Lexicon::scenes().size();

  const auto& head = kSubjectRgb[spec.appearance.subject];
  const auto& up = kColorRgb[spec.appearance.upper_color];
  const auto& low = kColorRgb[spec.appearance.lower_color];
  spec.appearance_vector = {head[0], head[1], head[2], up[0], up[1], up[2], low[0], low[1], low[2],
                            static_cast<double>(spec.appearance.upper_garment),
                            static_cast<double>(spec.appearance.lower_garment)};
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  spec.background_vector = {unit(rng), unit(rng)};
  spec.normal_action = std::uniform_int_distribution<std::size_t>(0, Lexicon::normal_actions().size() - 1)(rng);
  spec.anomaly_action = std::uniform_int_distribution<std::size_t>(0, Lexicon::anomaly_actions().size() - 1)(rng);
  return spec;
}

std::size_t combination_count() {
  return Lexicon::subjects().size() * Lexicon::colors().size() * Lexicon::upper_garments().size() *
         Lexicon::colors().size() * Lexicon::lower_garments().size() * Lexicon::scenes().size();
}

void tally(GenerationReport& report, const CorpusRecord& r) {
  ++report.records;
  (r.variant == Variant::kNormal ? report.normal_count : report.anomaly_count) += 1;
  switch (r.caption_kind) {
    case CaptionKind::kNormal:
      ++report.c_n;
      break;
    case CaptionKind::kAnomaly:
      ++report.c_a;
      break;
    case CaptionKind::kAnomalyPlus:
      ++report.c_a_plus;
      break;
  }
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double CorpusConfig::effective_pose_sigma() const {
  if (pose_sigma_px > 0.0) return pose_sigma_px;
  return std::max(1.0, static_cast<double>(image_size) / 16.0);
}

void CorpusConfig::validate() const {
  if (n_identities < 1) throw ConfigError("n_identities must be at least 1", "n_identities");
  if (images_per_caption < 1) throw ConfigError("images_per_caption must be at least 1", "images_per_caption");
  if (ratio_normal < 1 || ratio_anomaly < 1) throw ConfigError("ratio terms must be positive", "ratio");
  if (paired_fraction < 0.0 || paired_fraction > 1.0) {
    throw ConfigError("paired_fraction must be in [0,1]", "paired_fraction");
  }
  if (image_size < 4) throw ConfigError("image_size too small", "image_size");
  if (n_identities + test_identities > combination_count()) {
    throw ConfigError("more identities requested than distinct appearances", "n_identities");
  }
}

std::vector<IdentitySpec> sample_identities(const CorpusConfig& config, std::size_t count) {
  std::mt19937_64 rng(mix_seed(config.seed, 0x1D));
  std::uniform_int_distribution<std::size_t> pick(0, combination_count() - 1);
  std::unordered_set<std::size_t> used;
  std::vector<IdentitySpec> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::size_t combo = pick(rng);
    if (!used.insert(combo).second) continue;
    out.push_back(make_identity(static_cast<std::uint32_t>(out.size()), combo, rng));
  }
  return out;
}

model::TextInput caption_for(const IdentitySpec& id, Variant variant) {
  const auto& v = Vocabulary::standard();
  const std::string& action = variant == Variant::kNormal ? Lexicon::normal_actions()[id.normal_action]
                                                          : Lexicon::anomaly_actions()[id.anomaly_action];
  model::TextInput t;
  t.tokens = {model::kClsToken,
              v.id("a"),
              v.id(Lexicon::subjects()[id.appearance.subject]),
              v.id("wearing"),
              v.id(Lexicon::colors()[id.appearance.upper_color]),
              v.id(Lexicon::upper_garments()[id.appearance.upper_garment]),
              v.id("and"),
              v.id(Lexicon::colors()[id.appearance.lower_color]),
              v.id(Lexicon::lower_garments()[id.appearance.lower_garment]),
              v.id("is"),
              v.id(action),
              v.id("in"),
              v.id("the"),
              v.id(Lexicon::scenes()[id.scene])};
  return t;
}

std::array<Keypoint, kNumJoints> action_template(Variant variant, std::size_t action) {
  return place(action_shape(variant, action), 0.0, 1.0, 0.0, 0.0);
}

CorpusRecord render_record(const CorpusConfig& config, const IdentitySpec& id, Variant variant, CaptionKind kind,
                           std::uint32_t record_id, std::uint64_t render_seed) {
  std::mt19937_64 rng(render_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  CorpusRecord r;
  r.record_id = record_id;
  r.identity_id = id.identity_id;
  r.variant = variant;
  r.caption_kind = kind;
  const std::size_t action = variant == Variant::kNormal ? id.normal_action : id.anomaly_action;
  r.attributes.action = variant == Variant::kNormal ? Lexicon::normal_actions()[action]
                                                    : Lexicon::anomaly_actions()[action];
  r.attributes.scene = Lexicon::scenes()[id.scene];

  switch (kind) {
    case CaptionKind::kNormal:
      r.caption = caption_for(id, Variant::kNormal);
      break;
    case CaptionKind::kAnomaly:
      r.caption = caption_for(id, Variant::kAnomaly);
      break;
    case CaptionKind::kAnomalyPlus:
      r.caption.tokens = concat_captions(caption_for(id, Variant::kNormal).tokens,
                                         caption_for(id, Variant::kAnomaly).tokens);
      break;
  }

  // Pixels depend on appearance and background only.
  const std::size_t s = config.image_size;
  r.image.size = s;
  r.image.channels = 3;
  r.image.pixels.resize(s * s * 3);
  const Rgb& scene = kSceneRgb[id.scene];
  const std::size_t left = to_pixel(kBoxLeft, s), right = to_pixel(kBoxRight, s);
  const std::size_t head_top = to_pixel(kHeadTop, s), upper_top = to_pixel(kUpperTop, s);
  const std::size_t lower_top = to_pixel(kLowerTop, s), bottom = to_pixel(kBoxBottom, s);
  const Rgb head = kSubjectRgb[id.appearance.subject];
  const Rgb& upper = kColorRgb[id.appearance.upper_color];
  const Rgb& lower = kColorRgb[id.appearance.lower_color];
  for (std::size_t row = 0; row < s; ++row) {
    const double fy = (static_cast<double>(row) + 0.5) / static_cast<double>(s);
    for (std::size_t col = 0; col < s; ++col) {
      const double fx = (static_cast<double>(col) + 0.5) / static_cast<double>(s);
      Rgb px;
      const double shade = 1.0 + 0.2 * id.background_vector[0] * (fx - 0.5) + 0.2 * id.background_vector[1] * (fy - 0.5);
      px = {scene[0] * shade, scene[1] * shade, scene[2] * shade};
      if (col >= left && col < right) {
        if (row >= head_top && row < upper_top) {
          const std::size_t margin = (right - left) / 4;
          if (col >= left + margin && col < right - margin) px = head;
        } else if (row >= upper_top && row < lower_top) {
          px = garment_texture(upper, id.appearance.upper_garment, false, row, col, row - upper_top,
                               lower_top - upper_top);
        } else if (row >= lower_top && row < bottom) {
          px = garment_texture(lower, id.appearance.lower_garment, true, row, col, row - lower_top,
                               bottom - lower_top);
        }
      }
      for (std::size_t ch = 0; ch < 3; ++ch) {
        r.image.pixels[(row * s + col) * 3 + ch] = static_cast<float>(px[ch] + config.pixel_noise * gauss(rng));
      }
    }
  }

  // Pose from the action template with global and per-joint jitter.
  const ActionShape shape = action_shape(variant, action);
  const double angle_j = 5.0 * (2.0 * unit(rng) - 1.0);
  const double scale_j = 1.0 + 0.05 * (2.0 * unit(rng) - 1.0);
  const double dx = 0.03 * (2.0 * unit(rng) - 1.0);
  const double dy = 0.03 * (2.0 * unit(rng) - 1.0);
  auto joints = place(shape, angle_j, scale_j, dx, dy);
  for (auto& j : joints) {
    j.x = std::clamp(j.x + config.keypoint_jitter * gauss(rng), 0.0, 1.0);
    j.y = std::clamp(j.y + config.keypoint_jitter * gauss(rng), 0.0, 1.0);
    j.confidence = 0.7 + 0.3 * unit(rng);
  }
  r.pose.keypoints = joints;
  r.pose.rasterized = model::rasterize_pose(joints, s, config.effective_pose_sigma());
  return r;
}

double person_area_fraction(const CorpusRecord& record) {
  const std::size_t s = record.image.size;
  const double w = static_cast<double>(to_pixel(kBoxRight, s) - to_pixel(kBoxLeft, s));
  const double h = static_cast<double>(to_pixel(kBoxBottom, s) - to_pixel(kHeadTop, s));
  return (w * h) / static_cast<double>(s * s);
}

GeneratedCorpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  GeneratedCorpus out;
  out.identities = sample_identities(config, config.n_identities);
  const std::size_t m = config.images_per_caption;
  const auto n_paired = static_cast<std::size_t>(std::llround(config.paired_fraction * config.n_identities));
  std::size_t anomaly_so_far = 0;
  std::size_t unpaired_seen = 0;
  std::uint32_t next_id = 0;
  for (std::size_t i = 0; i < out.identities.size(); ++i) {
    const IdentitySpec& id = out.identities[i];
    // Anomaly records follow the running ratio target so totals stay within one record.
    const std::size_t target = ((i + 1) * m * config.ratio_anomaly * 2 + config.ratio_normal) /
                               (2 * config.ratio_normal);
    const std::size_t n_anomaly = target - anomaly_so_far;
    anomaly_so_far = target;
    std::size_t n_normal = m;
    std::size_t n_a = std::min(n_anomaly, m);
    std::size_t n_a_plus = n_anomaly - n_a;
    if (i >= n_paired) {
      const std::size_t total = n_normal + n_a + n_a_plus;
      if (unpaired_seen++ % 2 == 0) {
        n_normal = total;
        n_a = n_a_plus = 0;
      } else {
        n_normal = 0;
        n_a = std::min(total, std::max<std::size_t>(m, (total + 1) / 2));
        n_a_plus = total - n_a;
      }
    } else {
      ++out.report.paired_identities;
    }
    std::uint64_t ordinal = 0;
    auto emit = [&](Variant v, CaptionKind k, std::size_t count) {
      for (std::size_t c = 0; c < count; ++c) {
        const auto seed = mix_seed(mix_seed(config.seed, id.identity_id), ordinal++);
        out.records.push_back(render_record(config, id, v, k, next_id++, seed));
        tally(out.report, out.records.back());
      }
    };
    emit(Variant::kNormal, CaptionKind::kNormal, n_normal);
    emit(Variant::kAnomaly, CaptionKind::kAnomaly, n_a);
    emit(Variant::kAnomaly, CaptionKind::kAnomalyPlus, n_a_plus);
  }
  out.report.identities = out.identities.size();
  out.index = PairIndex(out.records);
  return out;
}

GeneratedCorpus generate_test_split(const CorpusConfig& config) {
  config.validate();
  GeneratedCorpus out;
  auto all = sample_identities(config, config.n_identities + config.test_identities);
  out.identities.assign(all.begin() + static_cast<std::ptrdiff_t>(config.n_identities), all.end());
  std::uint32_t next_id = 0;
  for (const auto& id : out.identities) {
    const auto base = mix_seed(mix_seed(config.seed ^ 0x7E57ULL, id.identity_id), 0);
    out.records.push_back(render_record(config, id, Variant::kNormal, CaptionKind::kNormal, next_id++, base));
    tally(out.report, out.records.back());
    out.records.push_back(
        render_record(config, id, Variant::kAnomaly, CaptionKind::kAnomaly, next_id++, mix_seed(base, 1)));
    tally(out.report, out.records.back());
    ++out.report.paired_identities;
  }
  out.report.identities = out.identities.size();
  out.index = PairIndex(out.records);
  return out;
}

}  // namespace cmp::corpus
