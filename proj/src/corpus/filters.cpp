#include "cmp/corpus/filters.hpp"

#include <algorithm>
#include <cmath>

#include "cmp/common/error.hpp"
#include "cmp/corpus/vocabulary.hpp"

namespace cmp::corpus {

std::pair<std::size_t, std::size_t> extract_frame_pair(std::size_t frame_count, std::size_t anomaly_timestamp) {
  if (anomaly_timestamp == 0 || anomaly_timestamp >= frame_count) {
    throw ConfigError("anomaly timestamp " + std::to_string(anomaly_timestamp) + " outside (0, " +
                          std::to_string(frame_count) + ")",
                      "anomaly_timestamp");
  }
  return {anomaly_timestamp / 2, (anomaly_timestamp + frame_count) / 2};
}

bool has_enough_keypoints(const std::array<model::Keypoint, model::kNumJoints>& joints,
                          const PoseFilterOptions& options) {
  const auto visible = std::count_if(joints.begin(), joints.end(),
                                     [&](const model::Keypoint& k) { return k.confidence >= options.min_confidence; });
  return static_cast<std::size_t>(visible) >= options.min_keypoints;
}

std::vector<CorpusRecord> pose_presence_filter(std::span<const CorpusRecord> records, const PoseFilterOptions& options,
                                               const KeypointSource& source) {
  std::vector<CorpusRecord> kept;
  for (const auto& r : records) {
    if (has_enough_keypoints(source.detect(r), options)) kept.push_back(r);
  }
  return kept;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine_similarity: zero-norm feature");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::size_t> similarity_dedup(std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs,
                                          double threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!(cosine_similarity(pairs[i].first, pairs[i].second) > threshold)) kept.push_back(i);
  }
  return kept;
}

std::vector<std::pair<CorpusRecord, CorpusRecord>> similarity_dedup_records(
    std::span<const std::pair<CorpusRecord, CorpusRecord>> pairs, const FeatureExtractor& extractor,
    double threshold) {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> feats;
  feats.reserve(pairs.size());
  for (const auto& [a, b] : pairs) feats.emplace_back(extractor(a), extractor(b));
  std::vector<std::pair<CorpusRecord, CorpusRecord>> kept;
  for (std::size_t i : similarity_dedup(feats, threshold)) kept.push_back(pairs[i]);
  return kept;
}

bool subject_filter(std::span<const std::uint32_t> caption_tokens, std::span<const std::uint32_t> person_lexicon,
                    std::size_t subject_slot) {
  if (person_lexicon.empty()) throw ConfigError("person lexicon is empty", "person_lexicon");
  if (subject_slot >= caption_tokens.size()) return false;
  return std::find(person_lexicon.begin(), person_lexicon.end(), caption_tokens[subject_slot]) !=
         person_lexicon.end();
}

std::vector<std::uint32_t> default_person_lexicon() {
  std::vector<std::uint32_t> ids;
  for (const auto& w : Lexicon::person_words()) ids.push_back(Vocabulary::standard().id(w));
  return ids;
}

std::vector<std::uint32_t> concat_captions(std::span<const std::uint32_t> normal_caption,
                                           std::span<const std::uint32_t> anomaly_caption) {
  std::vector<std::uint32_t> out(normal_caption.begin(), normal_caption.end());
  out.push_back(model::kSepToken);
  auto tail = anomaly_caption;
  if (!tail.empty() && tail.front() == model::kClsToken) tail = tail.subspan(1);
  out.insert(out.end(), tail.begin(), tail.end());
  if (out.size() > model::kMaxTextLength) out.resize(model::kMaxTextLength);
  return out;
}

std::vector<CorpusRecord> person_area_filter(std::span<const CorpusRecord> records, double min_fraction,
                                             const std::function<double(const CorpusRecord&)>& area) {
  std::vector<CorpusRecord> kept;
  for (const auto& r : records) {
    if (area(r) >= min_fraction) kept.push_back(r);
  }
  return kept;
}

}  // namespace cmp::corpus
