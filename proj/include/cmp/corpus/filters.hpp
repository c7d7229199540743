#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmp/corpus/types.hpp"

namespace cmp::corpus {

/// Middle frames of the segments before and after an anomaly timestamp:
/// (floor(t/2), floor((t+F)/2)) for a clip of frames [0, F]. Requires 0 < t < F.
std::pair<std::size_t, std::size_t> extract_frame_pair(std::size_t frame_count, std::size_t anomaly_timestamp);

/// Source of detected keypoints. The synthetic corpus carries ground truth,
/// so the default source just returns the record's own joints.
class KeypointSource {
 public:
  virtual ~KeypointSource() = default;
  virtual std::array<model::Keypoint, model::kNumJoints> detect(const CorpusRecord& record) const = 0;
};

class GroundTruthKeypoints final : public KeypointSource {
 public:
  std::array<model::Keypoint, model::kNumJoints> detect(const CorpusRecord& record) const override {
    return record.pose.keypoints;
  }
};

struct PoseFilterOptions {
  std::size_t min_keypoints = 5;
  double min_confidence = 0.3;
};

bool has_enough_keypoints(const std::array<model::Keypoint, model::kNumJoints>& joints,
                          const PoseFilterOptions& options);

/// Keeps records with at least min_keypoints joints at confidence >= min_confidence.
std::vector<CorpusRecord> pose_presence_filter(std::span<const CorpusRecord> records,
                                               const PoseFilterOptions& options = {},
                                               const KeypointSource& source = GroundTruthKeypoints{});

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Indices of pairs kept: cosine(a, b) <= threshold. Zero-norm features throw NumericError.
std::vector<std::size_t> similarity_dedup(std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs,
                                          double threshold = 0.95);

using FeatureExtractor = std::function<std::vector<double>(const CorpusRecord&)>;

/// Record-pair form of similarity_dedup with a pluggable extractor.
std::vector<std::pair<CorpusRecord, CorpusRecord>> similarity_dedup_records(
    std::span<const std::pair<CorpusRecord, CorpusRecord>> pairs, const FeatureExtractor& extractor,
    double threshold = 0.95);

inline constexpr std::size_t kSubjectSlot = 2;  // [CLS] a <subject> ...

/// True iff the subject slot token is one of `person_lexicon` (token ids).
bool subject_filter(std::span<const std::uint32_t> caption_tokens, std::span<const std::uint32_t> person_lexicon,
                    std::size_t subject_slot = kSubjectSlot);
/// Default lexicon from Lexicon::person_words().
std::vector<std::uint32_t> default_person_lexicon();

/// C_n ++ [SEP] ++ C_a (leading CLS of C_a dropped), truncated to the max text length.
std::vector<std::uint32_t> concat_captions(std::span<const std::uint32_t> normal_caption,
                                           std::span<const std::uint32_t> anomaly_caption);

/// Drops records whose person-area fraction is below `min_fraction`. The area
/// measure is pluggable; the synthetic generator uses the rendered person box.
std::vector<CorpusRecord> person_area_filter(std::span<const CorpusRecord> records, double min_fraction,
                                             const std::function<double(const CorpusRecord&)>& area);

}  // namespace cmp::corpus
