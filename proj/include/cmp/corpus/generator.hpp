#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "cmp/corpus/types.hpp"

namespace cmp::corpus {

struct CorpusConfig {
  std::size_t n_identities = 500;
  std::size_t images_per_caption = 1;
  /// normal : anomaly record ratio.
  std::size_t ratio_normal = 2;
  std::size_t ratio_anomaly = 3;
  /// Fraction of identities rendered in both variants. The rest keep a single
  /// variant (alternating normal-only / anomaly-only) with the same record count.
  double paired_fraction = 1.0;
  std::size_t test_identities = 100;
  std::uint64_t seed = 0;
  std::size_t image_size = 32;
  double pixel_noise = 0.05;
  double keypoint_jitter = 0.02;
  /// Heatmap sigma in pixels; 0 picks image_size / 16 (at least 1).
  double pose_sigma_px = 0.0;

  double effective_pose_sigma() const;
  void validate() const;
};

struct GenerationReport {
  std::size_t identities = 0;
  std::size_t paired_identities = 0;
  std::size_t records = 0;
  std::size_t normal_count = 0;
  std::size_t anomaly_count = 0;
  std::size_t c_n = 0, c_a = 0, c_a_plus = 0;
};

struct GeneratedCorpus {
  std::vector<IdentitySpec> identities;
  std::vector<CorpusRecord> records;
  PairIndex index;
  GenerationReport report;
};

/// Training corpus: identities [0, n_identities) of the seeded identity stream.
GeneratedCorpus generate_corpus(const CorpusConfig& config);
/// Held-out split: the next `test_identities` identities, exactly one C_n and
/// one C_a record each.
GeneratedCorpus generate_test_split(const CorpusConfig& config);

/// First `count` identities of the seeded stream (unique appearance+scene).
std::vector<IdentitySpec> sample_identities(const CorpusConfig& config, std::size_t count);

/// Grammar captions; C_a+ is built with concat_captions.
model::TextInput caption_for(const IdentitySpec& id, Variant variant);

/// Renders one record. `render_seed` drives pixel noise and keypoint jitter.
CorpusRecord render_record(const CorpusConfig& config, const IdentitySpec& id, Variant variant, CaptionKind kind,
                           std::uint32_t record_id, std::uint64_t render_seed);

/// Canonical joints for an action before jitter (normalized image coordinates).
std::array<model::Keypoint, model::kNumJoints> action_template(Variant variant, std::size_t action);

/// Fraction of the image covered by the person box (area-filter hook input).
double person_area_fraction(const CorpusRecord& record);

/// splitmix64 finalizer used to derive per-identity/per-record seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace cmp::corpus
