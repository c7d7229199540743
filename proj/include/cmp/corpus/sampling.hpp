#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cmp/corpus/types.hpp"

namespace cmp::corpus {

enum class NegativeKind : std::uint8_t { kHardText, kHardImage, kRandom };

/// An ITM negative as corpus positions of the image and the text source.
struct ItmPair {
  std::size_t image = 0;
  std::size_t text = 0;
  NegativeKind kind = NegativeKind::kRandom;
};

/// N positives (corpus positions) with identity-based hard negatives.
/// hard_negative_text[i] / hard_negative_image[i] point at the counterpart
/// record of positive i (same identity, other variant): its caption is T̃
/// and its image is Ĩ. `negatives` holds three ITM negatives per positive.
struct TrainingBatch {
  std::vector<std::size_t> positives;
  std::vector<std::optional<std::size_t>> hard_negative_text;
  std::vector<std::optional<std::size_t>> hard_negative_image;
  std::vector<bool> fallback;
  std::vector<ItmPair> negatives;
  std::vector<model::MaskedText> masked_texts;

  std::size_t size() const { return positives.size(); }
};

/// Builds the negatives for the given positives. With `ihnm` off every
/// positive takes the random-fallback path, so the ITM pair count is unchanged.
TrainingBatch build_batch(std::span<const CorpusRecord> records, const PairIndex& index,
                          std::vector<std::size_t> positives, std::mt19937_64& rng, bool ihnm = true);

/// Draws batch_size distinct records uniformly and builds their negatives.
TrainingBatch sample_batch_ihnm(std::span<const CorpusRecord> records, const PairIndex& index,
                                std::size_t batch_size, std::mt19937_64& rng, bool ihnm = true);

}  // namespace cmp::corpus
