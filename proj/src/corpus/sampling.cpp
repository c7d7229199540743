#include "cmp/corpus/sampling.hpp"

#include <algorithm>

#include "cmp/common/error.hpp"

namespace cmp::corpus {
namespace {

// Another batch slot whose caption differs from slot i, so a pairing across
// the two is a true negative.
std::optional<std::size_t> random_other(std::span<const CorpusRecord> records, const std::vector<std::size_t>& slots,
                                        std::size_t i, std::mt19937_64& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    if (j != i && records[slots[j]].caption.tokens != records[slots[i]].caption.tokens) candidates.push_back(j);
  }
  if (candidates.empty()) return std::nullopt;
  return candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
}

}  // namespace

TrainingBatch build_batch(std::span<const CorpusRecord> records, const PairIndex& index,
                          std::vector<std::size_t> positives, std::mt19937_64& rng, bool ihnm) {
  TrainingBatch batch;
  batch.positives = std::move(positives);
  const std::size_t n = batch.positives.size();
  batch.hard_negative_text.assign(n, std::nullopt);
  batch.hard_negative_image.assign(n, std::nullopt);
  batch.fallback.assign(n, false);
  const auto& slots = batch.positives;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = slots[i];
    if (pos >= records.size()) throw ShapeError("batch position out of range");
    if (auto j = random_other(records, slots, i, rng)) {
      batch.negatives.push_back({pos, slots[*j], NegativeKind::kRandom});
    }
    const auto counterparts = index.counterparts(records[pos].record_id);
    if (ihnm && !counterparts.empty()) {
      const auto pick = std::uniform_int_distribution<std::size_t>(0, counterparts.size() - 1)(rng);
      const std::size_t c = index.position(counterparts[pick]);
      batch.hard_negative_text[i] = c;
      batch.hard_negative_image[i] = c;
      batch.negatives.push_back({pos, c, NegativeKind::kHardText});
      batch.negatives.push_back({c, pos, NegativeKind::kHardImage});
    } else {
      batch.fallback[i] = true;
      if (auto j = random_other(records, slots, i, rng)) batch.negatives.push_back({pos, slots[*j], NegativeKind::kRandom});
      if (auto j = random_other(records, slots, i, rng)) batch.negatives.push_back({slots[*j], pos, NegativeKind::kRandom});
    }
  }
  return batch;
}

TrainingBatch sample_batch_ihnm(std::span<const CorpusRecord> records, const PairIndex& index,
                                std::size_t batch_size, std::mt19937_64& rng, bool ihnm) {
  if (batch_size == 0 || batch_size > records.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds corpus of " +
                          std::to_string(records.size()),
                      "batch_size");
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Partial Fisher-Yates: the first batch_size entries are a uniform sample.
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, order.size() - 1)(rng);
    std::swap(order[i], order[j]);
  }
  order.resize(batch_size);
  return build_batch(records, index, std::move(order), rng, ihnm);
}

}  // namespace cmp::corpus
