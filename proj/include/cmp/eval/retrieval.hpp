#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmp/corpus/types.hpp"
#include "cmp/model/cmp_model.hpp"

namespace cmp::eval {

using num::Tensor;

inline constexpr std::size_t kDefaultShortlist = 128;

/// Pooled and token-level visual features for every gallery record.
class GalleryIndex {
 public:
  GalleryIndex(const model::CmpModel<float>& model, std::span<const corpus::CorpusRecord> gallery);

  std::size_t size() const { return record_ids_.size(); }
  const std::vector<std::uint32_t>& record_ids() const { return record_ids_; }
  /// [G × proj_dim], unit-norm rows.
  const Tensor<float>& pooled() const { return pooled_; }
  const Tensor<float>& visual_tokens(std::size_t row) const { return visual_[row]; }
  const model::CmpModel<float>& model() const { return *model_; }

 private:
  const model::CmpModel<float>* model_;
  std::vector<std::uint32_t> record_ids_;
  std::vector<Tensor<float>> visual_;
  Tensor<float> pooled_;
};

struct RankedItem {
  std::uint32_t record_id = 0;
  double similarity = 0.0;
  /// Set for shortlisted items only.
  std::optional<double> itm_prob;
  /// Match logit minus mismatch logit; the stage-2 sort key.
  double itm_margin = 0.0;
};

struct RankingResult {
  std::uint32_t query_id = 0;
  std::vector<RankedItem> items;

  std::vector<std::uint32_t> ids() const;
};

/// Stage 1 orders the gallery by cosine similarity to the query; stage 2
/// reorders the top min(shortlist_k, |gallery|) by ITM match probability
/// (compared through the logit margin).
/// Ties go to the smaller record id.
RankingResult retrieve_two_stage(const model::TextInput& query, const GalleryIndex& index,
                                 std::size_t shortlist_k = kDefaultShortlist, std::uint32_t query_id = 0);

/// Every gallery item scored by ITM, in (probability desc, record id asc) order.
RankingResult exhaustive_rerank(const model::TextInput& query, const GalleryIndex& index,
                                std::uint32_t query_id = 0);

}  // namespace cmp::eval
