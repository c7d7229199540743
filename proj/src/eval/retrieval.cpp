#include "cmp/eval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmp/common/error.hpp"
#include "cmp/numerics/ops.hpp"

namespace cmp::eval {
namespace {

/// Match-minus-mismatch logit. Orders like the match probability but does
/// not saturate to ties.
double match_margin(const model::CmpModel<float>& m, const Tensor<float>& visual, const Tensor<float>& text) {
  const auto logits = m.itm_logits(m.cross_hidden(visual, text));
  return static_cast<double>(logits.at(0, 1)) - static_cast<double>(logits.at(0, 0));
}

void score(RankedItem& item, double margin) {
  item.itm_margin = margin;
  item.itm_prob = 1.0 / (1.0 + std::exp(-margin));
}

bool by_match(const RankedItem& a, const RankedItem& b) {
  if (a.itm_margin != b.itm_margin) return a.itm_margin > b.itm_margin;
  return a.record_id < b.record_id;
}

struct Scored {
  std::size_t row;
  double similarity;
};

}  // namespace

GalleryIndex::GalleryIndex(const model::CmpModel<float>& model, std::span<const corpus::CorpusRecord> gallery)
    : model_(&model) {
  if (gallery.empty()) throw ShapeError("gallery is empty");
  num::NoGradGuard no_grad;
  std::vector<Tensor<float>> rows;
  for (const auto& r : gallery) {
    record_ids_.push_back(r.record_id);
    visual_.push_back(model.encode_visual(r.image, r.pose));
    rows.push_back(model.pool_image(visual_.back()));
  }
  pooled_ = num::concat_rows(rows);
}

std::vector<std::uint32_t> RankingResult::ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.record_id);
  return out;
}

RankingResult retrieve_two_stage(const model::TextInput& query, const GalleryIndex& index, std::size_t shortlist_k,
                                 std::uint32_t query_id) {
  if (index.size() == 0) throw ShapeError("gallery is empty");
  num::NoGradGuard no_grad;
  const auto& m = index.model();
  const auto text = m.encode_text(query);
  const auto sims = num::matmul_nt(m.pool_text(text), index.pooled());
  const auto& ids = index.record_ids();

  std::vector<Scored> stage1(index.size());
  for (std::size_t i = 0; i < stage1.size(); ++i) stage1[i] = {i, static_cast<double>(sims.data()[i])};
  std::sort(stage1.begin(), stage1.end(), [&](const Scored& a, const Scored& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return ids[a.row] < ids[b.row];
  });

  const std::size_t k = std::min(shortlist_k, stage1.size());
  RankingResult out;
  out.query_id = query_id;
  for (std::size_t i = 0; i < stage1.size(); ++i) {
    RankedItem item{ids[stage1[i].row], stage1[i].similarity, std::nullopt};
    if (i < k) score(item, match_margin(m, index.visual_tokens(stage1[i].row), text));
    out.items.push_back(item);
  }
  std::sort(out.items.begin(), out.items.begin() + static_cast<std::ptrdiff_t>(k), by_match);
  return out;
}

RankingResult exhaustive_rerank(const model::TextInput& query, const GalleryIndex& index, std::uint32_t query_id) {
  if (index.size() == 0) throw ShapeError("gallery is empty");
  num::NoGradGuard no_grad;
  const auto& m = index.model();
  const auto text = m.encode_text(query);
  const auto sims = num::matmul_nt(m.pool_text(text), index.pooled());
  RankingResult out;
  out.query_id = query_id;
  for (std::size_t i = 0; i < index.size(); ++i) {
    RankedItem item{index.record_ids()[i], static_cast<double>(sims.data()[i]), std::nullopt};
    score(item, match_margin(m, index.visual_tokens(i), text));
    out.items.push_back(item);
  }
  std::sort(out.items.begin(), out.items.end(), by_match);
  return out;
}

}  // namespace cmp::eval
