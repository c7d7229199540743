#include "cmp/objectives/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "cmp/common/error.hpp"
#include "cmp/numerics/ops.hpp"

namespace cmp::obj {
namespace {

constexpr double kProbabilityFloor = 1e-12;

template <typename T>
Tensor<T> scaled_scores(const Tensor<T>& a, const Tensor<T>& b, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive, got " + std::to_string(tau), "tau");
  if (a.rank() != 2 || b.rank() != 2 || a.shape() != b.shape()) {
    throw ShapeError("similarity: feature matrices must share shape, got " + num::shape_string(a.shape()) + " and " +
                     num::shape_string(b.shape()));
  }
  return num::scale(num::matmul_nt(a, b), static_cast<T>(1.0 / tau));
}

template <typename T>
Tensor<T> diagonal(const Tensor<T>& m) {
  if (m.rank() != 2 || m.rows() != m.cols()) throw ShapeError("expected a square matrix, got " + num::shape_string(m.shape()));
  std::vector<std::size_t> idx(m.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return num::pick(m, std::span<const std::size_t>(idx), std::span<const std::size_t>(idx));
}

}  // namespace

template <typename T>
SimilarityMatrices<T> similarity_matrix(const Tensor<T>& f_v, const Tensor<T>& f_t, double tau) {
  return {num::softmax(scaled_scores(f_v, f_t, tau), 1), num::softmax(scaled_scores(f_t, f_v, tau), 1)};
}

template <typename T>
SimilarityMatrices<T> log_similarity_matrix(const Tensor<T>& f_v, const Tensor<T>& f_t, double tau) {
  return {num::log_softmax(scaled_scores(f_v, f_t, tau), 1), num::log_softmax(scaled_scores(f_t, f_v, tau), 1)};
}

template <typename T>
Tensor<T> contrastive_loss_from_log(const Tensor<T>& log_i2t, const Tensor<T>& log_t2i) {
  if (log_i2t.shape() != log_t2i.shape()) throw ShapeError("contrastive loss: matrix shapes differ");
  return num::scale(num::mean(num::add(diagonal(log_i2t), diagonal(log_t2i))), static_cast<T>(-0.5));
}

template <typename T>
Tensor<T> contrastive_loss(const Tensor<T>& s_i2t, const Tensor<T>& s_t2i) {
  if (s_i2t.shape() != s_t2i.shape()) throw ShapeError("contrastive loss: matrix shapes differ");
  return num::scale(num::mean(num::add(num::log(diagonal(s_i2t)), num::log(diagonal(s_t2i)))), static_cast<T>(-0.5));
}

ItmLossValue itm_loss(std::span<const ItmPrediction> predictions) {
  if (predictions.empty()) throw ShapeError("itm loss: no predictions");
  ItmLossValue out;
  for (const auto& p : predictions) {
    if (p.label != 0 && p.label != 1) throw ShapeError("itm loss: label must be 0 or 1");
    if (!(p.p_hat >= 0.0 && p.p_hat <= 1.0)) throw NumericError("itm loss: probability outside [0, 1]");
    double q = p.label == 1 ? p.p_hat : 1.0 - p.p_hat;
    if (q < kProbabilityFloor) {
      q = kProbabilityFloor;
      ++out.clamped;
    }
    out.loss -= std::log(q);
  }
  out.loss /= static_cast<double>(predictions.size());
  return out;
}

template <typename T>
Tensor<T> itm_loss(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.cols() != 2 || logits.rows() != labels.size()) {
    throw ShapeError("itm loss: expected [" + std::to_string(labels.size()) + "x2] logits, got " +
                     num::shape_string(logits.shape()));
  }
  std::vector<std::size_t> rows(labels.size()), cols(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ShapeError("itm loss: label must be 0 or 1");
    rows[i] = i;
    cols[i] = static_cast<std::size_t>(labels[i]);
  }
  const auto picked = num::pick(num::log_softmax(logits, 1), std::span<const std::size_t>(rows),
                                std::span<const std::size_t>(cols));
  return num::scale(num::mean(picked), static_cast<T>(-1));
}

template <typename T>
Tensor<T> mlm_loss(const Tensor<T>& logits, std::span<const std::size_t> rows, std::span<const std::uint32_t> targets) {
  if (rows.size() != targets.size()) throw ShapeError("mlm loss: rows and targets differ in length");
  if (rows.empty()) return Tensor<T>::scalar(T(0));
  if (logits.rank() != 2) throw ShapeError("mlm loss: logits must be a matrix");
  std::vector<std::size_t> cols(targets.begin(), targets.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= logits.rows()) throw ShapeError("mlm loss: row out of range");
    if (cols[i] >= logits.cols()) throw ShapeError("mlm loss: target id out of vocabulary");
  }
  const auto picked = num::pick(num::log_softmax(logits, 1), rows, std::span<const std::size_t>(cols));
  return num::scale(num::mean(picked), static_cast<T>(-1));
}

template <typename T>
Tensor<T> mlm_loss(const Tensor<T>& logits, const model::MaskedText& masked) {
  return mlm_loss(logits, std::span<const std::size_t>(masked.positions),
                  std::span<const std::uint32_t>(masked.original_ids));
}

model::MaskedText mask_tokens(const model::TextInput& text, double rate, std::mt19937_64& rng,
                              std::size_t vocab_size) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("mask rate must lie in [0, 1]", "mask_rate");
  if (vocab_size <= model::kNumSpecialTokens) throw ConfigError("vocabulary has no maskable tokens", "vocab_size");
  model::MaskedText out;
  out.text = text;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> random_token(model::kNumSpecialTokens,
                                                            static_cast<std::uint32_t>(vocab_size - 1));
  for (std::size_t i = 0; i < text.tokens.size(); ++i) {
    const auto id = text.tokens[i];
    if (model::is_special_token(id)) continue;
    if (!(unit(rng) < rate)) continue;
    const double r = unit(rng);
    model::MaskAction action = model::MaskAction::kKeep;
    if (r < 0.8) {
      action = model::MaskAction::kMask;
      out.text.tokens[i] = model::kMaskToken;
    } else if (r < 0.9) {
      action = model::MaskAction::kRandom;
      out.text.tokens[i] = random_token(rng);
    }
    out.positions.push_back(i);
    out.original_ids.push_back(id);
    out.actions.push_back(action);
  }
  return out;
}

template <typename T>
LossTerms<T> total_loss(const corpus::TrainingBatch& batch, std::span<const corpus::CorpusRecord> records,
                        const model::CmpModel<T>& model, const LossConfig& config) {
  if (batch.positives.empty()) throw ShapeError("total loss: empty batch");
  std::unordered_map<std::size_t, Tensor<T>> visual, text;
  auto record_at = [&](std::size_t pos) -> const corpus::CorpusRecord& {
    if (pos >= records.size()) throw ShapeError("total loss: record position out of range");
    return records[pos];
  };
  auto visual_of = [&](std::size_t pos) {
    auto it = visual.find(pos);
    if (it == visual.end()) {
      const auto& r = record_at(pos);
      it = visual.emplace(pos, model.encode_visual(r.image, r.pose)).first;
    }
    return it->second;
  };
  auto text_of = [&](std::size_t pos) {
    auto it = text.find(pos);
    if (it == text.end()) it = text.emplace(pos, model.encode_text(record_at(pos).caption)).first;
    return it->second;
  };

  std::vector<Tensor<T>> pooled_v, pooled_t, itm_rows;
  std::vector<int> labels;
  for (const auto pos : batch.positives) {
    const auto f_v = visual_of(pos);
    const auto f_t = text_of(pos);
    pooled_v.push_back(model.pool_image(f_v));
    pooled_t.push_back(model.pool_text(f_t));
    itm_rows.push_back(model.itm_logits(model.cross_hidden(f_v, f_t)));
    labels.push_back(1);
  }
  for (const auto& neg : batch.negatives) {
    itm_rows.push_back(model.itm_logits(model.cross_hidden(visual_of(neg.image), text_of(neg.text))));
    labels.push_back(0);
  }

  const auto sims = log_similarity_matrix(num::concat_rows(pooled_v), num::concat_rows(pooled_t), config.tau);
  const auto l_cl = contrastive_loss_from_log(sims.i2t, sims.t2i);
  const auto l_itm = itm_loss(num::concat_rows(itm_rows), std::span<const int>(labels));

  std::vector<Tensor<T>> mlm_rows;
  std::vector<std::uint32_t> targets;
  if (!batch.masked_texts.empty() && batch.masked_texts.size() != batch.positives.size()) {
    throw ShapeError("total loss: one masked text per positive expected");
  }
  for (std::size_t i = 0; i < batch.masked_texts.size(); ++i) {
    const auto& masked = batch.masked_texts[i];
    if (masked.positions.empty()) continue;
    const auto hidden = model.cross_hidden(visual_of(batch.positives[i]), model.encode_text(masked.text));
    mlm_rows.push_back(model.mlm_logits(hidden, std::span<const std::size_t>(masked.positions)));
    targets.insert(targets.end(), masked.original_ids.begin(), masked.original_ids.end());
  }
  Tensor<T> l_mlm = Tensor<T>::scalar(T(0));
  if (!targets.empty()) {
    std::vector<std::size_t> rows(targets.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    l_mlm = mlm_loss(num::concat_rows(mlm_rows), std::span<const std::size_t>(rows),
                     std::span<const std::uint32_t>(targets));
  }

  LossTerms<T> out;
  out.total = num::add(num::add(l_cl, l_itm), l_mlm);
  out.report.l_cl = static_cast<double>(l_cl.item());
  out.report.l_itm = static_cast<double>(l_itm.item());
  out.report.l_mlm = static_cast<double>(l_mlm.item());
  out.report.l_total = static_cast<double>(out.total.item());
  return out;
}

#define CMP_INSTANTIATE_LOSSES(T)                                                                             \
  template SimilarityMatrices<T> similarity_matrix(const Tensor<T>&, const Tensor<T>&, double);              \
  template SimilarityMatrices<T> log_similarity_matrix(const Tensor<T>&, const Tensor<T>&, double);          \
  template Tensor<T> contrastive_loss(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> contrastive_loss_from_log(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> itm_loss(const Tensor<T>&, std::span<const int>);                                      \
  template Tensor<T> mlm_loss(const Tensor<T>&, std::span<const std::size_t>, std::span<const std::uint32_t>); \
  template Tensor<T> mlm_loss(const Tensor<T>&, const model::MaskedText&);                                  \
  template LossTerms<T> total_loss(const corpus::TrainingBatch&, std::span<const corpus::CorpusRecord>,      \
                                   const model::CmpModel<T>&, const LossConfig&);

CMP_INSTANTIATE_LOSSES(float)
CMP_INSTANTIATE_LOSSES(double)

}  // namespace cmp::obj
