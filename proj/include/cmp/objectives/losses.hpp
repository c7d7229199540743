#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cmp/corpus/sampling.hpp"
#include "cmp/model/cmp_model.hpp"

namespace cmp::obj {

using num::Tensor;

template <typename T>
struct SimilarityMatrices {
  Tensor<T> i2t;  // row i: softmax_j s(v_i, t_j)/τ
  Tensor<T> t2i;  // row i: softmax_j s(t_i, v_j)/τ
};

/// Rows of f_v / f_t are unit-norm pooled features, so s(·,·) is a dot product.
template <typename T>
SimilarityMatrices<T> similarity_matrix(const Tensor<T>& f_v, const Tensor<T>& f_t, double tau);
/// Same matrices in log space (log-softmax), used by the training loss.
template <typename T>
SimilarityMatrices<T> log_similarity_matrix(const Tensor<T>& f_v, const Tensor<T>& f_t, double tau);

/// mean_i -½ (log S_I2T[i][i] + log S_T2I[i][i]).
template <typename T>
Tensor<T> contrastive_loss(const Tensor<T>& s_i2t, const Tensor<T>& s_t2i);
template <typename T>
Tensor<T> contrastive_loss_from_log(const Tensor<T>& log_i2t, const Tensor<T>& log_t2i);

struct ItmPrediction {
  double p_hat = 0.5;
  int label = 0;
};

struct ItmLossValue {
  double loss = 0.0;
  /// Predictions whose probability hit 0 against the label and were clamped to 1e-12.
  std::size_t clamped = 0;
};

/// Mean binary cross-entropy over (p̂, p) predictions.
ItmLossValue itm_loss(std::span<const ItmPrediction> predictions);
/// Differentiable form on ITM head logits [M×2]; column 1 is "match".
template <typename T>
Tensor<T> itm_loss(const Tensor<T>& logits, std::span<const int> labels);

/// Mean cross-entropy of logits[rows[i]] against targets[i]. Zero (and not
/// gradient-tracking) when there are no rows.
template <typename T>
Tensor<T> mlm_loss(const Tensor<T>& logits, std::span<const std::size_t> rows,
                   std::span<const std::uint32_t> targets);
template <typename T>
Tensor<T> mlm_loss(const Tensor<T>& logits, const model::MaskedText& masked);

/// Selects each non-special token with probability `rate`; selected tokens
/// become [MASK] (80%), a uniform random non-special token (10%) or stay (10%).
model::MaskedText mask_tokens(const model::TextInput& text, double rate, std::mt19937_64& rng,
                              std::size_t vocab_size = 512);

struct LossReport {
  double l_cl = 0.0;
  double l_itm = 0.0;
  double l_mlm = 0.0;
  double l_total = 0.0;
};

template <typename T>
struct LossTerms {
  Tensor<T> total;
  LossReport report;
};

struct LossConfig {
  double tau = 0.07;
};

/// Unweighted sum of contrastive, ITM (positives plus batch.negatives) and
/// MLM (batch.masked_texts) losses.
template <typename T>
LossTerms<T> total_loss(const corpus::TrainingBatch& batch, std::span<const corpus::CorpusRecord> records,
                        const model::CmpModel<T>& model, const LossConfig& config = {});

}  // namespace cmp::obj
