#include <cmath>
#include <random>

#include "cmp/common/error.hpp"
#include "cmp/corpus/generator.hpp"
#include "cmp/corpus/sampling.hpp"
#include "cmp/numerics/ops.hpp"
#include "cmp/objectives/losses.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cmp;
using num::Tensor;
using testing::random_tensor;

namespace {

Tensor<double> unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  return num::l2_normalize_rows(random_tensor({n, d}, seed, 1.0, false));
}

double dot_row(const Tensor<double>& a, std::size_t i, const Tensor<double>& b, std::size_t j) {
  double s = 0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(i, c) * b.at(j, c);
  return s;
}

/// Row-softmax of dot(a_i, b_j)/tau computed entry by entry.
std::vector<std::vector<double>> softmax_oracle(const Tensor<double>& a, const Tensor<double>& b, double tau) {
  std::vector<std::vector<double>> out(a.rows(), std::vector<double>(b.rows()));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double z = 0;
    for (std::size_t j = 0; j < b.rows(); ++j) z += out[i][j] = std::exp(dot_row(a, i, b, j) / tau);
    for (auto& v : out[i]) v /= z;
  }
  return out;
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.model_dim = 16;
  c.heads = 2;
  c.fusion_heads = 2;
  c.ffn_dim = 32;
  c.image_blocks = c.text_blocks = c.cross_blocks = 1;
  c.proj_dim = 16;
  return c;
}

corpus::GeneratedCorpus tiny_corpus(std::size_t identities, std::uint64_t seed) {
  corpus::CorpusConfig cc;
  cc.n_identities = identities;
  cc.ratio_normal = 1;
  cc.ratio_anomaly = 1;
  cc.test_identities = 1;
  cc.image_size = 8;
  cc.seed = seed;
  return corpus::generate_corpus(cc);
}

}  // namespace

TEST_CASE("single-pair similarity is one") {
  const auto f = unit_rows(1, 4, 1);
  const auto s = obj::similarity_matrix(f, unit_rows(1, 4, 2), 0.07);
  CHECK(s.i2t.item() == 1.0);
  CHECK(s.t2i.item() == 1.0);
}

TEST_CASE("similarity matrices match the direct formula") {
  const auto fv = unit_rows(3, 5, 3), ft = unit_rows(3, 5, 4);
  const auto s = obj::similarity_matrix(fv, ft, 0.07);
  const auto i2t = softmax_oracle(fv, ft, 0.07), t2i = softmax_oracle(ft, fv, 0.07);
  for (std::size_t i = 0; i < 3; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(s.i2t.at(i, j) == doctest::Approx(i2t[i][j]).epsilon(1e-10));
      CHECK(s.t2i.at(i, j) == doctest::Approx(t2i[i][j]).epsilon(1e-10));
      row += s.i2t.at(i, j);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
  }
  const auto logs = obj::log_similarity_matrix(fv, ft, 0.07);
  for (std::size_t i = 0; i < 9; ++i) CHECK(std::exp(logs.i2t.data()[i]) == doctest::Approx(s.i2t.data()[i]));
}

TEST_CASE("similarity rejects a non-positive temperature") {
  const auto f = unit_rows(2, 3, 5);
  for (double tau : {0.0, -0.1}) {
    try {
      obj::similarity_matrix(f, f, tau);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "tau");
    }
  }
}

TEST_CASE("temperature preserves the per-row argmax") {
  const auto fv = unit_rows(6, 4, 6), ft = unit_rows(6, 4, 7);
  for (double tau : {0.01, 0.07, 1.0, 10.0}) {
    const auto s = obj::similarity_matrix(fv, ft, tau);
    for (std::size_t i = 0; i < 6; ++i) {
      std::size_t best_s = 0, best_raw = 0;
      for (std::size_t j = 1; j < 6; ++j) {
        if (s.i2t.at(i, j) > s.i2t.at(i, best_s)) best_s = j;
        if (dot_row(fv, i, ft, j) > dot_row(fv, i, ft, best_raw)) best_raw = j;
      }
      CHECK(best_s == best_raw);
    }
  }
}

TEST_CASE("swapping modalities swaps the matrices") {
  const auto fv = unit_rows(4, 3, 8), ft = unit_rows(4, 3, 9);
  const auto a = obj::similarity_matrix(fv, ft, 0.5), b = obj::similarity_matrix(ft, fv, 0.5);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(a.i2t.data()[i] == b.t2i.data()[i]);
    CHECK(a.t2i.data()[i] == b.i2t.data()[i]);
  }
}

TEST_CASE("contrastive loss examples") {
  const std::size_t n = 5;
  const auto uniform = Tensor<double>::full({n, n}, 1.0 / n);
  CHECK(obj::contrastive_loss(uniform, uniform).item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  std::vector<double> sims(n * n, -1.0);
  for (std::size_t i = 0; i < n; ++i) sims[i * n + i] = 1.0;
  const Tensor<double> sharp_scores({n, n}, sims);
  double previous = 1e9;
  for (double tau : {1.0, 0.1, 0.01}) {
    const auto s = num::softmax(num::scale(sharp_scores, 1.0 / tau), 1);
    const double loss = obj::contrastive_loss(s, s).item();
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-12);

  const auto fv = unit_rows(4, 6, 10), ft = unit_rows(4, 6, 11);
  const auto s = obj::similarity_matrix(fv, ft, 0.2);
  const auto i2t = softmax_oracle(fv, ft, 0.2), t2i = softmax_oracle(ft, fv, 0.2);
  double ref = 0;
  for (std::size_t i = 0; i < 4; ++i) ref -= 0.5 * (std::log(i2t[i][i]) + std::log(t2i[i][i])) / 4.0;
  CHECK(obj::contrastive_loss(s.i2t, s.t2i).item() == doctest::Approx(ref).epsilon(1e-10));
  const auto logs = obj::log_similarity_matrix(fv, ft, 0.2);
  CHECK(obj::contrastive_loss_from_log(logs.i2t, logs.t2i).item() == doctest::Approx(ref).epsilon(1e-10));

  const Tensor<double> zero_diag({2, 2}, {0.0, 1.0, 1.0, 0.0});
  CHECK_THROWS_AS(obj::contrastive_loss(zero_diag, zero_diag), NumericError);
}

TEST_CASE("itm loss examples") {
  const std::vector<obj::ItmPrediction> perfect{{1.0, 1}};
  CHECK(obj::itm_loss(perfect).loss == 0.0);
  const std::vector<obj::ItmPrediction> half_pos{{0.5, 1}}, half_neg{{0.5, 0}};
  CHECK(obj::itm_loss(half_pos).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(obj::itm_loss(half_neg).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const std::vector<obj::ItmPrediction> wrong{{0.0, 1}, {1.0, 0}, {0.3, 1}};
  const auto v = obj::itm_loss(wrong);
  CHECK(v.clamped == 2);
  CHECK(std::isfinite(v.loss));
  CHECK(v.loss == doctest::Approx((2 * -std::log(1e-12) - std::log(0.3)) / 3));

  std::vector<obj::ItmPrediction> twice{{0.2, 1}, {0.9, 0}, {0.6, 1}};
  const double once = obj::itm_loss(twice).loss;
  const auto copy = twice;
  twice.insert(twice.end(), copy.begin(), copy.end());
  CHECK(obj::itm_loss(twice).loss == doctest::Approx(once).epsilon(1e-15));

  CHECK_THROWS_AS(obj::itm_loss(std::vector<obj::ItmPrediction>{}), ShapeError);
  CHECK_THROWS_AS(obj::itm_loss(std::vector<obj::ItmPrediction>{{0.5, 2}}), ShapeError);
}

TEST_CASE("itm tensor loss agrees with the probability form") {
  const auto logits = random_tensor({4, 2}, 12, 1.0, false);
  const std::vector<int> labels{1, 0, 1, 0};
  const auto p = num::softmax(logits, 1);
  std::vector<obj::ItmPrediction> preds;
  for (std::size_t i = 0; i < 4; ++i) preds.push_back({p.at(i, 1), labels[i]});
  CHECK(obj::itm_loss(logits, std::span<const int>(labels)).item() ==
        doctest::Approx(obj::itm_loss(preds).loss).epsilon(1e-12));
}

TEST_CASE("mlm loss examples") {
  const std::size_t v = 512;
  const std::vector<std::size_t> rows{0, 2};
  const std::vector<std::uint32_t> targets{7, 300};
  const auto uniform = Tensor<double>::zeros({3, v});
  CHECK(obj::mlm_loss(uniform, std::span<const std::size_t>(rows), std::span<const std::uint32_t>(targets)).item() ==
        doctest::Approx(std::log(512.0)).epsilon(1e-12));

  std::vector<double> peaked(3 * v, -1e3);
  peaked[0 * v + 7] = 1e3;
  peaked[2 * v + 300] = 1e3;
  CHECK(obj::mlm_loss(Tensor<double>({3, v}, peaked), std::span<const std::size_t>(rows),
                      std::span<const std::uint32_t>(targets))
            .item() == doctest::Approx(0.0));

  const auto logits = random_tensor({3, v}, 13, 2.0, false);
  double ref = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    double z = 0;
    for (std::size_t c = 0; c < v; ++c) z += std::exp(logits.at(rows[k], c));
    ref -= (logits.at(rows[k], targets[k]) - std::log(z)) / rows.size();
  }
  const double loss =
      obj::mlm_loss(logits, std::span<const std::size_t>(rows), std::span<const std::uint32_t>(targets)).item();
  CHECK(loss == doctest::Approx(ref).epsilon(1e-10));

  // Row 1 is not scored, so rewriting it leaves the loss unchanged.
  auto edited = testing::values(logits);
  for (std::size_t c = 0; c < v; ++c) edited[v + c] = 50.0 * std::sin(double(c));
  CHECK(obj::mlm_loss(Tensor<double>({3, v}, edited), std::span<const std::size_t>(rows),
                      std::span<const std::uint32_t>(targets))
            .item() == loss);

  const std::vector<std::size_t> none;
  const std::vector<std::uint32_t> no_targets;
  CHECK(obj::mlm_loss(logits, std::span<const std::size_t>(none), std::span<const std::uint32_t>(no_targets)).item() ==
        0.0);
}

TEST_CASE("masking degenerate cases") {
  std::mt19937_64 rng(14);
  const model::TextInput text{{0, 10, 11, 12, 3, 13}};
  const auto same = obj::mask_tokens(text, 0.0, rng);
  CHECK(same.text.tokens == text.tokens);
  CHECK(same.positions.empty());
  CHECK(same.original_ids.empty());

  const model::TextInput specials{{0, 1, 1, 1}};
  const auto all = obj::mask_tokens(specials, 1.0, rng);
  CHECK(all.text.tokens == specials.tokens);
  CHECK(all.positions.empty());

  const auto full = obj::mask_tokens(text, 1.0, rng);
  CHECK(full.positions == std::vector<std::size_t>{1, 2, 3, 5});
  CHECK(full.original_ids == std::vector<std::uint32_t>{10, 11, 12, 13});
  for (std::size_t k = 0; k < full.positions.size(); ++k) {
    const auto tok = full.text.tokens[full.positions[k]];
    switch (full.actions[k]) {
      case model::MaskAction::kMask: CHECK(tok == model::kMaskToken); break;
      case model::MaskAction::kKeep: CHECK(tok == full.original_ids[k]); break;
      case model::MaskAction::kRandom: CHECK(!model::is_special_token(tok)); break;
    }
  }
  CHECK(full.text.tokens[4] == model::kSepToken);
}

TEST_CASE("masking statistics on a short run") {
  std::mt19937_64 rng(15);
  model::TextInput text{{0}};
  for (std::uint32_t i = 0; i < 50; ++i) text.tokens.push_back(4 + i);
  std::size_t selected = 0, masked = 0, randomized = 0, total = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = obj::mask_tokens(text, 0.25, rng);
    total += 50;
    selected += m.positions.size();
    for (auto a : m.actions) {
      masked += a == model::MaskAction::kMask;
      randomized += a == model::MaskAction::kRandom;
    }
  }
  CHECK(double(selected) / total == doctest::Approx(0.25).epsilon(0.04));
  CHECK(double(masked) / selected == doctest::Approx(0.8).epsilon(0.04));
  CHECK(double(randomized) / selected == doctest::Approx(0.1).epsilon(0.3));
}

TEST_CASE("total loss is the sum of its parts") {
  const auto corpus = tiny_corpus(4, 16);
  const model::CmpModel<double> m(tiny_model(), 17);
  std::mt19937_64 rng(18);
  auto batch = corpus::build_batch(corpus.records, corpus.index, {0, 2, 4, 6}, rng, true);
  for (auto pos : batch.positives) batch.masked_texts.push_back(obj::mask_tokens(corpus.records[pos].caption, 0.5, rng));
  const auto terms = obj::total_loss(batch, std::span<const corpus::CorpusRecord>(corpus.records), m);
  const auto& r = terms.report;
  CHECK(r.l_total == doctest::Approx(r.l_cl + r.l_itm + r.l_mlm).epsilon(1e-9));
  CHECK(terms.total.item() == doctest::Approx(r.l_total).epsilon(1e-12));
  CHECK(r.l_cl > 0.0);
  CHECK(r.l_itm > 0.0);
  CHECK(r.l_mlm > 0.0);

  batch.masked_texts.clear();
  const auto no_mlm = obj::total_loss(batch, std::span<const corpus::CorpusRecord>(corpus.records), m);
  CHECK(no_mlm.report.l_mlm == 0.0);
  CHECK(no_mlm.report.l_cl == r.l_cl);
}

TEST_CASE("contrastive loss of an untrained default-size model is near log N") {
  corpus::CorpusConfig cc;
  cc.n_identities = 8;
  cc.ratio_normal = 1;
  cc.ratio_anomaly = 1;
  cc.test_identities = 1;
  cc.seed = 19;
  const auto corpus = corpus::generate_corpus(cc);
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const model::CmpModel<float> m(model::ModelConfig{}, 100 + seed);
    std::mt19937_64 rng(seed);
    const auto batch = corpus::sample_batch_ihnm(corpus.records, corpus.index, 8, rng, true);
    const auto terms = obj::total_loss(batch, std::span<const corpus::CorpusRecord>(corpus.records), m);
    worst = std::max(worst, std::abs(terms.report.l_cl - std::log(8.0)));
  }
  CHECK(worst < 0.5);
}
