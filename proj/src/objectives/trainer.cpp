#include "cmp/objectives/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "cmp/corpus/generator.hpp"
#include "cmp/corpus/sampling.hpp"

namespace cmp::obj {

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2", "batch_size");
  if (!(lr_start >= 0.0) || !std::isfinite(lr_start)) throw ConfigError("lr_start must be non-negative", "lr_start");
  if (!(lr_end >= 0.0) || !std::isfinite(lr_end)) throw ConfigError("lr_end must be non-negative", "lr_end");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative", "weight_decay");
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw ConfigError("mask_rate must lie in [0, 1]", "mask_rate");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive", "tau");
}

Trainer::Trainer(model::CmpModel<float>& model, TrainConfig config, std::span<const corpus::CorpusRecord> records,
                 const corpus::PairIndex& index)
    : model_(model),
      config_(config),
      records_(records),
      index_(index),
      optimizer_(model.parameters(), AdamWConfig{.weight_decay = config.weight_decay}) {
  config_.validate();
  if (records_.size() < config_.batch_size) {
    throw ConfigError("corpus has " + std::to_string(records_.size()) + " records, fewer than batch_size " +
                          std::to_string(config_.batch_size),
                      "batch_size");
  }
  schedule_ = LrSchedule{config_.lr_start, config_.lr_end, config_.warmup_steps, total_steps()};
}

std::vector<std::vector<std::size_t>> Trainer::epoch_batches(std::size_t epoch) const {
  std::vector<std::size_t> order(records_.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(corpus::mix_seed(config_.seed, 0xE90C0000ULL + epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < order.size(); at += config_.batch_size) {
    const std::size_t end = std::min(order.size(), at + config_.batch_size);
    if (end - at < 2) {
      batches.back().insert(batches.back().end(), order.begin() + at, order.begin() + end);
    } else {
      batches.emplace_back(order.begin() + at, order.begin() + end);
    }
  }
  return batches;
}

std::size_t Trainer::steps_per_epoch() const {
  const std::size_t n = records_.size(), b = config_.batch_size;
  const std::size_t full = n / b, rest = n % b;
  return full + (rest >= 2 ? 1 : 0);
}

EpochLoss Trainer::run_epoch() {
  const std::size_t epoch = epochs_completed_;
  const auto batches = epoch_batches(epoch);
  std::mt19937_64 rng(corpus::mix_seed(config_.seed, 0xBA7C0000ULL + epoch));
  const LossConfig loss_config{config_.tau};
  const auto vocab = model_.config().vocab_size;

  EpochLoss out;
  out.epoch = epoch + 1;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const std::size_t step = epoch * steps_per_epoch() + b;
    auto batch = corpus::build_batch(records_, index_, batches[b], rng, config_.ihnm);
    for (const auto pos : batch.positives) {
      batch.masked_texts.push_back(mask_tokens(records_[pos].caption, config_.mask_rate, rng, vocab));
    }
    const double lr = schedule_.at(step);
    try {
      auto terms = total_loss(batch, records_, model_, loss_config);
      terms.total.backward();
      optimizer_.step(lr);
      out.loss.l_cl += terms.report.l_cl;
      out.loss.l_itm += terms.report.l_itm;
      out.loss.l_mlm += terms.report.l_mlm;
      out.loss.l_total += terms.report.l_total;
    } catch (const NumericError& e) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) + ", step " +
                                 std::to_string(step) + ": " + e.what(),
                             epoch + 1, step);
    }
    out.lr = lr;
  }
  const double n = static_cast<double>(batches.size());
  out.loss.l_cl /= n;
  out.loss.l_itm /= n;
  out.loss.l_mlm /= n;
  out.loss.l_total /= n;
  ++epochs_completed_;
  return out;
}

std::vector<EpochLoss> Trainer::run(const std::function<void(const EpochLoss&)>& on_epoch) {
  std::vector<EpochLoss> curve;
  while (epochs_completed_ < config_.epochs) {
    curve.push_back(run_epoch());
    if (on_epoch) on_epoch(curve.back());
  }
  return curve;
}

void write_loss_csv_header(std::ostream& out) { out << "epoch,l_cl,l_itm,l_mlm,l_total,lr\n"; }

void write_loss_csv_row(std::ostream& out, const EpochLoss& row) {
  const auto old = out.precision(10);
  out << row.epoch << ',' << row.loss.l_cl << ',' << row.loss.l_itm << ',' << row.loss.l_mlm << ','
      << row.loss.l_total << ',' << row.lr << '\n';
  out.precision(old);
}

}  // namespace cmp::obj
