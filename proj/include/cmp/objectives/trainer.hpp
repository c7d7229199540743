#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cmp/common/error.hpp"
#include "cmp/corpus/types.hpp"
#include "cmp/model/cmp_model.hpp"
#include "cmp/objectives/losses.hpp"
#include "cmp/objectives/optimizer.hpp"

namespace cmp::obj {

struct TrainConfig {
  std::size_t batch_size = 22;
  std::size_t epochs = 30;
  double lr_start = 1e-4;
  double lr_end = 1e-5;
  std::size_t warmup_steps = 500;
  double weight_decay = 0.01;
  double mask_rate = 0.25;
  double tau = 0.07;
  bool ihnm = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLoss {
  std::size_t epoch = 0;
  LossReport loss;  // mean over the epoch's batches
  double lr = 0.0;  // rate of the epoch's last step
};

/// Training stopped because a loss or parameter became non-finite.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch, std::size_t step)
      : NumericError(what), epoch_(epoch), step_(step) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
};

/// Epoch-based trainer. Each epoch shuffles the corpus with a generator seeded
/// from (seed, epoch), so a run restored at an epoch boundary continues
/// exactly as an uninterrupted one.
class Trainer {
 public:
  Trainer(model::CmpModel<float>& model, TrainConfig config, std::span<const corpus::CorpusRecord> records,
          const corpus::PairIndex& index);

  /// Corpus positions of each batch of the given epoch.
  std::vector<std::vector<std::size_t>> epoch_batches(std::size_t epoch) const;
  std::size_t steps_per_epoch() const;
  std::size_t total_steps() const { return steps_per_epoch() * config_.epochs; }
  const LrSchedule& schedule() const { return schedule_; }

  EpochLoss run_epoch();
  /// Runs the remaining epochs up to config.epochs.
  std::vector<EpochLoss> run(const std::function<void(const EpochLoss&)>& on_epoch = {});

  std::size_t epochs_completed() const { return epochs_completed_; }
  AdamW<float>& optimizer() { return optimizer_; }
  const TrainConfig& config() const { return config_; }
  /// Continues after `epochs` finished epochs; optimizer state is restored separately.
  void resume_at(std::size_t epochs) { epochs_completed_ = epochs; }

 private:
  model::CmpModel<float>& model_;
  TrainConfig config_;
  std::span<const corpus::CorpusRecord> records_;
  const corpus::PairIndex& index_;
  AdamW<float> optimizer_;
  LrSchedule schedule_;
  std::size_t epochs_completed_ = 0;
};

void write_loss_csv_header(std::ostream& out);
void write_loss_csv_row(std::ostream& out, const EpochLoss& row);

}  // namespace cmp::obj
