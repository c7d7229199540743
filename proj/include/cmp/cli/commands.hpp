#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "cmp/cli/run_config.hpp"

namespace cmp::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,
  kExitDiverged = 3,
  kExitHashMismatch = 4,
  kExitUnknownTokens = 5,
};

/// Artifacts of two runs are incompatible.
class HashMismatch : public std::runtime_error {
 public:
  explicit HashMismatch(const std::string& what) : std::runtime_error(what) {}
};

/// A query contains words outside the vocabulary.
class UnknownTokens : public std::runtime_error {
 public:
  UnknownTokens(const std::string& what, std::vector<std::string> words)
      : std::runtime_error(what), words_(std::move(words)) {}
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
};

inline constexpr const char* kTrainManifest = "manifest.jsonl";
inline constexpr const char* kTestManifest = "test_manifest.jsonl";
inline constexpr const char* kPairIndexFile = "pair_index.json";
inline constexpr const char* kReportFile = "generation_report.json";
inline constexpr const char* kCheckpointDir = "checkpoint";
inline constexpr const char* kLossCurveFile = "loss.csv";
inline constexpr const char* kConfigSnapshot = "config.toml";

/// Writes both splits, the pair index, the generation report and a config snapshot.
void gen_corpus(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

struct TrainOptions {
  std::filesystem::path corpus_dir;
  std::filesystem::path out_dir;
  bool resume = false;
  /// Stops once this many epochs are complete (0: run all). The learning-rate
  /// schedule still spans the configured epochs, so a later --resume continues
  /// exactly as an uninterrupted run.
  std::size_t stop_after = 0;
};

/// Trains on the corpus's train split, checkpointing after every epoch into
/// <out>/checkpoint and appending to <out>/loss.csv.
void train(const RunConfig& config, const TrainOptions& options, std::ostream& log);

struct EvalOptions {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path corpus_dir;
  std::string split = "test";
  eval::Setting setting = eval::Setting::kBehaviorMatch;
  std::size_t shortlist_k = eval::kDefaultShortlist;
  /// When set, the run config must match the checkpoint's.
  std::optional<RunConfig> expected;
  std::filesystem::path report_path;
  std::filesystem::path ranks_path;
};

eval::MetricsReport evaluate_checkpoint(const EvalOptions& options);

struct SearchOptions {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path corpus_dir;
  std::string split = "test";
  std::string query;
  std::size_t top_k = 5;
  std::size_t shortlist_k = eval::kDefaultShortlist;
};

/// Prints a rank table (rank, record_id, sim, itm_prob) of the top_k results.
eval::RankingResult search(const SearchOptions& options, std::ostream& out);

/// Loads a checkpoint's model using the configuration stored with it.
struct LoadedCheckpoint {
  RunConfig config;
  std::unique_ptr<model::CmpModel<float>> model;
  std::string corpus_hash;
  std::string model_hash;
  std::string weights_hash;
};
LoadedCheckpoint load_model_checkpoint(const std::filesystem::path& dir);

}  // namespace cmp::cli
