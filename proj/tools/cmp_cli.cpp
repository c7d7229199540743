#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cmp/cli/commands.hpp"
#include "cmp/common/error.hpp"

namespace {

using namespace cmp;

bool parse_switch(const std::string& value, const char* flag) {
  if (value == "on" || value == "true") return true;
  if (value == "off" || value == "false") return false;
  throw ConfigError(std::string(flag) + ": expected on or off, got '" + value + "'", flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose-aware text-based person anomaly search: corpus generation, training, evaluation and search"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--config", config_path, "TOML-style run config (defaults when omitted)");
  app.add_option("--seed", seed, "Overrides [corpus] seed for gen-corpus and [train] seed otherwise");
  app.add_option("--out", out, "Output directory (report file for eval)");

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic corpus, pair index and report");

  auto* train = app.add_subcommand("train", "Train a model on a generated corpus");
  std::string corpus_dir, ihnm, pose;
  std::optional<std::size_t> epochs;
  bool resume = false;
  std::size_t stop_after = 0;
  train->add_option("--corpus", corpus_dir, "Corpus directory from gen-corpus")->required();
  train->add_option("--ihnm", ihnm, "Identity-based hard negatives: on|off");
  train->add_option("--pose", pose, "Pose encoder and fusion: on|off");
  train->add_option("--epochs", epochs, "Overrides [train] epochs");
  train->add_flag("--resume", resume, "Continue from the checkpoint in --out");
  train->add_option("--stop-after", stop_after, "Stop once this many epochs are complete (schedule unchanged)");

  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint and emit a metrics report");
  std::string checkpoint, setting, split = "test", ranks;
  std::optional<std::size_t> shortlist_k;
  evalc->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  evalc->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  evalc->add_option("--setting", setting, "behavior|identity");
  evalc->add_option("--shortlist-k", shortlist_k, "Stage-1 shortlist size for ITM reranking");
  evalc->add_option("--split", split, "train|test");
  evalc->add_option("--ranks", ranks, "Write per-query rank lists as CSV");

  auto* searchc = app.add_subcommand("search", "Rank gallery images for one text query");
  std::string query;
  std::size_t top_k = 5;
  searchc->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  searchc->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  searchc->add_option("--query", query, "Query sentence")->required();
  searchc->add_option("--top-k", top_k, "Rows to print");
  searchc->add_option("--shortlist-k", shortlist_k, "Stage-1 shortlist size for ITM reranking");
  searchc->add_option("--split", split, "train|test");

  CLI11_PARSE(app, argc, argv);

  try {
    auto config = cli::load_run_config(config_path);
    if (*gen) {
      if (seed) config.corpus.seed = *seed;
      if (out.empty()) throw ConfigError("--out: gen-corpus needs an output directory", "--out");
      cli::gen_corpus(config, out, std::cout);
    } else if (*train) {
      if (seed) config.train.seed = *seed;
      if (!ihnm.empty()) config.train.ihnm = parse_switch(ihnm, "--ihnm");
      if (!pose.empty()) config.model.pose_enabled = parse_switch(pose, "--pose");
      if (epochs) config.train.epochs = *epochs;
      if (out.empty()) throw ConfigError("--out: train needs an output directory", "--out");
      cli::train(config, {corpus_dir, out, resume, stop_after}, std::cout);
    } else if (*evalc) {
      cli::EvalOptions options;
      options.checkpoint_dir = checkpoint;
      options.corpus_dir = corpus_dir;
      options.split = split;
      options.setting = setting.empty() ? config.eval.setting : eval::parse_setting(setting);
      options.shortlist_k = shortlist_k.value_or(config.eval.shortlist_k);
      if (!config_path.empty()) options.expected = config;
      options.report_path = out;
      options.ranks_path = ranks;
      std::cout << cli::evaluate_checkpoint(options).to_json().dump(2) << '\n';
    } else if (*searchc) {
      cli::SearchOptions options;
      options.checkpoint_dir = checkpoint;
      options.corpus_dir = corpus_dir;
      options.split = split;
      options.query = query;
      options.top_k = top_k;
      options.shortlist_k = shortlist_k.value_or(config.eval.shortlist_k);
      cli::search(options, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.field() << "]: " << e.what() << '\n';
    return cli::kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return cli::kExitDiverged;
  } catch (const cli::HashMismatch& e) {
    std::cerr << "hash mismatch: " << e.what() << '\n';
    return cli::kExitHashMismatch;
  } catch (const cli::UnknownTokens& e) {
    std::cerr << "unknown tokens:";
    for (const auto& w : e.words()) std::cerr << ' ' << w;
    std::cerr << '\n';
    return cli::kExitUnknownTokens;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitIo;
  }
  return cli::kExitOk;
}
