#include "cmp/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "cmp/common/error.hpp"
#include "cmp/corpus/manifest.hpp"
#include "cmp/corpus/vocabulary.hpp"
#include "cmp/objectives/checkpoint.hpp"

namespace cmp::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string manifest_for(const std::string& split) {
  if (split == "test") return kTestManifest;
  if (split == "train") return kTrainManifest;
  throw ConfigError("unknown split '" + split + "' (expected train or test)", "split");
}

nlohmann::json checkpoint_meta(const RunConfig& config, std::size_t epochs_completed) {
  return {{"config_hash", config.model_hash()},
          {"corpus_hash", config.corpus_hash()},
          {"training_hash", config.training_hash()},
          {"epochs_completed", epochs_completed},
          {"run_config", config.to_text()}};
}

/// Keeps the header and the first `epochs` rows of an existing loss curve.
void truncate_loss_curve(const fs::path& path, std::size_t epochs) {
  std::istringstream in(read_file(path));
  std::string line, kept;
  for (std::size_t n = 0; n <= epochs && std::getline(in, line); ++n) kept += line + '\n';
  write_file(path, kept);
}

}  // namespace

void gen_corpus(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  config.validate();
  ensure_dir(out_dir);
  const std::string hash = config.corpus_hash();
  const auto train = corpus::generate_corpus(config.corpus);
  const auto test = corpus::generate_test_split(config.corpus);
  corpus::write_manifest(out_dir, kTrainManifest, "train", train.records, hash);
  corpus::write_manifest(out_dir, kTestManifest, "test", test.records, hash);
  write_file(out_dir / kPairIndexFile, train.index.to_json(hash) + "\n");

  const auto& r = train.report;
  const nlohmann::json report = {
      {"schema_version", corpus::kManifestSchemaVersion},
      {"config_hash", hash},
      {"identities", r.identities},
      {"paired_identities", r.paired_identities},
      {"records", r.records},
      {"normal_count", r.normal_count},
      {"anomaly_count", r.anomaly_count},
      {"c_n", r.c_n},
      {"c_a", r.c_a},
      {"c_a_plus", r.c_a_plus},
      {"ratio_target", std::to_string(config.corpus.ratio_normal) + ":" + std::to_string(config.corpus.ratio_anomaly)},
      {"ratio_achieved", r.anomaly_count == 0 ? 0.0
                                              : static_cast<double>(r.normal_count) / static_cast<double>(r.anomaly_count)},
      {"test_identities", test.report.identities},
      {"test_records", test.records.size()}};
  write_file(out_dir / kReportFile, report.dump(2) + "\n");
  write_file(out_dir / kConfigSnapshot, config.to_text());
  log << "wrote " << r.records << " training records (" << r.normal_count << " normal, " << r.anomaly_count
      << " anomaly) and " << test.records.size() << " test records to " << out_dir.string() << '\n';
}

void train(const RunConfig& config, const TrainOptions& options, std::ostream& log) {
  config.validate();
  const auto manifest = corpus::read_manifest(options.corpus_dir, kTrainManifest);
  if (manifest.config_hash != config.corpus_hash()) {
    throw HashMismatch("corpus at " + options.corpus_dir.string() + " has config hash " + manifest.config_hash +
                       ", the run config expects " + config.corpus_hash());
  }
  const auto index = corpus::PairIndex::from_json(read_file(options.corpus_dir / kPairIndexFile), manifest.records);

  model::CmpModel<float> model(config.model, config.train.seed);
  obj::Trainer trainer(model, config.train, manifest.records, index);
  ensure_dir(options.out_dir);
  const fs::path ckpt = options.out_dir / kCheckpointDir;
  const fs::path curve_path = options.out_dir / kLossCurveFile;

  if (options.resume) {
    const auto meta = obj::read_checkpoint_manifest(ckpt);
    if (meta.value("config_hash", "") != config.model_hash() ||
        meta.value("training_hash", "") != config.training_hash()) {
      throw HashMismatch("checkpoint in " + ckpt.string() + " was trained under a different configuration");
    }
    obj::load_checkpoint(ckpt, model.parameters(), &trainer.optimizer());
    const auto done = meta.value("epochs_completed", std::size_t{0});
    trainer.resume_at(done);
    truncate_loss_curve(curve_path, done);
    log << "resuming after epoch " << done << '\n';
  } else {
    std::ostringstream header;
    obj::write_loss_csv_header(header);
    write_file(curve_path, header.str());
    obj::save_checkpoint(ckpt, model.parameters(), &trainer.optimizer(), checkpoint_meta(config, 0));
  }
  write_file(options.out_dir / kConfigSnapshot, config.to_text());

  std::ofstream curve(curve_path, std::ios::app);
  if (!curve) throw IoError("cannot append to " + curve_path.string());
  const std::size_t last = options.stop_after == 0 ? config.train.epochs : std::min(options.stop_after, config.train.epochs);
  while (trainer.epochs_completed() < last) {
    const auto e = trainer.run_epoch();
    obj::write_loss_csv_row(curve, e);
    curve.flush();
    obj::save_checkpoint(ckpt, model.parameters(), &trainer.optimizer(), checkpoint_meta(config, e.epoch));
    log << "epoch " << e.epoch << ": l_cl " << e.loss.l_cl << " l_itm " << e.loss.l_itm << " l_mlm " << e.loss.l_mlm
        << " l_total " << e.loss.l_total << " lr " << e.lr << '\n';
  }
}

LoadedCheckpoint load_model_checkpoint(const fs::path& dir) {
  const auto meta = obj::read_checkpoint_manifest(dir);
  LoadedCheckpoint out;
  try {
    out.config.apply(parse_config_document(meta.at("run_config").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint manifest in " + dir.string() + " lacks its run config: " + e.what());
  }
  out.model_hash = meta.value("config_hash", "");
  out.corpus_hash = meta.value("corpus_hash", "");
  if (out.model_hash != out.config.model_hash()) {
    throw HashMismatch("checkpoint in " + dir.string() + " does not match its stored configuration");
  }
  out.model = std::make_unique<model::CmpModel<float>>(out.config.model, out.config.train.seed);
  obj::load_checkpoint(dir, out.model->parameters());
  out.weights_hash = fnv1a_hex(read_file(dir / "weights.cmpt"));
  return out;
}

eval::MetricsReport evaluate_checkpoint(const EvalOptions& options) {
  auto ck = load_model_checkpoint(options.checkpoint_dir);
  if (options.expected && options.expected->model_hash() != ck.model_hash) {
    throw HashMismatch("checkpoint config hash " + ck.model_hash + " does not match the run config hash " +
                       options.expected->model_hash());
  }
  const auto manifest = corpus::read_manifest(options.corpus_dir, manifest_for(options.split));
  if (manifest.config_hash != ck.corpus_hash) {
    throw HashMismatch("corpus hash " + manifest.config_hash + " does not match the checkpoint's corpus hash " +
                       ck.corpus_hash);
  }
  const auto result = eval::evaluate(*ck.model, manifest.records, manifest.records, options.setting,
                                     options.shortlist_k, ck.weights_hash);
  if (!options.report_path.empty()) write_file(options.report_path, result.report.to_json().dump(2) + "\n");
  if (!options.ranks_path.empty()) {
    std::ostringstream csv;
    eval::write_rank_csv(csv, result.rankings);
    write_file(options.ranks_path, csv.str());
  }
  return result.report;
}

eval::RankingResult search(const SearchOptions& options, std::ostream& out) {
  if (options.top_k == 0) throw ConfigError("top_k must be at least 1", "top_k");
  const auto tokenized = corpus::Vocabulary::standard().tokenize(options.query);
  if (!tokenized.unknown.empty()) {
    std::string list;
    for (const auto& w : tokenized.unknown) list += (list.empty() ? "" : ", ") + w;
    throw UnknownTokens("query contains unknown tokens: " + list, tokenized.unknown);
  }
  auto ck = load_model_checkpoint(options.checkpoint_dir);
  const auto manifest = corpus::read_manifest(options.corpus_dir, manifest_for(options.split));
  if (manifest.config_hash != ck.corpus_hash) {
    throw HashMismatch("corpus hash " + manifest.config_hash + " does not match the checkpoint's corpus hash " +
                       ck.corpus_hash);
  }
  model::validate_text(tokenized.text, ck.config.model.vocab_size);
  const eval::GalleryIndex index(*ck.model, manifest.records);
  auto ranking = eval::retrieve_two_stage(tokenized.text, index, options.shortlist_k);
  ranking.items.resize(std::min(options.top_k, ranking.items.size()));

  const auto old = out.precision(6);
  out << "rank\trecord_id\tsim\titm_prob\n";
  for (std::size_t i = 0; i < ranking.items.size(); ++i) {
    const auto& it = ranking.items[i];
    out << i + 1 << '\t' << it.record_id << '\t' << it.similarity << '\t';
    if (it.itm_prob) {
      out << *it.itm_prob;
    } else {
      out << '-';
    }
    out << '\n';
  }
  out.precision(old);
  return ranking;
}

}  // namespace cmp::cli
