#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "cmp/corpus/generator.hpp"
#include "cmp/eval/metrics.hpp"
#include "cmp/model/config.hpp"
#include "cmp/objectives/trainer.hpp"

namespace cmp::cli {

/// Raw `[section]` / `key = value` document. Values keep their source text
/// with surrounding quotes removed.
using ConfigDocument = std::map<std::string, std::map<std::string, std::string>>;

/// Parses a TOML-style file: sections, `key = value` pairs, `#` comments,
/// quoted or bare strings, numbers and booleans. Errors name line and key.
ConfigDocument parse_config_document(std::string_view text);

struct EvalConfig {
  eval::Setting setting = eval::Setting::kBehaviorMatch;
  std::size_t shortlist_k = eval::kDefaultShortlist;
};

struct RunConfig {
  corpus::CorpusConfig corpus;
  model::ModelConfig model;
  obj::TrainConfig train;
  EvalConfig eval;

  /// Overlays every key present in `doc`; unknown sections or keys are errors.
  void apply(const ConfigDocument& doc);
  /// Checks all sections; ConfigError::field() is "<section>.<key>".
  void validate() const;

  /// Canonical text of one section or of the whole config (round-trips through apply).
  std::string section_text(std::string_view section) const;
  std::string to_text() const;

  /// FNV-1a over the canonical corpus section.
  std::string corpus_hash() const;
  /// FNV-1a over the canonical corpus and model sections.
  std::string model_hash() const;
  /// FNV-1a over the canonical train section without the epoch count.
  std::string training_hash() const;
};

/// Defaults, then the file at `path` when it is non-empty.
RunConfig load_run_config(const std::filesystem::path& path);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace cmp::cli
