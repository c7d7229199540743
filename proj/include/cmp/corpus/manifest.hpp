#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmp/corpus/types.hpp"

namespace cmp::corpus {

inline constexpr int kManifestSchemaVersion = 1;

struct LoadedManifest {
  std::vector<CorpusRecord> records;
  std::string config_hash;
};

/// One JSON object (no trailing newline) describing `record`, with tensor
/// paths relative to the corpus directory.
std::string manifest_line(const CorpusRecord& record, const std::string& image_path, const std::string& pose_path,
                          const std::string& config_hash);

/// Writes `<dir>/<manifest_name>` as JSON lines and the image/pose tensors as
/// `<dir>/tensors/<prefix>_<record_id>_{image,pose}.cmpt`.
void write_manifest(const std::filesystem::path& dir, const std::string& manifest_name, const std::string& prefix,
                    std::span<const CorpusRecord> records, const std::string& config_hash);

LoadedManifest read_manifest(const std::filesystem::path& dir, const std::string& manifest_name);

}  // namespace cmp::corpus
