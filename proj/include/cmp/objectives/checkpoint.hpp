#pragma once

#include <filesystem>

#include "json.hpp"

#include "cmp/nn/parameters.hpp"
#include "cmp/objectives/optimizer.hpp"

namespace cmp::obj {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Writes <dir>/weights.cmpt, <dir>/optimizer.cmpt (when `optimizer` is set)
/// and <dir>/checkpoint.json. The JSON is `meta` plus the tensor names and
/// shapes and the optimizer step count.
void save_checkpoint(const std::filesystem::path& dir, const nn::ParameterStore<float>& params,
                     const AdamW<float>* optimizer, nlohmann::json meta);

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir);

/// Restores parameter values (and optimizer state when given and present);
/// returns the manifest.
nlohmann::json load_checkpoint(const std::filesystem::path& dir, nn::ParameterStore<float>& params,
                               AdamW<float>* optimizer = nullptr);

}  // namespace cmp::obj
