#include "cmp/objectives/checkpoint.hpp"

#include <fstream>

#include "cmp/common/error.hpp"
#include "cmp/numerics/tensor_io.hpp"

namespace cmp::obj {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& dir, const nn::ParameterStore<float>& params, const AdamW<float>* optimizer,
                     nlohmann::json meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  num::save_named_tensors(dir / "weights.cmpt", params.items());
  if (optimizer != nullptr) num::save_named_tensors(dir / "optimizer.cmpt", optimizer->state());

  meta["schema_version"] = kCheckpointSchemaVersion;
  auto tensors = nlohmann::json::array();
  for (const auto& [name, t] : params.items()) tensors.push_back({{"name", name}, {"shape", t.shape()}});
  meta["tensors"] = std::move(tensors);
  meta["optimizer_steps"] = optimizer != nullptr ? optimizer->steps() : 0;
  meta["has_optimizer_state"] = optimizer != nullptr;

  std::ofstream out(dir / "checkpoint.json");
  if (!out) throw IoError("cannot write " + (dir / "checkpoint.json").string());
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + (dir / "checkpoint.json").string());
}

nlohmann::json read_checkpoint_manifest(const fs::path& dir) {
  const auto path = dir / "checkpoint.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint manifest " + path.string());
  try {
    auto meta = nlohmann::json::parse(in);
    if (meta.value("schema_version", 0) != kCheckpointSchemaVersion) {
      throw IoError("unsupported checkpoint schema in " + path.string());
    }
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest " + path.string() + ": " + e.what());
  }
}

nlohmann::json load_checkpoint(const fs::path& dir, nn::ParameterStore<float>& params, AdamW<float>* optimizer) {
  auto meta = read_checkpoint_manifest(dir);
  params.copy_values_from(num::load_named_tensors<float>(dir / "weights.cmpt"));
  if (optimizer != nullptr && meta.value("has_optimizer_state", false)) {
    optimizer->load_state(num::load_named_tensors<float>(dir / "optimizer.cmpt"),
                          meta.value("optimizer_steps", std::size_t{0}));
  }
  return meta;
}

}  // namespace cmp::obj
