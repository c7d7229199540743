#include "cmp/corpus/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "cmp/common/error.hpp"
#include "cmp/numerics/tensor_io.hpp"

namespace cmp::corpus {
namespace {

num::Tensor<float> as_tensor(const model::ImageInput& img) {
  return num::Tensor<float>({img.size, img.size, img.channels}, img.pixels);
}

model::ImageInput as_image(const num::Tensor<float>& t) {
  if (t.rank() != 3 || t.shape()[0] != t.shape()[1]) throw IoError("image tensor must be square H×W×C");
  model::ImageInput img;
  img.size = t.shape()[0];
  img.channels = t.shape()[2];
  img.pixels.assign(t.data().begin(), t.data().end());
  return img;
}

std::string tensor_name(const std::string& prefix, std::uint32_t id, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "tensors/%s_%06u_%s.cmpt", prefix.c_str(), id, kind);
  return buf;
}

}  // namespace

std::string manifest_line(const CorpusRecord& r, const std::string& image_path, const std::string& pose_path,
                          const std::string& config_hash) {
  nlohmann::json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["config_hash"] = config_hash;
  j["record_id"] = r.record_id;
  j["identity_id"] = r.identity_id;
  j["variant"] = to_string(r.variant);
  j["caption_kind"] = to_string(r.caption_kind);
  j["image"] = image_path;
  j["pose"] = pose_path;
  j["caption"] = r.caption.tokens;
  auto& kps = j["keypoints"] = nlohmann::json::array();
  for (const auto& k : r.pose.keypoints) kps.push_back({k.x, k.y, k.confidence});
  j["attributes"] = {{"action", r.attributes.action}, {"scene", r.attributes.scene}};
  return j.dump();
}

void write_manifest(const std::filesystem::path& dir, const std::string& manifest_name, const std::string& prefix,
                    std::span<const CorpusRecord> records, const std::string& config_hash) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "tensors", ec);
  if (ec) throw IoError("cannot create " + (dir / "tensors").string() + ": " + ec.message());
  std::ofstream out(dir / manifest_name, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / manifest_name).string());
  for (const auto& r : records) {
    const auto image_path = tensor_name(prefix, r.record_id, "image");
    const auto pose_path = tensor_name(prefix, r.record_id, "pose");
    num::save_tensor(dir / image_path, as_tensor(r.image));
    num::save_tensor(dir / pose_path, as_tensor(r.pose.rasterized));
    out << manifest_line(r, image_path, pose_path, config_hash) << '\n';
  }
  if (!out) throw IoError("failed writing " + (dir / manifest_name).string());
}

LoadedManifest read_manifest(const std::filesystem::path& dir, const std::string& manifest_name) {
  std::ifstream in(dir / manifest_name, std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / manifest_name).string());
  LoadedManifest result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("schema_version").get<int>() != kManifestSchemaVersion) throw IoError("unsupported schema version");
      const auto hash = j.at("config_hash").get<std::string>();
      if (result.records.empty()) {
        result.config_hash = hash;
      } else if (hash != result.config_hash) {
        throw IoError("mixed config hashes");
      }
      CorpusRecord r;
      r.record_id = j.at("record_id").get<std::uint32_t>();
      r.identity_id = j.at("identity_id").get<std::uint32_t>();
      r.variant = parse_variant(j.at("variant").get<std::string>());
      r.caption_kind = parse_caption_kind(j.at("caption_kind").get<std::string>());
      r.caption.tokens = j.at("caption").get<std::vector<std::uint32_t>>();
      const auto& kps = j.at("keypoints");
      if (kps.size() != model::kNumJoints) throw IoError("expected 17 keypoints");
      for (std::size_t k = 0; k < model::kNumJoints; ++k) {
        r.pose.keypoints[k] = {kps[k].at(0).get<double>(), kps[k].at(1).get<double>(), kps[k].at(2).get<double>()};
      }
      r.attributes.action = j.at("attributes").at("action").get<std::string>();
      r.attributes.scene = j.at("attributes").at("scene").get<std::string>();
      r.image = as_image(num::load_tensor<float>(dir / j.at("image").get<std::string>()));
      r.pose.rasterized = as_image(num::load_tensor<float>(dir / j.at("pose").get<std::string>()));
      result.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw IoError((dir / manifest_name).string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace cmp::corpus
