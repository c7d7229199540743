#include "cmp/corpus/types.hpp"

#include <algorithm>

#include "json.hpp"

#include "cmp/common/error.hpp"

namespace cmp::corpus {

std::string to_string(Variant v) { return v == Variant::kNormal ? "normal" : "anomaly"; }

std::string to_string(CaptionKind k) {
  switch (k) {
    case CaptionKind::kNormal:
      return "C_n";
    case CaptionKind::kAnomaly:
      return "C_a";
    case CaptionKind::kAnomalyPlus:
      return "C_a_plus";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "normal") return Variant::kNormal;
  if (s == "anomaly") return Variant::kAnomaly;
  throw IoError("unknown variant '" + s + "'");
}

CaptionKind parse_caption_kind(const std::string& s) {
  if (s == "C_n") return CaptionKind::kNormal;
  if (s == "C_a") return CaptionKind::kAnomaly;
  if (s == "C_a_plus") return CaptionKind::kAnomalyPlus;
  throw IoError("unknown caption kind '" + s + "'");
}

PairIndex::PairIndex(std::span<const CorpusRecord> records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!positions_.emplace(r.record_id, i).second) {
      throw IoError("duplicate record id " + std::to_string(r.record_id));
    }
    auto& e = entries_[r.identity_id];
    (r.variant == Variant::kNormal ? e.normal : e.anomaly).push_back(r.record_id);
    owner_.emplace(r.record_id, std::make_pair(r.identity_id, r.variant));
  }
}

const PairIndex::Entry* PairIndex::find(std::uint32_t identity_id) const {
  auto it = entries_.find(identity_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::span<const std::uint32_t> PairIndex::counterparts(std::uint32_t record_id) const {
  auto it = owner_.find(record_id);
  if (it == owner_.end()) throw IoError("record " + std::to_string(record_id) + " not in pair index");
  const Entry& e = entries_.at(it->second.first);
  return it->second.second == Variant::kNormal ? std::span<const std::uint32_t>(e.anomaly)
                                               : std::span<const std::uint32_t>(e.normal);
}

std::size_t PairIndex::position(std::uint32_t record_id) const {
  auto it = positions_.find(record_id);
  if (it == positions_.end()) throw IoError("record " + std::to_string(record_id) + " not in pair index");
  return it->second;
}

bool PairIndex::has_both_variants(std::uint32_t identity_id) const {
  const Entry* e = find(identity_id);
  return e && !e->normal.empty() && !e->anomaly.empty();
}

std::vector<std::uint32_t> PairIndex::identities() const {
  std::vector<std::uint32_t> ids;
  ids.reserve(entries_.size());
  for (const auto& kv : entries_) ids.push_back(kv.first);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string PairIndex::to_json(const std::string& config_hash) const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["config_hash"] = config_hash;
  auto& list = j["identities"] = nlohmann::json::array();
  for (std::uint32_t id : identities()) {
    const Entry& e = entries_.at(id);
    list.push_back({{"identity_id", id}, {"normal", e.normal}, {"anomaly", e.anomaly}});
  }
  return j.dump(1) + "\n";
}

PairIndex PairIndex::from_json(const std::string& text, std::span<const CorpusRecord> records) {
  PairIndex built(records);
  const auto j = nlohmann::json::parse(text);
  for (const auto& item : j.at("identities")) {
    const auto id = item.at("identity_id").get<std::uint32_t>();
    const Entry* e = built.find(id);
    if (!e || e->normal != item.at("normal").get<std::vector<std::uint32_t>>() ||
        e->anomaly != item.at("anomaly").get<std::vector<std::uint32_t>>()) {
      throw IoError("pair index disagrees with manifest for identity " + std::to_string(id));
    }
  }
  if (j.at("identities").size() != built.entries_.size()) throw IoError("pair index identity count mismatch");
  return built;
}

}  // namespace cmp::corpus
