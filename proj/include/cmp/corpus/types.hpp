#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmp/model/inputs.hpp"

namespace cmp::corpus {

enum class Variant : std::uint8_t { kNormal, kAnomaly };
/// C_n, C_a and C_a+ (normal caption + SEP + anomaly caption).
enum class CaptionKind : std::uint8_t { kNormal, kAnomaly, kAnomalyPlus };

std::string to_string(Variant v);
std::string to_string(CaptionKind k);
Variant parse_variant(const std::string& s);
CaptionKind parse_caption_kind(const std::string& s);

/// Categorical appearance; indices into the Lexicon lists.
struct Appearance {
  std::size_t subject = 0;
  std::size_t upper_color = 0;
  std::size_t upper_garment = 0;
  std::size_t lower_color = 0;
  std::size_t lower_garment = 0;
};

/// One synthetic pedestrian. Both variants of an identity are rendered from
/// the same appearance and background; only the action differs.
struct IdentitySpec {
  std::uint32_t identity_id = 0;
  Appearance appearance;
  /// RGB of head, upper and lower regions followed by the two garment texture ids.
  std::vector<double> appearance_vector;
  /// Two gradient coefficients in [-1, 1] modulating the scene colour.
  std::vector<double> background_vector;
  std::size_t scene = 0;
  std::size_t normal_action = 0;
  std::size_t anomaly_action = 0;
};

struct Attributes {
  std::string action;  // normal action or anomaly label
  std::string scene;
};

struct CorpusRecord {
  std::uint32_t record_id = 0;
  std::uint32_t identity_id = 0;
  Variant variant = Variant::kNormal;
  CaptionKind caption_kind = CaptionKind::kNormal;
  model::ImageInput image;
  model::PoseInput pose;
  model::TextInput caption;
  Attributes attributes;
};

/// identity → record ids per variant, plus record id → position lookup.
class PairIndex {
 public:
  struct Entry {
    std::vector<std::uint32_t> normal;
    std::vector<std::uint32_t> anomaly;
  };

  PairIndex() = default;
  explicit PairIndex(std::span<const CorpusRecord> records);

  const Entry* find(std::uint32_t identity_id) const;
  /// Record ids of the opposite variant of the same identity; empty when absent.
  std::span<const std::uint32_t> counterparts(std::uint32_t record_id) const;
  std::size_t position(std::uint32_t record_id) const;
  bool has_both_variants(std::uint32_t identity_id) const;
  /// Identity ids in ascending order.
  std::vector<std::uint32_t> identities() const;

  std::string to_json(const std::string& config_hash) const;
  /// Rebuilds from serialized form; positions are re-derived from `records`.
  static PairIndex from_json(const std::string& text, std::span<const CorpusRecord> records);

 private:
  std::unordered_map<std::uint32_t, Entry> entries_;
  std::unordered_map<std::uint32_t, std::size_t> positions_;
  std::unordered_map<std::uint32_t, std::pair<std::uint32_t, Variant>> owner_;
};

}  // namespace cmp::corpus
