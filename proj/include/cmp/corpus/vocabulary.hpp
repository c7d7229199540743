#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmp/model/inputs.hpp"

namespace cmp::corpus {

/// Caption grammar word lists. Index order is stable and part of the corpus format.
struct Lexicon {
  static const std::vector<std::string>& subjects();
  static const std::vector<std::string>& non_person_subjects();
  static const std::vector<std::string>& colors();
  static const std::vector<std::string>& upper_garments();
  static const std::vector<std::string>& lower_garments();
  static const std::vector<std::string>& normal_actions();
  static const std::vector<std::string>& anomaly_actions();
  static const std::vector<std::string>& scenes();
  /// Default person lexicon used by the subject filter.
  static const std::vector<std::string>& person_words();
};

/// Fixed 512-entry vocabulary: [CLS] [PAD] [MASK] [SEP], the grammar words,
/// then [unused_k] fillers.
class Vocabulary {
 public:
  static constexpr std::size_t kSize = 512;

  static const Vocabulary& standard();

  std::size_t size() const { return words_.size(); }
  std::optional<std::uint32_t> find(std::string_view word) const;
  std::uint32_t id(std::string_view word) const;  // throws on unknown words
  const std::string& word(std::uint32_t id) const { return words_.at(id); }

  struct Tokenized {
    model::TextInput text;
    std::vector<std::string> unknown;
  };
  /// Whitespace split, lower-cased; prepends CLS. Unknown words are reported, not dropped.
  Tokenized tokenize(std::string_view sentence) const;
  /// Space-joined words, CLS omitted.
  std::string detokenize(std::span<const std::uint32_t> tokens) const;

 private:
  Vocabulary();
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

}  // namespace cmp::corpus
