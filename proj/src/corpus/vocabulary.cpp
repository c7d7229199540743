#include "cmp/corpus/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "cmp/common/error.hpp"

namespace cmp::corpus {

const std::vector<std::string>& Lexicon::subjects() {
  static const std::vector<std::string> v{"man", "woman", "boy", "girl", "person"};
  return v;
}
const std::vector<std::string>& Lexicon::non_person_subjects() {
  static const std::vector<std::string> v{"dog", "cat", "car", "bicycle", "bird", "tree"};
  return v;
}
const std::vector<std::string>& Lexicon::colors() {
  static const std::vector<std::string> v{"red",   "blue", "green",  "yellow", "black",
                                          "white", "gray", "orange", "purple", "brown"};
  return v;
}
const std::vector<std::string>& Lexicon::upper_garments() {
  static const std::vector<std::string> v{"jacket", "tshirt", "sweater", "coat"};
  return v;
}
const std::vector<std::string>& Lexicon::lower_garments() {
  static const std::vector<std::string> v{"jeans", "shorts", "skirt", "trousers"};
  return v;
}
const std::vector<std::string>& Lexicon::normal_actions() {
  static const std::vector<std::string> v{"walking", "standing", "running", "jogging", "talking", "waiting"};
  return v;
}
const std::vector<std::string>& Lexicon::anomaly_actions() {
  static const std::vector<std::string> v{"falling", "lying", "slipping", "fainting", "crawling", "tumbling"};
  return v;
}
const std::vector<std::string>& Lexicon::scenes() {
  static const std::vector<std::string> v{"park",   "street",  "station", "mall",
                                          "square", "parking", "campus",  "crosswalk"};
  return v;
}
const std::vector<std::string>& Lexicon::person_words() {
  static const std::vector<std::string> v{"people", "he",  "she",    "man",    "woman", "person",
                                          "boy",    "girl", "lady",  "guy",    "pedestrian"};
  return v;
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary v;
  return v;
}

Vocabulary::Vocabulary() {
  words_ = {"[CLS]", "[PAD]", "[MASK]", "[SEP]"};
  auto append = [this](const std::vector<std::string>& list) {
    for (const auto& w : list) {
      if (std::find(words_.begin(), words_.end(), w) == words_.end()) words_.push_back(w);
    }
  };
  append({"a", "an", "the", "wearing", "and", "with", "is", "in", "at", "on", "near", "of", "then", "while"});
  append(Lexicon::person_words());
  append(Lexicon::subjects());
  append(Lexicon::non_person_subjects());
  append(Lexicon::colors());
  append(Lexicon::upper_garments());
  append(Lexicon::lower_garments());
  append(Lexicon::normal_actions());
  append(Lexicon::anomaly_actions());
  append(Lexicon::scenes());
  for (std::size_t k = 0; words_.size() < kSize; ++k) words_.push_back("[unused_" + std::to_string(k) + "]");
  for (std::uint32_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::id(std::string_view word) const {
  if (auto id = find(word)) return *id;
  throw ConfigError("unknown vocabulary word '" + std::string(word) + "'");
}

Vocabulary::Tokenized Vocabulary::tokenize(std::string_view sentence) const {
  Tokenized result;
  result.text.tokens.push_back(model::kClsToken);
  std::istringstream in{std::string(sentence)};
  std::string w;
  while (in >> w) {
    std::string lower = w;
    if (lower.front() != '[') {
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    }
    if (auto id = find(lower)) {
      result.text.tokens.push_back(*id);
    } else {
      result.unknown.push_back(w);
    }
  }
  return result;
}

std::string Vocabulary::detokenize(std::span<const std::uint32_t> tokens) const {
  std::string out;
  for (std::uint32_t t : tokens) {
    if (t == model::kClsToken) continue;
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

}  // namespace cmp::corpus
