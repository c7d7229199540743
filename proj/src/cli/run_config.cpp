#include "cmp/cli/run_config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cmp/common/error.hpp"
#include "cmp/corpus/vocabulary.hpp"

namespace cmp::cli {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

class SectionReader {
 public:
  SectionReader(std::string section, const std::map<std::string, std::string>& values)
      : section_(std::move(section)), values_(values) {}

  void read(const std::string& key, std::size_t& out) const {
    if (const auto* raw = find(key)) {
      std::uint64_t v = 0;
      const auto [p, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
      if (ec != std::errc() || p != raw->data() + raw->size()) fail(key, "expected a non-negative integer, got '" + *raw + "'");
      out = static_cast<std::size_t>(v);
    }
  }
  void read(const std::string& key, double& out) const {
    if (const auto* raw = find(key)) {
      try {
        std::size_t used = 0;
        out = std::stod(*raw, &used);
        if (used != raw->size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        fail(key, "expected a number, got '" + *raw + "'");
      }
    }
  }
  void read(const std::string& key, bool& out) const {
    if (const auto* raw = find(key)) {
      if (*raw == "true" || *raw == "on") {
        out = true;
      } else if (*raw == "false" || *raw == "off") {
        out = false;
      } else {
        fail(key, "expected true/false or on/off, got '" + *raw + "'");
      }
    }
  }
  const std::string* find(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(section_ + "." + key + ": " + msg, section_ + "." + key);
  }
  void reject_unknown(std::initializer_list<const char*> known) const {
    for (const auto& [key, value] : values_) {
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) fail(key, "unknown key");
    }
  }

 private:
  std::string section_;
  const std::map<std::string, std::string>& values_;
};

void rethrow_in(const std::string& section, const ConfigError& e) {
  const std::string field = e.field().empty() ? section : section + "." + e.field();
  throw ConfigError(section + "." + e.what(), field);
}

}  // namespace

ConfigDocument parse_config_document(std::string_view text) {
  ConfigDocument doc;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where + ": malformed section header", "section");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value", "line");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key", "line");
    const std::string field = section.empty() ? key : section + "." + key;
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside a section", field);
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') throw ConfigError(where + ": unterminated string", field);
      value = value.substr(1, value.size() - 2);
    }
    if (value.empty()) throw ConfigError(where + ": missing value for " + field, field);
    if (doc[section].count(key) != 0) throw ConfigError(where + ": duplicate key " + field, field);
    doc[section][key] = value;
  }
  return doc;
}

void RunConfig::apply(const ConfigDocument& doc) {
  for (const auto& [section, values] : doc) {
    const SectionReader r(section, values);
    if (section == "corpus") {
      r.reject_unknown({"n_identities", "images_per_caption", "ratio", "paired_fraction", "test_identities", "seed",
                        "image_size", "pixel_noise", "keypoint_jitter", "pose_sigma_px"});
      r.read("n_identities", corpus.n_identities);
      r.read("images_per_caption", corpus.images_per_caption);
      r.read("paired_fraction", corpus.paired_fraction);
      r.read("test_identities", corpus.test_identities);
      r.read("seed", corpus.seed);
      r.read("image_size", corpus.image_size);
      r.read("pixel_noise", corpus.pixel_noise);
      r.read("keypoint_jitter", corpus.keypoint_jitter);
      r.read("pose_sigma_px", corpus.pose_sigma_px);
      if (const auto* ratio = r.find("ratio")) {
        unsigned a = 0, b = 0;
        char tail = 0;
        if (std::sscanf(ratio->c_str(), "%u:%u%c", &a, &b, &tail) != 2) r.fail("ratio", "expected N:M, got '" + *ratio + "'");
        corpus.ratio_normal = a;
        corpus.ratio_anomaly = b;
      }
    } else if (section == "model") {
      r.reject_unknown({"patch_size", "vocab_size", "model_dim", "heads", "fusion_heads", "ffn_dim", "image_blocks",
                        "text_blocks", "cross_blocks", "proj_dim", "tau", "pose_enabled", "ln_eps"});
      r.read("patch_size", model.patch_size);
      r.read("vocab_size", model.vocab_size);
      r.read("model_dim", model.model_dim);
      r.read("heads", model.heads);
      r.read("fusion_heads", model.fusion_heads);
      r.read("ffn_dim", model.ffn_dim);
      r.read("image_blocks", model.image_blocks);
      r.read("text_blocks", model.text_blocks);
      r.read("cross_blocks", model.cross_blocks);
      r.read("proj_dim", model.proj_dim);
      r.read("tau", train.tau);
      r.read("pose_enabled", model.pose_enabled);
      r.read("ln_eps", model.ln_eps);
    } else if (section == "train") {
      r.reject_unknown({"batch_size", "epochs", "lr_start", "lr_end", "weight_decay", "warmup_steps", "mask_rate",
                        "ihnm_enabled", "seed"});
      r.read("batch_size", train.batch_size);
      r.read("epochs", train.epochs);
      r.read("lr_start", train.lr_start);
      r.read("lr_end", train.lr_end);
      r.read("weight_decay", train.weight_decay);
      r.read("warmup_steps", train.warmup_steps);
      r.read("mask_rate", train.mask_rate);
      r.read("ihnm_enabled", train.ihnm);
      r.read("seed", train.seed);
    } else if (section == "eval") {
      r.reject_unknown({"setting", "shortlist_k"});
      if (const auto* s = r.find("setting")) {
        try {
          eval.setting = eval::parse_setting(*s);
        } catch (const ConfigError& e) {
          r.fail("setting", e.what());
        }
      }
      r.read("shortlist_k", eval.shortlist_k);
    } else {
      throw ConfigError("unknown config section [" + section + "]", section);
    }
  }
  model.image_size = corpus.image_size;
}

void RunConfig::validate() const {
  try {
    corpus.validate();
  } catch (const ConfigError& e) {
    rethrow_in("corpus", e);
  }
  try {
    model.validate();
  } catch (const ConfigError& e) {
    rethrow_in("model", e);
  }
  if (model.image_size != corpus.image_size) throw ConfigError("model.image_size must equal corpus.image_size", "corpus.image_size");
  if (model.vocab_size != corpus::Vocabulary::standard().size()) {
    throw ConfigError("model.vocab_size must equal the corpus vocabulary size " +
                          std::to_string(corpus::Vocabulary::standard().size()),
                      "model.vocab_size");
  }
  try {
    train.validate();
  } catch (const ConfigError& e) {
    const std::string field = e.field() == "tau" ? "model.tau" : "train." + e.field();
    throw ConfigError(field + ": " + e.what(), field);
  }
  if (eval.shortlist_k < 1) throw ConfigError("eval.shortlist_k must be at least 1", "eval.shortlist_k");
}

std::string RunConfig::section_text(std::string_view section) const {
  std::ostringstream out;
  out << '[' << section << "]\n";
  if (section == "corpus") {
    out << "n_identities = " << corpus.n_identities << '\n'
        << "images_per_caption = " << corpus.images_per_caption << '\n'
        << "ratio = \"" << corpus.ratio_normal << ':' << corpus.ratio_anomaly << "\"\n"
        << "paired_fraction = " << format_double(corpus.paired_fraction) << '\n'
        << "test_identities = " << corpus.test_identities << '\n'
        << "seed = " << corpus.seed << '\n'
        << "image_size = " << corpus.image_size << '\n'
        << "pixel_noise = " << format_double(corpus.pixel_noise) << '\n'
        << "keypoint_jitter = " << format_double(corpus.keypoint_jitter) << '\n'
        << "pose_sigma_px = " << format_double(corpus.pose_sigma_px) << '\n';
  } else if (section == "model") {
    out << "patch_size = " << model.patch_size << '\n'
        << "vocab_size = " << model.vocab_size << '\n'
        << "model_dim = " << model.model_dim << '\n'
        << "heads = " << model.heads << '\n'
        << "fusion_heads = " << model.fusion_heads << '\n'
        << "ffn_dim = " << model.ffn_dim << '\n'
        << "image_blocks = " << model.image_blocks << '\n'
        << "text_blocks = " << model.text_blocks << '\n'
        << "cross_blocks = " << model.cross_blocks << '\n'
        << "proj_dim = " << model.proj_dim << '\n'
        << "tau = " << format_double(train.tau) << '\n'
        << "pose_enabled = " << format_bool(model.pose_enabled) << '\n'
        << "ln_eps = " << format_double(model.ln_eps) << '\n';
  } else if (section == "train") {
    out << "batch_size = " << train.batch_size << '\n'
        << "epochs = " << train.epochs << '\n'
        << "lr_start = " << format_double(train.lr_start) << '\n'
        << "lr_end = " << format_double(train.lr_end) << '\n'
        << "weight_decay = " << format_double(train.weight_decay) << '\n'
        << "warmup_steps = " << train.warmup_steps << '\n'
        << "mask_rate = " << format_double(train.mask_rate) << '\n'
        << "ihnm_enabled = " << format_bool(train.ihnm) << '\n'
        << "seed = " << train.seed << '\n';
  } else if (section == "eval") {
    out << "setting = \"" << eval::to_string(eval.setting) << "\"\n"
        << "shortlist_k = " << eval.shortlist_k << '\n';
  } else {
    throw ConfigError("unknown config section [" + std::string(section) + "]", std::string(section));
  }
  return out.str();
}

std::string RunConfig::to_text() const {
  return section_text("corpus") + '\n' + section_text("model") + '\n' + section_text("train") + '\n' +
         section_text("eval");
}

std::string RunConfig::corpus_hash() const { return fnv1a_hex(section_text("corpus")); }

std::string RunConfig::model_hash() const { return fnv1a_hex(section_text("corpus") + section_text("model")); }

std::string RunConfig::training_hash() const {
  RunConfig copy = *this;
  copy.train.epochs = 0;
  return fnv1a_hex(copy.section_text("train"));
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig config;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    config.apply(parse_config_document(buf.str()));
  }
  return config;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cmp::cli
