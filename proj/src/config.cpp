#include "threatlens/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "threatlens/errors.hpp"

namespace threatlens {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(line_no) +
                            ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError(origin + ":" + std::to_string(line_no) +
                            ": empty key");
    }
    kv.values_[key] = value;
  }

  if (!kv.has("schema_version")) {
    throw ValidationError(origin + ": missing schema_version");
  }
  if (kv.get_int("schema_version", 0) != 1) {
    throw ValidationError(origin + ": unsupported schema_version " +
                          kv.get_string("schema_version", "?"));
  }
  return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void KeyValues::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

bool KeyValues::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string KeyValues::get_string(const std::string& key,
                                  const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::int64_t KeyValues::get_int(const std::string& key,
                                std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(origin_ + ": key '" + key +
                          "' wants an integer, got '" + it->second + "'");
  }
}

std::uint64_t KeyValues::get_uint(const std::string& key,
                                  std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(origin_ + ": key '" + key +
                          "' wants an unsigned integer, got '" + it->second +
                          "'");
  }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(origin_ + ": key '" + key +
                          "' wants a number, got '" + it->second + "'");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ValidationError(origin_ + ": key '" + key +
                        "' wants true/false, got '" + it->second + "'");
}

std::vector<std::string> KeyValues::get_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(it->second);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

NormalizeConfig normalize_config_from(const KeyValues& kv) {
  NormalizeConfig cfg;
  cfg.file_extensions =
      kv.get_list("normalize.file_extensions", cfg.file_extensions);
  cfg.platforms = kv.get_list("normalize.platforms", cfg.platforms);
  cfg.ascii_letter_ratio =
      kv.get_double("normalize.ascii_letter_ratio", cfg.ascii_letter_ratio);
  cfg.address_min_hex = kv.get_uint("normalize.address_min_hex", cfg.address_min_hex);
  cfg.address_max_hex = kv.get_uint("normalize.address_max_hex", cfg.address_max_hex);
  cfg.max_join = kv.get_uint("normalize.max_join", cfg.max_join);
  return cfg;
}

TrainConfig train_config_from(const KeyValues& kv, const std::string& prefix) {
  TrainConfig cfg;
  cfg.epochs = kv.get_uint(prefix + ".epochs", cfg.epochs);
  cfg.batch_size = kv.get_uint(prefix + ".batch_size", cfg.batch_size);
  cfg.learning_rate = kv.get_double(prefix + ".learning_rate", cfg.learning_rate);
  cfg.seed = kv.get_uint("seed", cfg.seed);
  cfg.mask_prob = kv.get_double(prefix + ".mask_prob", cfg.mask_prob);
  cfg.unfreeze_per_epoch =
      kv.get_uint(prefix + ".unfreeze_per_epoch", cfg.unfreeze_per_epoch);
  cfg.lr_decay_per_layer =
      kv.get_double(prefix + ".lr_decay_per_layer", cfg.lr_decay_per_layer);
  cfg.clip_norm = kv.get_double(prefix + ".clip_norm", cfg.clip_norm);
  const std::string opt = kv.get_string(prefix + ".optimizer", "sgd");
  if (opt == "sgd") {
    cfg.optimizer = Optimizer::sgd;
  } else if (opt == "adam") {
    cfg.optimizer = Optimizer::adam;
  } else {
    throw ValidationError(prefix + ".optimizer must be sgd|adam, got '" +
                          opt + "'");
  }
  return cfg;
}

TransformerConfig transformer_config_from(const KeyValues& kv) {
  TransformerConfig cfg;
  cfg.d_model = kv.get_uint("transformer.d_model", cfg.d_model);
  cfg.n_layers = kv.get_uint("transformer.n_layers", cfg.n_layers);
  cfg.n_heads = kv.get_uint("transformer.n_heads", cfg.n_heads);
  cfg.d_ff = kv.get_uint("transformer.d_ff", cfg.d_ff);
  cfg.max_len = kv.get_uint("transformer.max_len", cfg.max_len);
  return cfg;
}

SamplingConfig sampling_config_from(const KeyValues& kv) {
  SamplingConfig cfg;
  const std::string mode = kv.get_string("sampling.mode", "none");
  const auto parsed = sampling_mode_from_name(mode);
  if (!parsed) {
    throw ValidationError("sampling.mode must be none|under|over|weights, got '" +
                          mode + "'");
  }
  cfg.mode = *parsed;
  const std::string ratio = kv.get_string("sampling.ratio", "1:1");
  std::tie(cfg.ratio_minority, cfg.ratio_majority) = parse_ratio(ratio);
  cfg.ratio_is_duplication_factor =
      kv.get_bool("sampling.duplication_factor", false);
  cfg.seed = kv.get_uint("seed", cfg.seed);
  return cfg;
}

PipelineConfig pipeline_config_from(const KeyValues& kv) {
  PipelineConfig cfg;
  cfg.seed = kv.get_uint("seed", cfg.seed);
  cfg.train_dir = kv.get_string("corpus.train_dir", "");
  cfg.dev_dir = kv.get_string("corpus.dev_dir", "");
  cfg.rules_path = kv.get_string("normalize.rules", "");
  cfg.output_dir = kv.get_string("output_dir", cfg.output_dir);

  const std::string model = kv.get_string("model", "linear");
  if (model == "linear") {
    cfg.model = ModelKind::linear;
  } else if (model == "transformer") {
    cfg.model = ModelKind::transformer;
  } else {
    throw ValidationError("model must be linear|transformer, got '" + model +
                          "'");
  }

  cfg.sampling = sampling_config_from(kv);
  cfg.train = train_config_from(kv, "train");
  cfg.lm_train = train_config_from(kv, "lm");
  if (!kv.has("lm.epochs")) cfg.lm_train.epochs = kLmEpochsPreset;
  if (!kv.has("lm.learning_rate")) cfg.lm_train.learning_rate = 1e-3;
  cfg.transformer = transformer_config_from(kv);

  if (!cfg.rules_path.empty()) {
    cfg.norm = normalize_config_from(KeyValues::parse_file(cfg.rules_path));
  } else {
    cfg.norm = normalize_config_from(kv);
  }

  cfg.feature_dim =
      static_cast<std::uint32_t>(kv.get_uint("features.dimension", cfg.feature_dim));
  cfg.vocab_min_freq = kv.get_uint("vocab.min_freq", cfg.vocab_min_freq);
  cfg.threshold = kv.get_double("threshold", cfg.threshold);
  cfg.run_lm_stages = kv.get_bool("train.run_lm_stages", cfg.run_lm_stages);
  return cfg;
}

void validate_paths(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  auto require_dir = [](const std::string& path, const char* what) {
    if (path.empty()) {
      throw ValidationError(std::string(what) + " is not configured");
    }
    if (!fs::is_directory(path)) {
      throw ValidationError(std::string(what) + " '" + path +
                            "' is not a directory");
    }
  };
  require_dir(cfg.train_dir, "corpus.train_dir");
  require_dir(cfg.dev_dir, "corpus.dev_dir");
  if (!cfg.rules_path.empty() && !fs::is_regular_file(cfg.rules_path)) {
    throw ValidationError("normalize.rules '" + cfg.rules_path +
                          "' does not exist");
  }
}

}  // namespace threatlens
