#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "threatlens/normalize.hpp"
#include "threatlens/sampling.hpp"
#include "threatlens/sweep.hpp"
#include "threatlens/train_config.hpp"

namespace threatlens {

// Structured key-value config: "key = value" lines, '#' comments, a required
// schema_version. Flags override file values; THREATLENS_SEED overrides the
// file seed (flags still beat the env var). The schema is documented in the
// README.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin);
  static KeyValues parse_file(const std::string& path);
  static KeyValues empty() { return KeyValues(); }

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_ = "<none>";
};

NormalizeConfig normalize_config_from(const KeyValues& kv);
TrainConfig train_config_from(const KeyValues& kv, const std::string& prefix);
TransformerConfig transformer_config_from(const KeyValues& kv);
SamplingConfig sampling_config_from(const KeyValues& kv);

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::string train_dir;
  std::string dev_dir;
  std::string rules_path;  // optional normalization rules file
  std::string output_dir = "out";
  ModelKind model = ModelKind::linear;
  SamplingConfig sampling;
  TrainConfig train;
  TrainConfig lm_train;
  TransformerConfig transformer;
  NormalizeConfig norm;
  std::uint32_t feature_dim = 1u << 18;
  std::size_t vocab_min_freq = 1;
  double threshold = 0.5;
  bool run_lm_stages = false;
};

PipelineConfig pipeline_config_from(const KeyValues& kv);

// Every referenced path must exist before any work starts.
void validate_paths(const PipelineConfig& cfg);

}  // namespace threatlens
