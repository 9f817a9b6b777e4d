#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "threatlens/corpus.hpp"

namespace threatlens {

enum class SamplingMode { none, undersample, oversample, class_weights };

const char* sampling_mode_name(SamplingMode mode);
std::optional<SamplingMode> sampling_mode_from_name(const std::string& name);

struct SamplingConfig {
  SamplingMode mode = SamplingMode::none;
  // Target minority:majority count ratio, e.g. 1:2. With
  // ratio_is_duplication_factor the second part is read as a plain
  // replication factor instead (Table-style "1:10" as minority x10).
  std::uint64_t ratio_minority = 1;
  std::uint64_t ratio_majority = 1;
  bool ratio_is_duplication_factor = false;
  std::uint64_t seed = 42;
};

// "1:2" -> (1, 2). Throws ValidationError on malformed input.
std::pair<std::uint64_t, std::uint64_t> parse_ratio(const std::string& text);
std::string format_ratio(const SamplingConfig& cfg);

struct ClassWeights {
  double w_relevant = 1.0;
  double w_irrelevant = 1.0;
};

// Inverse-frequency weights: w_c = N_total / (2 * N_c). The minority class
// always receives the larger weight. Throws ValidationError on a zero count.
ClassWeights class_weights(std::size_t n_relevant, std::size_t n_irrelevant);

struct ResampleResult {
  std::vector<Sentence> sentences;
  bool clamped = false;  // requested majority count exceeded what exists
};

// Keeps every minority example and samples the majority class without
// replacement down to floor(n_minority * ratio_majority / ratio_minority),
// clamped to what is available. Output order is deterministically shuffled.
// Throws ValidationError on single-class input.
ResampleResult undersample(const std::vector<Sentence>& sentences,
                           const SamplingConfig& cfg);

// Keeps every majority example and duplicates minority examples (sampling
// with replacement) up to ceil(n_majority * ratio_minority / ratio_majority),
// never below the original minority count.
ResampleResult oversample(const std::vector<Sentence>& sentences,
                          const SamplingConfig& cfg);

// Dispatches on cfg.mode; none and class_weights return the input unchanged.
ResampleResult resample(const std::vector<Sentence>& sentences,
                        const SamplingConfig& cfg);

// All sentences of a corpus, in document order (the labeled list the
// sampler and the trainers consume).
std::vector<Sentence> flatten(const Corpus& corpus);

}  // namespace threatlens
