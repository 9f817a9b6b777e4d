#include "threatlens/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "threatlens/errors.hpp"
#include "threatlens/rng.hpp"

namespace threatlens {

const char* sampling_mode_name(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::none:
      return "none";
    case SamplingMode::undersample:
      return "under";
    case SamplingMode::oversample:
      return "over";
    default:
      return "weights";
  }
}

std::optional<SamplingMode> sampling_mode_from_name(const std::string& name) {
  if (name == "none") return SamplingMode::none;
  if (name == "under") return SamplingMode::undersample;
  if (name == "over") return SamplingMode::oversample;
  if (name == "weights") return SamplingMode::class_weights;
  return std::nullopt;
}

std::pair<std::uint64_t, std::uint64_t> parse_ratio(const std::string& text) {
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) {
    throw ValidationError("ratio must look like '1:2', got '" + text + "'");
  }
  std::uint64_t lhs = 0, rhs = 0;
  try {
    std::size_t used = 0;
    lhs = std::stoull(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(text);
    const std::string rest = text.substr(colon + 1);
    rhs = std::stoull(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ValidationError("ratio must look like '1:2', got '" + text + "'");
  }
  if (lhs == 0 || rhs == 0) {
    throw ValidationError("ratio parts must be positive, got '" + text + "'");
  }
  return {lhs, rhs};
}

std::string format_ratio(const SamplingConfig& cfg) {
  return std::to_string(cfg.ratio_minority) + ":" +
         std::to_string(cfg.ratio_majority);
}

ClassWeights class_weights(std::size_t n_relevant, std::size_t n_irrelevant) {
  if (n_relevant == 0 || n_irrelevant == 0) {
    throw ValidationError("class_weights: both class counts must be > 0");
  }
  const double total = static_cast<double>(n_relevant + n_irrelevant);
  return ClassWeights{total / (2.0 * static_cast<double>(n_relevant)),
                      total / (2.0 * static_cast<double>(n_irrelevant))};
}

namespace {

// Canonical order so resampling is a function of the input multiset, not of
// the order the sentences arrived in.
void sort_canonical(std::vector<const Sentence*>& group) {
  std::sort(group.begin(), group.end(),
            [](const Sentence* a, const Sentence* b) {
              if (a->doc_id != b->doc_id) return a->doc_id < b->doc_id;
              if (a->index != b->index) return a->index < b->index;
              return a->tokens.size() < b->tokens.size();
            });
}

struct ClassSplit {
  std::vector<const Sentence*> minority;
  std::vector<const Sentence*> majority;
};

ClassSplit split_classes(const std::vector<Sentence>& sentences) {
  std::vector<const Sentence*> relevant, irrelevant;
  for (const auto& s : sentences) {
    (s.label == Label::relevant ? relevant : irrelevant).push_back(&s);
  }
  if (relevant.empty() || irrelevant.empty()) {
    throw ValidationError("cannot balance single-class data");
  }
  sort_canonical(relevant);
  sort_canonical(irrelevant);
  ClassSplit split;
  if (relevant.size() <= irrelevant.size()) {
    split.minority = std::move(relevant);
    split.majority = std::move(irrelevant);
  } else {
    split.minority = std::move(irrelevant);
    split.majority = std::move(relevant);
  }
  return split;
}

ResampleResult finish(std::vector<const Sentence*> chosen, Rng& rng,
                      bool clamped) {
  rng.shuffle(chosen);
  ResampleResult result;
  result.clamped = clamped;
  result.sentences.reserve(chosen.size());
  for (const Sentence* s : chosen) result.sentences.push_back(*s);
  return result;
}

}  // namespace

ResampleResult undersample(const std::vector<Sentence>& sentences,
                           const SamplingConfig& cfg) {
  ClassSplit split = split_classes(sentences);
  Rng rng(cfg.seed);

  const auto n_min = static_cast<std::uint64_t>(split.minority.size());
  const auto n_maj = static_cast<std::uint64_t>(split.majority.size());
  std::uint64_t target =
      cfg.ratio_is_duplication_factor
          ? std::max<std::uint64_t>(1, n_maj * cfg.ratio_minority /
                                           cfg.ratio_majority)
          : n_min * cfg.ratio_majority / cfg.ratio_minority;
  bool clamped = false;
  if (target > n_maj) {
    target = n_maj;
    clamped = true;
  }

  rng.shuffle(split.majority);
  std::vector<const Sentence*> chosen = std::move(split.minority);
  chosen.insert(chosen.end(), split.majority.begin(),
                split.majority.begin() + static_cast<std::ptrdiff_t>(target));
  return finish(std::move(chosen), rng, clamped);
}

ResampleResult oversample(const std::vector<Sentence>& sentences,
                          const SamplingConfig& cfg) {
  ClassSplit split = split_classes(sentences);
  Rng rng(cfg.seed);

  const auto n_min = static_cast<std::uint64_t>(split.minority.size());
  const auto n_maj = static_cast<std::uint64_t>(split.majority.size());
  std::uint64_t target;
  if (cfg.ratio_is_duplication_factor) {
    target = static_cast<std::uint64_t>(
        std::ceil(static_cast<double>(n_min) *
                  static_cast<double>(cfg.ratio_majority) /
                  static_cast<double>(cfg.ratio_minority)));
  } else {
    target = (n_maj * cfg.ratio_minority + cfg.ratio_majority - 1) /
             cfg.ratio_majority;
  }
  // Never drop below the original minority: the hatch for targets that the
  // natural imbalance already exceeds.
  if (target < n_min) target = n_min;

  std::vector<const Sentence*> chosen = split.minority;
  for (std::uint64_t extra = n_min; extra < target; ++extra) {
    chosen.push_back(split.minority[rng.bounded(n_min)]);
  }
  chosen.insert(chosen.end(), split.majority.begin(), split.majority.end());
  return finish(std::move(chosen), rng, false);
}

ResampleResult resample(const std::vector<Sentence>& sentences,
                        const SamplingConfig& cfg) {
  switch (cfg.mode) {
    case SamplingMode::undersample:
      return undersample(sentences, cfg);
    case SamplingMode::oversample:
      return oversample(sentences, cfg);
    default:
      return ResampleResult{sentences, false};
  }
}

std::vector<Sentence> flatten(const Corpus& corpus) {
  std::vector<Sentence> out;
  for (const auto& doc : corpus.documents) {
    out.insert(out.end(), doc.sentences.begin(), doc.sentences.end());
  }
  return out;
}

}  // namespace threatlens
