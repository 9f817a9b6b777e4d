#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "threatlens/corpus.hpp"
#include "threatlens/metrics.hpp"
#include "threatlens/model_io.hpp"
#include "threatlens/normalize.hpp"
#include "threatlens/sampling.hpp"
#include "threatlens/train_config.hpp"
#include "threatlens/transformer.hpp"

namespace threatlens {

enum class ModelKind { linear, transformer };

const char* model_kind_name(ModelKind kind);

struct FitSpec {
  ModelKind model = ModelKind::linear;
  TrainConfig train;
  TransformerConfig transformer;
  std::uint32_t feature_dim = 1u << 18;
  std::size_t vocab_min_freq = 1;
  NormalizeConfig norm;
  double threshold = 0.5;
  // Transformer staged pretraining before the classifier stage; the extra
  // corpus (when present) is merged into the stage-1 LM data.
  bool run_lm_stages = false;
  TrainConfig lm_train;
};

// Trains one classifier on already-normalized sentences.
AnyModel fit_model(const std::vector<Sentence>& train_sentences,
                   const ClassWeights& weights, const FitSpec& spec,
                   const std::vector<Sentence>* lm_corpus = nullptr);

struct SweepSpec {
  std::vector<SamplingMode> modes;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ratios;
  FitSpec fit;
  std::uint64_t seed = 42;
  bool ratio_is_duplication_factor = false;
  std::size_t jobs = 1;
};

struct SweepRow {
  SamplingMode mode = SamplingMode::none;
  std::string ratio;  // "1:2"; "-" for the ratio-free modes
  std::size_t epochs = 0;
  bool failed = false;
  std::string error;
  Metrics metrics{};
  ConfusionMatrix cm{};
};

// One row per (mode, ratio); the ratio-free modes (none, weights) appear
// exactly once each. The train split is resampled per row with a seed
// derived from (seed, mode, ratio); the dev split is never resampled. A row
// failure is recorded and the sweep continues.
std::vector<SweepRow> run_sweep(const Corpus& train, const Corpus& dev,
                                const SweepSpec& spec);

// ratio,mode,precision,recall,f1 (metrics empty on failed rows).
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::vector<ReportRow> sweep_report_rows(const std::vector<SweepRow>& rows,
                                         const std::string& model_name);

}  // namespace threatlens
