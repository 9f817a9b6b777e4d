#pragma once

#include <vector>

#include "threatlens/corpus.hpp"
#include "threatlens/metrics.hpp"
#include "threatlens/model_io.hpp"
#include "threatlens/normalize.hpp"

namespace threatlens {

// Scores raw sentences with either model. Each sentence runs through the
// same normalization pipeline the models are trained behind (idempotent, so
// already-normalized input is fine); sentences the pipeline drops score 0.
std::vector<double> score_sentences(const AnyModel& model,
                                    const std::vector<Sentence>& sentences,
                                    const NormalizeConfig& norm = {});

struct EvalResult {
  ConfusionMatrix cm;
  Metrics m;
};

EvalResult evaluate_scores(const std::vector<double>& scores,
                           const std::vector<int>& gold, double threshold);

// Scores every sentence of the corpus against its gold labels.
EvalResult evaluate_model(const AnyModel& model, const Corpus& corpus,
                          double threshold, const NormalizeConfig& norm = {});

}  // namespace threatlens
