#include "threatlens/pipeline.hpp"

#include <algorithm>

#include "threatlens/encoding.hpp"
#include "threatlens/features.hpp"
#include "threatlens/sampling.hpp"

namespace threatlens {

namespace {

std::vector<double> score_with_linear(const LinearModel& model,
                                      const std::vector<Sentence>& sentences,
                                      const NormalizeConfig& norm) {
  std::vector<double> scores(sentences.size(), 0.0);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto normalized = normalize_pipeline(sentences[i], nullptr, norm);
    if (!normalized) continue;
    scores[i] =
        predict_linear(model, featurize_hashed(normalized->tokens,
                                               model.dimension));
  }
  return scores;
}

std::vector<double> score_with_transformer(
    const TinyTransformer& model, const std::vector<Sentence>& sentences,
    const NormalizeConfig& norm) {
  std::vector<double> scores(sentences.size(), 0.0);

  std::vector<Sentence> kept;
  std::vector<std::size_t> kept_index;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto normalized = normalize_pipeline(sentences[i], nullptr, norm);
    if (!normalized) continue;
    kept.push_back(std::move(*normalized));
    kept_index.push_back(i);
  }

  constexpr std::size_t kChunk = 32;
  for (std::size_t i = 0; i < kept.size(); i += kChunk) {
    std::vector<const Sentence*> chunk;
    for (std::size_t j = i; j < std::min(kept.size(), i + kChunk); ++j) {
      chunk.push_back(&kept[j]);
    }
    const Batch batch =
        encode_batch(model.vocab(), chunk, model.config().max_len);
    const std::vector<double> probs = model.predict_probs(batch);
    for (std::size_t j = 0; j < probs.size(); ++j) {
      scores[kept_index[i + j]] = probs[j];
    }
  }
  return scores;
}

}  // namespace

std::vector<double> score_sentences(const AnyModel& model,
                                    const std::vector<Sentence>& sentences,
                                    const NormalizeConfig& norm) {
  if (const auto* linear = std::get_if<LinearModel>(&model)) {
    return score_with_linear(*linear, sentences, norm);
  }
  return score_with_transformer(std::get<TinyTransformer>(model), sentences,
                                norm);
}

EvalResult evaluate_scores(const std::vector<double>& scores,
                           const std::vector<int>& gold, double threshold) {
  std::vector<int> predictions(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    predictions[i] = scores[i] >= threshold ? 1 : 0;
  }
  EvalResult result;
  result.cm = confusion(predictions, gold);
  result.m = metrics(result.cm);
  return result;
}

EvalResult evaluate_model(const AnyModel& model, const Corpus& corpus,
                          double threshold, const NormalizeConfig& norm) {
  const std::vector<Sentence> sentences = flatten(corpus);
  std::vector<int> gold;
  gold.reserve(sentences.size());
  for (const auto& s : sentences) {
    gold.push_back(s.label == Label::relevant ? 1 : 0);
  }
  return evaluate_scores(score_sentences(model, sentences, norm), gold,
                         threshold);
}

}  // namespace threatlens
