#include "threatlens/linear.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "threatlens/errors.hpp"
#include "threatlens/rng.hpp"

namespace threatlens {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double raw_score(const LinearModel& model, const SparseFeatures& x) {
  double z = model.bias;
  for (const auto& [index, value] : x.entries) {
    z += model.weights[index] * value;
  }
  return z;
}

}  // namespace

LinearTrainResult train_linear(const std::vector<SparseFeatures>& features,
                               const std::vector<int>& labels,
                               const ClassWeights& weights,
                               const TrainConfig& cfg) {
  if (features.size() != labels.size() || features.empty()) {
    throw ValidationError("train_linear: features/labels size mismatch");
  }
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += y == 1 ? 1 : 0;
  if (n_pos == 0 || n_pos == labels.size()) {
    throw ValidationError("train_linear: need at least one example per class");
  }

  LinearTrainResult result;
  LinearModel& model = result.model;
  model.dimension = features.front().dimension;
  model.weights.assign(model.dimension, 0.0);
  model.trained_with = weights;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t i : order) {
      const SparseFeatures& x = features[i];
      if (x.dimension != model.dimension) {
        throw ValidationError("train_linear: inconsistent feature dimension");
      }
      const int y = labels[i];
      const double w = y == 1 ? weights.w_relevant : weights.w_irrelevant;
      const double p = sigmoid(raw_score(model, x));

      const double eps = 1e-12;
      loss_sum += -w * (y == 1 ? std::log(p + eps) : std::log(1.0 - p + eps));

      const double g = w * (p - static_cast<double>(y));
      for (const auto& [index, value] : x.entries) {
        model.weights[index] -= cfg.learning_rate * g * value;
      }
      model.bias -= cfg.learning_rate * g;
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("train_linear: non-finite loss at epoch " +
                            std::to_string(epoch + 1));
    }
    result.epoch_losses.push_back(epoch_loss);
  }
  return result;
}

double predict_linear(const LinearModel& model, const SparseFeatures& x) {
  if (x.dimension != model.dimension) {
    throw ValidationError("predict_linear: feature dimension " +
                          std::to_string(x.dimension) + " != model dimension " +
                          std::to_string(model.dimension));
  }
  return sigmoid(raw_score(model, x));
}

}  // namespace threatlens
