#pragma once

#include <cstdint>
#include <vector>

#include "threatlens/features.hpp"
#include "threatlens/sampling.hpp"
#include "threatlens/train_config.hpp"

namespace threatlens {

// Hashed n-gram logistic regression, the sparse linear baseline.
struct LinearModel {
  std::uint32_t dimension = 0;
  std::vector<double> weights;  // length == dimension
  double bias = 0.0;
  ClassWeights trained_with{1.0, 1.0};
};

struct LinearTrainResult {
  LinearModel model;
  std::vector<double> epoch_losses;  // class-weighted mean BCE per epoch
};

// Minimises class-weighted binary cross-entropy by per-example SGD.
// Deterministic given cfg.seed. Throws ValidationError when a class is
// missing and DivergenceError when the loss goes non-finite.
LinearTrainResult train_linear(const std::vector<SparseFeatures>& features,
                               const std::vector<int>& labels,
                               const ClassWeights& weights,
                               const TrainConfig& cfg);

double predict_linear(const LinearModel& model, const SparseFeatures& x);

}  // namespace threatlens
