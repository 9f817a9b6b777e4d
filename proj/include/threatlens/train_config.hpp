#pragma once

#include <cstddef>
#include <cstdint>

namespace threatlens {

// sgd is the default; adam is deterministic here (sequential elementwise
// updates in a fixed parameter order) and is what the bundled fixture
// presets use, since plain SGD moves a transformer off its init very slowly.
enum class Optimizer { sgd, adam };

// Defaults follow the best-run hyperparameters: 5 epochs, batch 32,
// learning rate 3e-5. Language-model pretraining uses the 30-epoch preset
// (see the pretrain subcommand).
struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 3e-5;
  std::uint64_t seed = 42;
  double mask_prob = 0.15;          // in (0, 1)
  std::size_t unfreeze_per_epoch = 1;
  double lr_decay_per_layer = 2.6;  // discriminative fine-tuning divisor
  double clip_norm = 1.0;           // global gradient-norm clip
  bool allow_stage_skip = false;    // permit classifier training on a fresh net
  Optimizer optimizer = Optimizer::sgd;
};

inline constexpr std::size_t kLmEpochsPreset = 30;

}  // namespace threatlens
