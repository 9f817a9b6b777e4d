#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "threatlens/encoding.hpp"
#include "threatlens/sampling.hpp"
#include "threatlens/tensor.hpp"
#include "threatlens/train_config.hpp"
#include "threatlens/vocab.hpp"

namespace threatlens {

// A from-scratch transformer encoder small enough to train on a laptop. It
// carries the full staged-training machinery: masked-LM pretraining, LM
// fine-tuning on task text, then classifier fine-tuning with gradual
// top-down unfreezing and discriminative per-layer learning rates. The LM
// head is tied to the token embeddings; classification reads the [CLS]
// position.
struct TransformerConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_len = 128;
};

struct Param {
  std::string name;
  // -1 = heads (always trainable), 0 = embeddings, 1..n_layers = encoder
  // layers bottom-up.
  int group = -1;
  Mat w;
  Mat g;
};

// Training stages: 0 fresh, 1 LM-pretrained, 2 LM-fine-tuned, 3 classifier.
inline constexpr int kStageFresh = 0;
inline constexpr int kStagePretrained = 1;
inline constexpr int kStageLmFinetuned = 2;
inline constexpr int kStageClassifier = 3;

class TinyTransformer {
 public:
  TinyTransformer(TransformerConfig config, Vocab vocab, std::uint64_t seed);

  const TransformerConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }

  int stage() const { return stage_; }
  void set_stage(int stage) { stage_ = stage; }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  Param& param(const std::string& name);

  // One freeze flag / LR scale per group (index 0 = embeddings, then layers
  // bottom-up). Heads are never frozen and always train at the base rate.
  const std::vector<std::uint8_t>& freeze_mask() const { return freeze_; }
  const std::vector<double>& lr_scales() const { return lr_scales_; }
  void set_frozen(std::size_t group, bool frozen) { freeze_[group] = frozen; }
  void set_lr_scale(std::size_t group, double scale) {
    lr_scales_[group] = scale;
  }

  // Layer l counted from the top trains at base_lr / decay^l; the embedding
  // group sits below the bottom layer.
  void set_discriminative_lr_scales(double decay);
  void reset_lr_scales();

  // Unfreezes the top n groups in top-down order (top layer first, the
  // embedding group last); everything else is frozen.
  void unfreeze_top(std::size_t n_groups);

  // Losses. The *_grad variants accumulate parameter gradients.
  double mlm_loss(const MaskedBatch& mb) const;
  double mlm_loss_grad(const MaskedBatch& mb);
  double cls_loss(const Batch& batch, const std::vector<int>& labels,
                  const ClassWeights& weights) const;
  double cls_loss_grad(const Batch& batch, const std::vector<int>& labels,
                       const ClassWeights& weights);

  void zero_grads();
  // Clips the global gradient norm of trainable parameters to clip_norm
  // (<= 0 disables), then applies SGD with the per-group LR scales. Frozen
  // groups are not touched at all.
  void sgd_step(double lr, double clip_norm);

  // Same clipping/freeze/LR-scale semantics with the optimizer chosen by
  // cfg.optimizer; Adam moments live in the state and are sized on first
  // use. Frozen groups accumulate no moments.
  struct OptimizerState {
    std::vector<Mat> m;
    std::vector<Mat> v;
    std::size_t t = 0;
  };
  void optimizer_step(OptimizerState& state, const TrainConfig& cfg);

  // P(relevant) per row, softmax over the two-way head at [CLS].
  std::vector<double> predict_probs(const Batch& batch) const;
  // Argmax LM predictions at the masked positions.
  std::vector<int> predict_masked(const MaskedBatch& mb) const;

  // Post-softmax attention matrices (one width x width matrix per
  // sentence/layer/head), for inspecting the probability-row invariant.
  std::vector<Mat> attention_matrices(const Batch& batch) const;

 private:
  struct LayerCache;
  struct Cache;

  Cache forward(const Batch& batch) const;
  void backward(const Cache& cache, Mat d_hidden);
  bool group_trainable(int group) const;

  TransformerConfig config_;
  Vocab vocab_;
  std::vector<Param> params_;
  std::vector<std::uint8_t> freeze_;
  std::vector<double> lr_scales_;
  int stage_ = kStageFresh;
};

struct TrainLog {
  std::vector<double> epoch_losses;
  std::vector<std::string> notes;
};

// Stage 1: masked-LM pretraining, optionally on a merged task+scraped
// corpus. Aborts with DivergenceError when the loss goes non-finite or
// exceeds 10x the first epoch.
TrainLog pretrain_lm(TinyTransformer& model,
                     const std::vector<Sentence>& corpus,
                     const TrainConfig& cfg);

// Stage 2: the same objective restricted to the task corpus. Requires
// stage >= 1.
TrainLog finetune_lm(TinyTransformer& model,
                     const std::vector<Sentence>& task_corpus,
                     const TrainConfig& cfg);

// Stage 3: class-weighted classifier training with gradual unfreezing.
// Requires stage >= 2 unless cfg.allow_stage_skip is set (noted in the log).
TrainLog finetune_classifier(TinyTransformer& model,
                             const std::vector<Sentence>& labeled,
                             const ClassWeights& weights,
                             const TrainConfig& cfg);

// Masked-token accuracy under a fresh deterministic corruption.
double masked_accuracy(const TinyTransformer& model,
                       const std::vector<Sentence>& corpus, double mask_prob,
                       std::uint64_t seed);

}  // namespace threatlens
