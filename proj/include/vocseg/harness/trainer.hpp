#pragma once

#include <string>
#include <vector>

#include "vocseg/harness/adamw.hpp"
#include "vocseg/metrics/evaluate.hpp"
#include "vocseg/model/network.hpp"
#include "vocseg/objectives/losses.hpp"
#include "vocseg/synthdata/synthdata.hpp"

namespace vocseg::train {

struct UnfreezeStep {
  int epoch = 0;
  int block = 0;  // image-encoder block index; the lowest block also unfreezes the stem
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 8;  // 16 at full scale
  int patience = 15;
  int max_epochs = 100;
  std::vector<UnfreezeStep> unfreeze_schedule;  // empty = image encoder trainable from epoch 0
  double modality_dropout_p = 0.25;
  uint64_t seed = 1;
  loss::LossWeights weights;
  loss::ContrastiveConfig contrastive;
  bool contrastive_enabled = true;
  double weight_decay = 0.01;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  void validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
    for (size_t i = 1; i < unfreeze_schedule.size(); ++i)
      if (unfreeze_schedule[i].epoch < unfreeze_schedule[i - 1].epoch)
        throw std::invalid_argument("unfreeze_schedule epochs must be nondecreasing");
    weights.validate();
    contrastive.validate();
  }
};

// decoder + head train from epoch 0; top encoder block at 3, the rest
// (including the patch stem) at 6
std::vector<UnfreezeStep> default_unfreeze_schedule(int n_encoder_layers);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double val_dice = 0;
  bool improved = false;
};

struct TrainResult {
  double best_val_dice = 0;
  int best_epoch = -1;
  int epochs_run = 0;
  bool stopped_early = false;
  std::string step_log_csv;  // step,ce,dice,con_global,con_local,total
  std::vector<EpochLog> epochs;
};

// Argmax decoding with ties broken toward the lower class index.
metrics::LabelMask decode_mask(const nc::TensorT<float>& logits, double spacing_mm);

std::vector<metrics::LabelMask> predict_masks(const model::Network<float>& net,
                                              const std::vector<synth::Sample>& samples,
                                              bool video_only = false);

double mean_foreground_dice(const std::vector<metrics::LabelMask>& preds,
                            const std::vector<metrics::LabelMask>& truths, int n_classes);

// Training with early stopping on validation mean foreground Dice. The
// network is left holding the best-validation parameters.
TrainResult train(model::Network<float>& net, const std::vector<synth::Sample>& train_set,
                  const std::vector<synth::Sample>& val_set, const TrainConfig& cfg);

}  // namespace vocseg::train
