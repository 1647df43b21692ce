#pragma once

#include "vocseg/harness/trainer.hpp"
#include "vocseg/synthdata/synthdata.hpp"

namespace vocseg::train {

// Desk-scale ablation preset: the default 5-speaker synthetic dataset and
// the toy model/training dimensions the ablation grid runs at on a laptop
// CPU. One definition so the acceptance suite, CLI docs, and experiments
// agree.
struct DeskPreset {
  static synth::GeneratorConfig dataset() {
    synth::GeneratorConfig gc;
    gc.speakers = 5;
    gc.frames_per_speaker = 48;
    gc.augment = 1;
    gc.seed = 20250809;
    return gc;
  }

  static model::ModelConfig model() {
    model::ModelConfig mc;
    mc.image_size = 64;
    mc.patch_size = 8;
    mc.d_model = 48;
    mc.n_heads = 4;
    mc.n_encoder_layers = 2;
    mc.n_decoder_layers = 2;
    mc.mlp_ratio = 2;
    return mc;
  }

  static TrainConfig training() {
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.batch_size = 8;
    tc.patience = 5;
    tc.max_epochs = 18;
    tc.modality_dropout_p = 0.25;
    tc.seed = 1;
    tc.unfreeze_schedule = {{1, 1}, {2, 0}};
    return tc;
  }
};

}  // namespace vocseg::train
