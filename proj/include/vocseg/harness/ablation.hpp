#pragma once

#include "vocseg/harness/evaluator.hpp"
#include "vocseg/synthdata/synthdata.hpp"

namespace vocseg::train {

// Table-1 shaped configuration grid.
inline const std::vector<std::string> kAblationConfigs = {
    "imageonly", "concat_va", "concat_vp", "concat_vap", "crossatt", "contrastive", "vocsegmri"};

struct AblationRun {
  std::string config;
  int fold = 0;
  int seed_index = 0;
  double iou = 0, dice = 0, assd_mm = 0, hd95_mm = 0;
  int epochs_run = 0;
  double best_val_dice = 0;
};

struct AblationRow {
  std::string config;
  double iou_mean = 0, iou_std = 0;
  double dice_mean = 0, dice_std = 0;
  double assd_mean = 0, assd_std = 0;
  double hd95_mean = 0, hd95_std = 0;
  size_t runs = 0;
};

struct AblationReport {
  std::vector<AblationRun> runs;   // every (config, fold, seed) cell
  std::vector<AblationRow> rows;   // aggregated per configuration

  std::string csv() const;       // per-run rows
  std::string markdown() const;  // Table-1 shaped summary
};

struct AblationOptions {
  model::ModelConfig base_model;
  TrainConfig base_train;
  std::vector<std::string> configs = kAblationConfigs;
  int n_seeds = 3;
  int workers = 0;  // 0 = min(hardware, runs)
};

// Maps a grid configuration name onto (fusion mode, contrastive flag).
void apply_ablation_config(const std::string& name, model::ModelConfig& mc, TrainConfig& tc);

// Trains configs x folds x seeds and aggregates mean ± std per config.
// Distinct runs execute on a thread pool; results are position-keyed so
// the report is independent of scheduling.
AblationReport run_ablation(const std::string& data_dir, const AblationOptions& opt);

}  // namespace vocseg::train
