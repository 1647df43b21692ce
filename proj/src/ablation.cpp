#include "vocseg/harness/ablation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "vocseg/common/threads.hpp"

namespace vocseg::train {

void apply_ablation_config(const std::string& name, model::ModelConfig& mc, TrainConfig& tc) {
  using model::FusionMode;
  if (name == "imageonly") {
    mc.fusion_mode = FusionMode::ImageOnly;
    tc.contrastive_enabled = false;
  } else if (name == "concat_va") {
    mc.fusion_mode = FusionMode::ConcatVA;
    tc.contrastive_enabled = false;
  } else if (name == "concat_vp") {
    mc.fusion_mode = FusionMode::ConcatVP;
    tc.contrastive_enabled = false;
  } else if (name == "concat_vap") {
    mc.fusion_mode = FusionMode::ConcatVAP;
    tc.contrastive_enabled = false;
  } else if (name == "crossatt") {
    mc.fusion_mode = FusionMode::CrossAttention;
    tc.contrastive_enabled = false;
  } else if (name == "contrastive") {
    mc.fusion_mode = FusionMode::ConcatVAP;  // contrastive supervision alone
    tc.contrastive_enabled = true;
  } else if (name == "vocsegmri") {
    mc.fusion_mode = FusionMode::CrossAttention;
    tc.contrastive_enabled = true;
  } else {
    throw std::invalid_argument("unknown ablation config: " + name);
  }
}

namespace {

struct MeanStd {
  double mean = 0, stddev = 0;
};
MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double v : xs) r.mean += v;
  r.mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double v : xs) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

}  // namespace

AblationReport run_ablation(const std::string& data_dir, const AblationOptions& opt) {
  const synth::Manifest manifest = synth::load_manifest(data_dir);
  if (manifest.config.speakers < 3)
    throw std::invalid_argument("ablation needs >= 3 speakers for leave-one-speaker-out");
  if (opt.n_seeds < 1) throw std::invalid_argument("n_seeds must be >= 1");
  for (const auto& c : opt.configs) {
    model::ModelConfig mc = opt.base_model;
    TrainConfig tc = opt.base_train;
    apply_ablation_config(c, mc, tc);  // validates the name
  }

  // preprocess every record once; runs share the immutable sample store
  std::vector<synth::Sample> samples;
  samples.reserve(manifest.records.size());
  for (size_t i = 0; i < manifest.records.size(); ++i)
    samples.push_back(synth::preprocess(synth::load_record(data_dir, manifest, i), manifest,
                                        opt.base_model.image_size));

  const int folds = manifest.config.speakers;
  struct Cell {
    std::string config;
    int fold, seed_index;
  };
  std::vector<Cell> cells;
  for (const auto& c : opt.configs)
    for (int fold = 0; fold < folds; ++fold)
      for (int s = 0; s < opt.n_seeds; ++s) cells.push_back({c, fold, s});

  AblationReport report;
  report.runs.resize(cells.size());

  std::atomic<size_t> next{0};
  auto worker = [&] {
    threads::ScopedSerial serial;  // kernels stay serial inside pool threads
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      const Cell& cell = cells[i];

      model::ModelConfig mc = opt.base_model;
      TrainConfig tc = opt.base_train;
      apply_ablation_config(cell.config, mc, tc);
      mc.modality_dropout_p = tc.modality_dropout_p;

      size_t cfg_index = 0;
      for (size_t k = 0; k < kAblationConfigs.size(); ++k)
        if (kAblationConfigs[k] == cell.config) cfg_index = k;
      tc.seed = rng::mix(opt.base_train.seed,
                         cfg_index * 1000003ULL + static_cast<uint64_t>(cell.fold) * 1009ULL +
                             static_cast<uint64_t>(cell.seed_index));

      const synth::Split split = synth::split_loso(manifest, cell.fold);
      auto view = [&](const std::vector<size_t>& idx) {
        std::vector<synth::Sample> v;
        v.reserve(idx.size());
        for (size_t k : idx) v.push_back(samples[k]);
        return v;
      };

      model::Network<float> net(mc, tc.seed);
      const TrainResult tr = train(net, view(split.train), view(split.val), tc);
      const EvalResult ev = evaluate(net, view(split.test), manifest.class_names);

      AblationRun run;
      run.config = cell.config;
      run.fold = cell.fold;
      run.seed_index = cell.seed_index;
      run.iou = ev.mean_iou;
      run.dice = ev.mean_dice;
      run.assd_mm = ev.mean_assd_mm;
      run.hd95_mm = ev.mean_hd95_mm;
      run.epochs_run = tr.epochs_run;
      run.best_val_dice = tr.best_val_dice;
      report.runs[i] = run;
    }
  };

  int workers = opt.workers > 0 ? opt.workers : threads::max_threads();
  workers = std::min<int>(workers, static_cast<int>(cells.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& c : opt.configs) {
    std::vector<double> iou, dice, assd, hd;
    for (const auto& r : report.runs)
      if (r.config == c) {
        iou.push_back(r.iou);
        dice.push_back(r.dice);
        assd.push_back(r.assd_mm);
        hd.push_back(r.hd95_mm);
      }
    AblationRow row;
    row.config = c;
    row.runs = iou.size();
    const MeanStd a = mean_std(iou), b = mean_std(dice), d = mean_std(assd), e = mean_std(hd);
    row.iou_mean = a.mean;
    row.iou_std = a.stddev;
    row.dice_mean = b.mean;
    row.dice_std = b.stddev;
    row.assd_mean = d.mean;
    row.assd_std = d.stddev;
    row.hd95_mean = e.mean;
    row.hd95_std = e.stddev;
    report.rows.push_back(row);
  }
  return report;
}

std::string AblationReport::csv() const {
  std::string out = "config,fold,seed,iou,dice,assd_mm,hd95_mm,epochs,best_val_dice\n";
  for (const auto& r : runs) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6f,%.6f,%.4f,%.4f,%d,%.6f\n", r.config.c_str(),
                  r.fold, r.seed_index, r.iou, r.dice, r.assd_mm, r.hd95_mm, r.epochs_run,
                  r.best_val_dice);
    out += buf;
  }
  return out;
}

std::string AblationReport::markdown() const {
  std::string out = "| Model | IoU | Dice | ASSD (mm) | HD95 (mm) |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "| %s | %.2f ± %.2f | %.2f ± %.2f | %.2f ± %.2f | %.2f ± %.2f |\n",
                  r.config.c_str(), r.iou_mean, r.iou_std, r.dice_mean, r.dice_std, r.assd_mean,
                  r.assd_std, r.hd95_mean, r.hd95_std);
    out += buf;
  }
  return out;
}

}  // namespace vocseg::train
