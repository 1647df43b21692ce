#include "vocseg/harness/trainer.hpp"

#include <algorithm>
#include <cstdio>

#include "vocseg/common/rng.hpp"

namespace vocseg::train {

std::vector<UnfreezeStep> default_unfreeze_schedule(int n_encoder_layers) {
  std::vector<UnfreezeStep> sched;
  if (n_encoder_layers < 1) return sched;
  sched.push_back({3, n_encoder_layers - 1});
  for (int b = n_encoder_layers - 2; b >= 0; --b) sched.push_back({6, b});
  return sched;
}

metrics::LabelMask decode_mask(const nc::TensorT<float>& logits, double spacing_mm) {
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  const size_t hw = static_cast<size_t>(h) * w;
  metrics::LabelMask m = metrics::LabelMask::filled(w, h, 0, spacing_mm);
  const float* lv = logits.values().data();
  for (size_t p = 0; p < hw; ++p) {
    int best = 0;
    float bv = lv[p];
    for (int k = 1; k < c; ++k)
      if (lv[k * hw + p] > bv) {  // strict: ties stay at the lower index
        bv = lv[k * hw + p];
        best = k;
      }
    m.values[p] = static_cast<uint8_t>(best);
  }
  return m;
}

std::vector<metrics::LabelMask> predict_masks(const model::Network<float>& net,
                                              const std::vector<synth::Sample>& samples,
                                              bool video_only) {
  nc::NoGradGuard no_grad;
  std::vector<metrics::LabelMask> preds;
  preds.reserve(samples.size());
  model::ForwardOptions opt;
  opt.video_only = video_only;
  for (const auto& s : samples) {
    model::ModelInput<float> in{s.image, s.audio, s.phono};
    auto out = net.forward_one(in, opt);
    preds.push_back(decode_mask(out.logits, s.mask.spacing_mm));
  }
  return preds;
}

double mean_foreground_dice(const std::vector<metrics::LabelMask>& preds,
                            const std::vector<metrics::LabelMask>& truths, int n_classes) {
  double total = 0;
  size_t frames = 0;
  for (size_t f = 0; f < preds.size(); ++f) {
    double sum = 0;
    int defined = 0;
    for (int c = 1; c < n_classes; ++c) {
      auto om = metrics::overlap_metrics(preds[f], truths[f], static_cast<uint8_t>(c));
      if (om.dice) {
        sum += *om.dice;
        ++defined;
      }
    }
    if (defined) {
      total += sum / defined;
      ++frames;
    }
  }
  return frames ? total / static_cast<double>(frames) : 0.0;
}

namespace {

struct FreezeController {
  // image-encoder parameters stay frozen until their scheduled epoch
  static bool is_image_encoder(const std::string& name) {
    return name.rfind("img_enc.", 0) == 0;
  }

  static void apply_initial(model::Network<float>& net, const TrainConfig& cfg) {
    if (cfg.unfreeze_schedule.empty()) return;
    for (auto& e : net.params().entries())
      if (is_image_encoder(e.name)) e.tensor.set_requires_grad(false);
  }

  static void apply_epoch(model::Network<float>& net, const TrainConfig& cfg, int epoch) {
    const int top = net.config().n_encoder_layers - 1;
    int lowest_scheduled = net.config().n_encoder_layers;
    for (const auto& step : cfg.unfreeze_schedule)
      lowest_scheduled = std::min(lowest_scheduled, step.block);
    for (const auto& step : cfg.unfreeze_schedule) {
      if (step.epoch != epoch) continue;
      const std::string prefix = "img_enc.block" + std::to_string(step.block);
      for (auto& e : net.params().entries()) {
        if (e.name.rfind(prefix, 0) == 0) e.tensor.set_requires_grad(true);
        // final encoder norm follows the top block, the stem the lowest one
        if (step.block == top && e.name.rfind("img_enc.ln", 0) == 0)
          e.tensor.set_requires_grad(true);
        if (step.block == lowest_scheduled && e.name.rfind("img_enc.stem", 0) == 0)
          e.tensor.set_requires_grad(true);
      }
    }
  }
};

std::string fmt_row(long step, const loss::LossBreakdown<float>& lb) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%ld,%.6f,%.6f,%.6f,%.6f,%.6f\n", step, lb.ce, lb.dice,
                lb.con_global, lb.con_local, lb.total_value);
  return buf;
}

}  // namespace

TrainResult train(model::Network<float>& net, const std::vector<synth::Sample>& train_set,
                  const std::vector<synth::Sample>& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("train: empty train or validation partition");

  loss::LossWeights weights = cfg.weights;
  if (!cfg.contrastive_enabled) weights.contrastive = 0.0;

  AdamW<float> opt({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
  FreezeController::apply_initial(net, cfg);

  auto trainable = [&]() {
    std::vector<model::ParamEntry<float>*> out;
    for (auto& e : net.params().entries()) {
      if (e.frozen || !e.tensor.requires_grad()) continue;
      // unused contrastive heads must not decay, or disabling the module
      // would still change the checkpoint
      if (!cfg.contrastive_enabled && e.name.rfind("contrastive.", 0) == 0) continue;
      out.push_back(&e);
    }
    return out;
  };

  rng::Stream shuffle_rng(cfg.seed, "shuffle");
  rng::Stream dropout_rng(cfg.seed, "modality_dropout");

  TrainResult res;
  res.step_log_csv = "step,ce,dice,con_global,con_local,total\n";

  std::map<std::string, std::vector<float>> best_params;
  auto snapshot = [&] {
    best_params.clear();
    for (const auto& e : net.params().entries()) best_params[e.name] = e.tensor.values();
  };
  snapshot();  // max_epochs == 0 returns the initial parameters

  double best = -1.0;
  int bad_epochs = 0;
  long step = 0;

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    FreezeController::apply_epoch(net, cfg, epoch);
    auto params = trainable();

    // Fisher-Yates with the seeded stream
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<size_t>(shuffle_rng.integer(0, static_cast<int64_t>(i) - 1))]);

    double epoch_loss = 0;
    long batches = 0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<model::ModelInput<float>> inputs;
      std::vector<const metrics::LabelMask*> masks;
      for (size_t k = begin; k < end; ++k) {
        const synth::Sample& s = train_set[order[k]];
        inputs.push_back({s.image, s.audio, s.phono});
        masks.push_back(&s.mask);
      }
      for (auto* p : params) p->tensor.zero_grad();

      model::ForwardOptions fopt;
      fopt.train = true;
      fopt.dropout_rng = &dropout_rng;
      auto outs = net.forward(inputs, fopt);
      auto lb = loss::total_loss(net, outs, masks, weights, cfg.contrastive);
      nc::backward(lb.total);
      opt.step(params);

      res.step_log_csv += fmt_row(step++, lb);
      epoch_loss += lb.total_value;
      ++batches;
    }

    auto preds = predict_masks(net, val_set);
    std::vector<metrics::LabelMask> truths;
    truths.reserve(val_set.size());
    for (const auto& s : val_set) truths.push_back(s.mask);
    const double val_dice =
        mean_foreground_dice(preds, truths, net.config().n_seg_classes);

    EpochLog el;
    el.epoch = epoch;
    el.train_loss = batches ? epoch_loss / batches : 0.0;
    el.val_dice = val_dice;
    el.improved = val_dice > best;
    res.epochs.push_back(el);
    res.epochs_run = epoch + 1;

    if (val_dice > best) {
      best = val_dice;
      res.best_val_dice = val_dice;
      res.best_epoch = epoch;
      bad_epochs = 0;
      snapshot();
    } else if (++bad_epochs >= cfg.patience) {
      res.stopped_early = true;
      break;
    }
  }

  for (auto& e : net.params().entries()) e.tensor.values() = best_params.at(e.name);
  return res;
}

}  // namespace vocseg::train
