#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "vocseg/harness/ablation.hpp"
#include "vocseg/harness/runconfig.hpp"
#include "vocseg/model/checkpoint.hpp"
#include "vocseg/verify/verify.hpp"

namespace fs = std::filesystem;
using namespace vocseg;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

synth::Manifest require_dataset(const std::string& dir) {
  if (dir.empty() || !fs::exists(fs::path(dir) / "manifest.json"))
    throw std::invalid_argument("dataset path missing or has no manifest.json: '" + dir + "'");
  return synth::load_manifest(dir);
}

std::vector<synth::Sample> load_view(const std::string& dir, const synth::Manifest& m,
                                     const std::vector<size_t>& idx, int image_size) {
  std::vector<synth::Sample> v;
  v.reserve(idx.size());
  for (size_t k : idx)
    v.push_back(synth::preprocess(synth::load_record(dir, m, k), m, image_size));
  return v;
}

void emit_resolved_config(const train::RunConfig& cfg, const std::string& out_dir) {
  write_text(out_dir + "/resolved_config.json", train::run_config_to_json(cfg).dump(2) + "\n");
}

std::string epochs_csv(const train::TrainResult& r) {
  std::string out = "epoch,train_loss,val_dice,improved\n";
  for (const auto& e : r.epochs) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%d\n", e.epoch, e.train_loss, e.val_dice,
                  e.improved ? 1 : 0);
    out += buf;
  }
  return out;
}

int cmd_generate_data(int speakers, int frames, int augment, uint64_t seed,
                      const std::string& out) {
  if (out.empty()) throw std::invalid_argument("--out is required");
  synth::GeneratorConfig gc;
  gc.speakers = speakers;
  gc.frames_per_speaker = frames;
  gc.augment = augment;
  gc.seed = seed;
  const synth::Manifest m = synth::generate_dataset(gc, out);
  std::cout << "wrote " << m.records.size() << " samples (" << speakers << " speakers x "
            << frames << " frames x " << (1 + augment) << " copies) to " << out << "\n";
  const auto freqs = synth::class_pixel_frequencies(out, m);
  std::cout << "class pixel frequencies:\n";
  for (size_t c = 0; c < freqs.size(); ++c) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  %-12s %.5f\n", m.class_names[c].c_str(), freqs[c]);
    std::cout << buf;
  }
  return 0;
}

int cmd_train(train::RunConfig cfg, int fold, const std::string& out_dir) {
  const synth::Manifest m = require_dataset(cfg.dataset);
  const synth::Split split = synth::split_loso(m, fold);
  fs::create_directories(out_dir);
  emit_resolved_config(cfg, out_dir);

  auto train_set = load_view(cfg.dataset, m, split.train, cfg.model.image_size);
  auto val_set = load_view(cfg.dataset, m, split.val, cfg.model.image_size);

  cfg.model.modality_dropout_p = cfg.train.modality_dropout_p;
  model::Network<float> net(cfg.model, cfg.train.seed);
  const train::TrainResult res = train::train(net, train_set, val_set, cfg.train);

  model::save_checkpoint(net, out_dir + "/checkpoint.bin");
  write_text(out_dir + "/train.log.csv", res.step_log_csv);
  write_text(out_dir + "/epochs.csv", epochs_csv(res));
  std::cout << "trained fold " << fold << ": best val dice " << res.best_val_dice
            << " at epoch " << res.best_epoch << " (" << res.epochs_run << " epochs"
            << (res.stopped_early ? ", early stop" : "") << ")\n"
            << "checkpoint: " << out_dir << "/checkpoint.bin\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, int fold, bool video_only,
             const std::string& out_dir) {
  const synth::Manifest m = require_dataset(data);
  if (!fs::exists(checkpoint))
    throw std::invalid_argument("checkpoint not found: " + checkpoint);
  model::Network<float> net = model::load_checkpoint(checkpoint);
  const synth::Split split = synth::split_loso(m, fold);
  auto test_set = load_view(data, m, split.test, net.config().image_size);

  const train::EvalResult r = train::evaluate(net, test_set, m.class_names, video_only);
  fs::create_directories(out_dir);
  write_text(out_dir + "/eval_per_frame.csv", metrics::per_frame_csv(r.eval));
  write_text(out_dir + "/eval_summary.md", metrics::summary_markdown(r.eval));
  std::cout << "| Model | IoU | Dice | ASSD (mm) | HD95 (mm) |\n"
            << train::table_row(video_only ? "video-only" : "standard", r) << "\n"
            << "reports in " << out_dir << "\n";
  return 0;
}

int cmd_ablate(train::RunConfig cfg, const std::string& configs_arg, int seeds, int workers,
               const std::string& out_dir) {
  require_dataset(cfg.dataset);
  train::AblationOptions opt;
  opt.base_model = cfg.model;
  opt.base_train = cfg.train;
  opt.n_seeds = seeds;
  opt.workers = workers;
  if (!configs_arg.empty()) {
    opt.configs.clear();
    std::stringstream ss(configs_arg);
    std::string item;
    while (std::getline(ss, item, ',')) opt.configs.push_back(item);
  }
  fs::create_directories(out_dir);
  emit_resolved_config(cfg, out_dir);

  const train::AblationReport rep = train::run_ablation(cfg.dataset, opt);
  write_text(out_dir + "/ablation.csv", rep.csv());
  write_text(out_dir + "/ablation.md", rep.markdown());
  std::cout << rep.markdown() << "reports in " << out_dir << "\n";
  return 0;
}

int cmd_metrics(const std::string& pred_dir, const std::string& truth_dir, double spacing,
                const std::string& out_dir) {
  if (!fs::is_directory(pred_dir) || !fs::is_directory(truth_dir))
    throw std::invalid_argument("prediction and truth mask directories are required");

  auto list_masks = [](const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".vstn") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
  };
  const auto pred_names = list_masks(pred_dir);
  const auto truth_names = list_masks(truth_dir);

  std::vector<std::string> unmatched;
  for (const auto& n : pred_names)
    if (!fs::exists(fs::path(truth_dir) / n)) unmatched.push_back("truth missing: " + n);
  for (const auto& n : truth_names)
    if (!fs::exists(fs::path(pred_dir) / n)) unmatched.push_back("prediction missing: " + n);
  if (!unmatched.empty()) {
    std::string msg = "unmatched mask files:";
    for (const auto& u : unmatched) msg += "\n  " + u;
    throw std::invalid_argument(msg);
  }
  if (pred_names.empty()) throw std::invalid_argument("no .vstn masks found in " + pred_dir);

  std::vector<metrics::LabelMask> preds, truths;
  std::vector<std::string> class_names;
  int n_classes = 2;
  for (const auto& n : pred_names) {
    std::vector<std::string> names;
    auto p = metrics::load_mask((fs::path(pred_dir) / n).string(), &names);
    auto t = metrics::load_mask((fs::path(truth_dir) / n).string(),
                                class_names.empty() ? &class_names : nullptr);
    if (spacing > 0) p.spacing_mm = t.spacing_mm = spacing;
    for (uint8_t v : p.values) n_classes = std::max(n_classes, v + 1);
    for (uint8_t v : t.values) n_classes = std::max(n_classes, v + 1);
    preds.push_back(std::move(p));
    truths.push_back(std::move(t));
  }
  if (!class_names.empty()) n_classes = std::max(n_classes, static_cast<int>(class_names.size()));

  const auto ev = metrics::evaluate_dataset(preds, truths, n_classes, class_names);
  fs::create_directories(out_dir);
  write_text(out_dir + "/metrics_per_frame.csv", metrics::per_frame_csv(ev));
  write_text(out_dir + "/metrics_summary.md", metrics::summary_markdown(ev));

  size_t undefined = 0;
  for (const auto& cs : ev.per_class) undefined += cs.assd_mm.undefined;
  std::cout << metrics::summary_markdown(ev) << pred_names.size() << " frames, " << undefined
            << " undefined distance entries excluded from aggregation\nreports in " << out_dir
            << "\n";
  return 0;
}

int cmd_verify(const std::string& suite) {
  std::vector<verify::SuiteResult> results;
  if (suite == "gradients" || suite == "all") results.push_back(verify::verify_gradients());
  if (suite == "metrics" || suite == "all") results.push_back(verify::verify_metrics(200));
  if (suite == "losses" || suite == "all") results.push_back(verify::verify_losses());
  if (results.empty())
    throw std::invalid_argument("unknown suite '" + suite +
                                "' (expected gradients, metrics, losses, or all)");
  bool ok = true;
  for (const auto& r : results) {
    std::cout << verify::format(r);
    ok = ok && r.all_passed();
  }
  std::cout << (ok ? "verification passed\n" : "verification FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vocseg: multimodal articulator segmentation on synthetic rtMRI-like data"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "generate a synthetic multimodal dataset");
  int speakers = 5, frames = 300, augment = 0;
  uint64_t gen_seed = 17;
  std::string gen_out;
  gen->add_option("--speakers", speakers, "number of speakers")->capture_default_str();
  gen->add_option("--frames-per-speaker", frames, "frames per speaker")->capture_default_str();
  gen->add_option("--augment", augment, "augmented copies per frame")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generation seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();

  // shared config/override options for train/ablate
  std::string config_path, data_dir, out_dir = "out";
  uint64_t seed_override = 0;
  bool seed_set = false;
  double lr_override = 0;
  int epochs_override = -1, batch_override = -1, patience_override = -1;
  std::string fusion_override;

  auto add_run_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration file");
    sub->add_option("--data", data_dir, "dataset directory (overrides config)");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed_override, "seed override")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--lr", lr_override, "learning rate override");
    sub->add_option("--epochs", epochs_override, "max epochs override");
    sub->add_option("--batch-size", batch_override, "batch size override");
    sub->add_option("--patience", patience_override, "early-stopping patience override");
    sub->add_option("--fusion", fusion_override,
                    "fusion mode override (image_only, concat_va, concat_vp, concat_vap, "
                    "cross_attention)");
  };

  auto* tr = app.add_subcommand("train", "train one leave-one-speaker-out fold");
  int fold = 0;
  add_run_opts(tr);
  tr->add_option("--fold", fold, "held-out speaker id")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a held-out fold");
  std::string ckpt;
  bool video_only = false;
  int eval_fold = 0;
  ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  ev->add_option("--data", data_dir, "dataset directory");
  ev->add_option("--fold", eval_fold, "held-out speaker id")->capture_default_str();
  ev->add_option("--out", out_dir, "output directory")->capture_default_str();
  ev->add_flag("--video-only", video_only, "drop audio and phonology at inference");

  auto* ab = app.add_subcommand("ablate", "run the fusion/contrastive ablation grid");
  std::string configs_arg;
  int seeds = 3, workers = 0;
  add_run_opts(ab);
  ab->add_option("--configs", configs_arg,
                 "comma list: imageonly,concat_va,concat_vp,concat_vap,crossatt,contrastive,"
                 "vocsegmri");
  ab->add_option("--seeds", seeds, "seeds per (config, fold)")->capture_default_str();
  ab->add_option("--workers", workers, "parallel training runs (0 = auto)")
      ->capture_default_str();

  auto* me = app.add_subcommand("metrics", "score prediction masks against truth masks");
  std::string pred_dir, truth_dir;
  double spacing = 0;
  me->add_option("--pred", pred_dir, "directory of predicted .vstn masks")->required();
  me->add_option("--truth", truth_dir, "directory of truth .vstn masks")->required();
  me->add_option("--spacing", spacing, "pixel spacing in mm (overrides sidecars)");
  me->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* vf = app.add_subcommand("verify", "run the oracle verification suites");
  std::string suite = "all";
  vf->add_option("suite", suite, "gradients | metrics | losses | all")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate_data(speakers, frames, augment, gen_seed, gen_out);

    if (tr->parsed() || ab->parsed()) {
      train::RunConfig cfg;
      if (!config_path.empty()) cfg = train::load_run_config(config_path);
      else cfg.train.unfreeze_schedule =
               train::default_unfreeze_schedule(cfg.model.n_encoder_layers);
      if (!data_dir.empty()) cfg.dataset = data_dir;
      if (seed_set) cfg.train.seed = seed_override;
      if (lr_override > 0) cfg.train.learning_rate = lr_override;
      if (epochs_override >= 0) cfg.train.max_epochs = epochs_override;
      if (batch_override > 0) cfg.train.batch_size = batch_override;
      if (patience_override > 0) cfg.train.patience = patience_override;
      if (!fusion_override.empty())
        cfg.model.fusion_mode = model::fusion_mode_from_string(fusion_override);
      cfg.validate();
      if (tr->parsed()) return cmd_train(cfg, fold, out_dir);
      return cmd_ablate(cfg, configs_arg, seeds, workers, out_dir);
    }

    if (ev->parsed()) return cmd_eval(ckpt, data_dir, eval_fold, video_only, out_dir);
    if (me->parsed()) return cmd_metrics(pred_dir, truth_dir, spacing, out_dir);
    if (vf->parsed()) return cmd_verify(suite);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
