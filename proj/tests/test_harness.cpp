#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "vocseg/common/rng.hpp"
#include "vocseg/harness/ablation.hpp"
#include "vocseg/harness/runconfig.hpp"
#include "vocseg/harness/trainer.hpp"
#include "vocseg/synthdata/synthdata.hpp"

using namespace vocseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

model::ModelConfig tiny_model() {
  model::ModelConfig mc;
  mc.image_size = 32;
  mc.patch_size = 8;
  mc.d_model = 32;
  mc.n_heads = 4;
  mc.n_encoder_layers = 2;
  mc.n_decoder_layers = 1;
  mc.fusion_mode = model::FusionMode::CrossAttention;
  return mc;
}

// tiny on-disk dataset shared by the heavier cases
struct TinyData {
  TempDir dir{"vocseg_harness_ds"};
  synth::Manifest manifest;
  std::vector<synth::Sample> samples;

  explicit TinyData(int frames = 14, int image_size = 32) {
    synth::GeneratorConfig gc;
    gc.speakers = 3;
    gc.frames_per_speaker = frames;
    gc.augment = 0;
    gc.seed = 404;
    manifest = synth::generate_dataset(gc, dir.path.string());
    for (size_t i = 0; i < manifest.records.size(); ++i)
      samples.push_back(
          synth::preprocess(synth::load_record(dir.path.string(), manifest, i), manifest,
                            image_size));
  }

  std::vector<synth::Sample> view(const std::vector<size_t>& idx) const {
    std::vector<synth::Sample> v;
    for (size_t k : idx) v.push_back(samples[k]);
    return v;
  }
};

uint64_t fingerprint(const model::Network<float>& net, const std::string& prefix) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& e : net.params().entries()) {
    if (e.name.rfind(prefix, 0) != 0) continue;
    for (float v : e.tensor.values()) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      h ^= bits;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

TEST_CASE("adamw: zero gradient with zero decay leaves parameters unchanged") {
  model::ModelConfig mc = tiny_model();
  model::Network<float> net(mc, 1);
  auto& entry = net.params().entries()[0];
  auto before = entry.tensor.values();
  entry.tensor.zero_grad();

  train::AdamW<float> opt({1e-2, 0.9, 0.999, 1e-8, 0.0});
  std::vector<model::ParamEntry<float>*> params = {&entry};
  opt.step(params);
  CHECK(entry.tensor.values() == before);
}

TEST_CASE("adamw: pure decay strictly shrinks parameters") {
  auto x = nc::TensorF::from({3}, {1.0f, -2.0f, 0.5f}, true);
  model::ParamEntry<float> e{"p", x, false};
  train::AdamW<float> opt({1e-2, 0.9, 0.999, 1e-8, 0.1});
  std::vector<model::ParamEntry<float>*> params = {&e};
  auto prev = x.values();
  for (int i = 0; i < 5; ++i) {
    x.zero_grad();
    opt.step(params);
    for (size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(x.values()[k]) < std::abs(prev[k]));
      CHECK(std::signbit(x.values()[k]) == std::signbit(prev[k]));
    }
    prev = x.values();
  }
}

TEST_CASE("adamw: converges on a scalar quadratic") {
  auto x = nc::TensorD::from({1}, {1.0}, true);
  model::ParamEntry<double> e{"x", x, false};
  train::AdamW<double> opt({1e-1, 0.9, 0.999, 1e-8, 0.0});
  std::vector<model::ParamEntry<double>*> params = {&e};
  for (int i = 0; i < 500; ++i) {
    x.zero_grad();
    auto loss = nc::mul(x, x);
    nc::backward(loss);
    opt.step(params);
  }
  CHECK(std::abs(x.values()[0]) < 1e-3);
}

TEST_CASE("adamw: NaN gradient aborts with diagnostics") {
  auto x = nc::TensorF::from({2}, {1.0f, 2.0f}, true);
  x.node()->ensure_grad();
  x.node()->grad[1] = std::numeric_limits<float>::quiet_NaN();
  model::ParamEntry<float> e{"theta", x, false};
  train::AdamW<float> opt;
  std::vector<model::ParamEntry<float>*> params = {&e};
  CHECK_THROWS_WITH_AS(opt.step(params),
                       doctest::Contains("NaN gradient in parameter 'theta'"),
                       std::runtime_error);
}

TEST_CASE("early stopping halts after patience non-improving epochs") {
  TinyData data;
  auto split = synth::split_loso(data.manifest, 0);

  model::ModelConfig mc = tiny_model();
  train::TrainConfig tc;
  tc.learning_rate = 1e-12;  // effectively constant: first epoch stays best
  tc.batch_size = 4;
  tc.patience = 1;
  tc.max_epochs = 50;
  tc.seed = 11;
  tc.weights.contrastive = 0.0;
  tc.contrastive_enabled = false;

  model::Network<float> net(mc, tc.seed);
  auto res = train::train(net, data.view(split.train), data.view(split.val), tc);
  CHECK(res.stopped_early);
  CHECK(res.epochs_run == 2);  // epoch 0 improves over -inf, epoch 1 does not
  CHECK(res.best_epoch == 0);
}

TEST_CASE("training is deterministic: same seed, identical logs and parameters") {
  TinyData data;
  auto split = synth::split_loso(data.manifest, 1);

  model::ModelConfig mc = tiny_model();
  train::TrainConfig tc;
  tc.learning_rate = 3e-4;
  tc.batch_size = 4;
  tc.patience = 3;
  tc.max_epochs = 3;
  tc.seed = 77;
  tc.unfreeze_schedule = {{1, 1}, {2, 0}};

  model::Network<float> a(mc, tc.seed);
  auto ra = train::train(a, data.view(split.train), data.view(split.val), tc);
  model::Network<float> b(mc, tc.seed);
  auto rb = train::train(b, data.view(split.train), data.view(split.val), tc);

  CHECK(ra.step_log_csv == rb.step_log_csv);
  CHECK(ra.best_val_dice == rb.best_val_dice);
  for (size_t i = 0; i < a.params().entries().size(); ++i)
    CHECK(a.params().entries()[i].tensor.values() == b.params().entries()[i].tensor.values());
}

TEST_CASE("frozen audio encoder never changes; image encoder follows the schedule") {
  TinyData data;
  auto split = synth::split_loso(data.manifest, 2);

  model::ModelConfig mc = tiny_model();
  train::TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 4;
  tc.patience = 10;
  tc.max_epochs = 2;
  tc.seed = 5;
  tc.unfreeze_schedule = {{1, 1}, {5, 0}};  // block 1 at epoch 1; block 0 + stem never (cap 2)

  model::Network<float> net(mc, tc.seed);
  const uint64_t audio_before = fingerprint(net, "audio_enc.");
  const uint64_t block0_before = fingerprint(net, "img_enc.block0");
  const uint64_t stem_before = fingerprint(net, "img_enc.stem");
  const uint64_t head_before = fingerprint(net, "head.");

  train::train(net, data.view(split.train), data.view(split.val), tc);

  CHECK(fingerprint(net, "audio_enc.") == audio_before);
  CHECK(fingerprint(net, "img_enc.block0") == block0_before);  // epoch 5 never reached
  CHECK(fingerprint(net, "img_enc.stem") == stem_before);
  CHECK(fingerprint(net, "head.") != head_before);  // trainable from epoch 0

  // gradient flow respects the schedule: block 1 unfroze at epoch 1 and
  // received gradient; block 0, the stem, and the audio encoder never did
  bool block1_grad = false;
  for (const auto& e : net.params().entries()) {
    if (e.name.rfind("audio_enc.", 0) == 0) CHECK_FALSE(e.tensor.has_grad());
    if (e.name.rfind("img_enc.block0", 0) == 0) CHECK_FALSE(e.tensor.has_grad());
    if (e.name.rfind("img_enc.stem", 0) == 0) CHECK_FALSE(e.tensor.has_grad());
    if (e.name.rfind("img_enc.block1", 0) == 0 && e.tensor.has_grad()) block1_grad = true;
  }
  CHECK(block1_grad);
}

TEST_CASE("training dice reaches 0.95 on a small learnable set within 30 epochs") {
  // trivially learnable: 5 distinct frames repeated to 50 samples, train == val
  auto sp = synth::speaker_params(42, 0);
  synth::Manifest m;
  m.norm_min = 0;
  m.norm_max = 1;
  std::vector<synth::Sample> set;
  for (int rep = 0; rep < 10; ++rep)
    for (int f = 0; f < 5; ++f)
      set.push_back(synth::preprocess(synth::generate_frame(sp, f, 42), m, 64));

  model::ModelConfig mc;
  mc.image_size = 64;
  mc.patch_size = 8;
  mc.d_model = 48;
  mc.n_heads = 4;
  mc.fusion_mode = model::FusionMode::CrossAttention;
  train::TrainConfig tc;
  tc.learning_rate = 2e-3;
  tc.batch_size = 6;
  tc.patience = 30;
  tc.max_epochs = 30;
  tc.seed = 3;
  tc.weights.contrastive = 0.0;
  tc.contrastive_enabled = false;
  tc.unfreeze_schedule = {};  // everything trainable from epoch 0

  model::Network<float> net(mc, tc.seed);
  auto res = train::train(net, set, set, tc);
  CHECK(res.best_val_dice >= 0.95);
}

TEST_CASE("per-epoch training loss is non-increasing in >= 90% of epochs (smoke)") {
  TinyData data;
  std::vector<size_t> idx;
  for (size_t i = 0; i < data.manifest.records.size() && idx.size() < 12; ++i) idx.push_back(i);
  auto set = data.view(idx);

  model::ModelConfig mc = tiny_model();
  train::TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 6;
  tc.patience = 40;
  tc.max_epochs = 12;
  tc.seed = 9;
  tc.weights.contrastive = 0.0;
  tc.contrastive_enabled = false;

  model::Network<float> net(mc, tc.seed);
  auto res = train::train(net, set, set, tc);
  int non_increasing = 0;
  for (size_t e = 1; e < res.epochs.size(); ++e)
    if (res.epochs[e].train_loss <= res.epochs[e - 1].train_loss + 1e-9) ++non_increasing;
  CHECK(res.epochs.size() >= 10);
  CHECK(non_increasing >= static_cast<int>(0.9 * (res.epochs.size() - 1)));
}

TEST_CASE("contrastive disabled is bit-identical to weight zero with module never built") {
  TinyData data;
  auto split = synth::split_loso(data.manifest, 0);

  model::ModelConfig mc = tiny_model();
  train::TrainConfig tc;
  tc.learning_rate = 5e-4;
  tc.batch_size = 4;
  tc.patience = 5;
  tc.max_epochs = 2;
  tc.seed = 13;

  // run A: contrastive disabled via flag
  train::TrainConfig ta = tc;
  ta.contrastive_enabled = false;
  model::Network<float> a(mc, tc.seed);
  auto ra = train::train(a, data.view(split.train), data.view(split.val), ta);

  // run B: weight zero
  train::TrainConfig tb = tc;
  tb.contrastive_enabled = false;
  tb.weights.contrastive = 0.0;
  model::Network<float> b(mc, tc.seed);
  auto rb = train::train(b, data.view(split.train), data.view(split.val), tb);

  CHECK(ra.step_log_csv == rb.step_log_csv);
  for (size_t i = 0; i < a.params().entries().size(); ++i)
    CHECK(a.params().entries()[i].tensor.values() == b.params().entries()[i].tensor.values());
}

TEST_CASE("video-only evaluation runs and matches standard eval for image-only nets") {
  TinyData data;
  auto split = synth::split_loso(data.manifest, 0);
  model::ModelConfig mc = tiny_model();
  mc.fusion_mode = model::FusionMode::ImageOnly;
  model::Network<float> net(mc, 21);

  auto test = data.view(split.test);
  auto standard = train::evaluate(net, test, data.manifest.class_names, false);
  auto video_only = train::evaluate(net, test, data.manifest.class_names, true);
  CHECK(standard.mean_dice == video_only.mean_dice);
  CHECK(standard.mean_hd95_mm == video_only.mean_hd95_mm);
  CHECK(standard.eval.per_class.size() == 4);  // n_seg_classes - 1 foreground rows
}

TEST_CASE("ablation report has the Table shape and is reproducible") {
  TinyData data(10);

  train::AblationOptions opt;
  opt.base_model = tiny_model();
  opt.base_train.learning_rate = 1e-3;
  opt.base_train.batch_size = 4;
  opt.base_train.patience = 2;
  opt.base_train.max_epochs = 1;
  opt.base_train.seed = 31;
  opt.configs = {"imageonly", "vocsegmri"};
  opt.n_seeds = 1;
  opt.workers = 2;

  auto r1 = train::run_ablation(data.dir.path.string(), opt);
  CHECK(r1.rows.size() == 2);
  CHECK(r1.runs.size() == 2u * 3u);  // configs x folds
  for (const auto& row : r1.rows) {
    CHECK(row.runs == 3);
    CHECK(row.iou_std >= 0.0);
  }
  auto r2 = train::run_ablation(data.dir.path.string(), opt);
  CHECK(r1.csv() == r2.csv());
  CHECK(r1.markdown() == r2.markdown());
  CHECK(r1.markdown().find("| Model |") == 0);

  CHECK_THROWS_AS([&] {
    auto bad = opt;
    bad.configs = {"unknown_config"};
    train::run_ablation(data.dir.path.string(), bad);
  }(), std::invalid_argument);
}

TEST_CASE("run config: strict schema, defaults materialized, overrides") {
  nlohmann::json j = {{"model", {{"d_model", 48}, {"fusion_mode", "concat_vap"}}},
                      {"train", {{"learning_rate", 2e-4}, {"patience", 7}}},
                      {"loss", {{"contrastive", 0.2}}},
                      {"dataset", "/tmp/ds"}};
  auto cfg = train::run_config_from_json(j);
  CHECK(cfg.model.d_model == 48);
  CHECK(cfg.model.fusion_mode == model::FusionMode::ConcatVAP);
  CHECK(cfg.train.learning_rate == 2e-4);
  CHECK(cfg.train.patience == 7);
  CHECK(cfg.train.weights.contrastive == 0.2);
  CHECK(cfg.dataset == "/tmp/ds");
  // defaults materialized in the resolved copy
  auto resolved = train::run_config_to_json(cfg);
  CHECK(resolved.at("model").at("image_size").get<int>() == 64);
  CHECK(resolved.at("train").at("batch_size").get<int>() == 8);
  CHECK(resolved.at("train").contains("unfreeze_schedule"));

  nlohmann::json bad = {{"model", {{"dmodel", 48}}}};
  CHECK_THROWS_WITH_AS(train::run_config_from_json(bad),
                       doctest::Contains("model.dmodel"), std::invalid_argument);
  nlohmann::json bad2 = {{"trainx", nlohmann::json::object()}};
  CHECK_THROWS_AS(train::run_config_from_json(bad2), std::invalid_argument);
}
