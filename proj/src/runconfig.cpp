#include "vocseg/harness/runconfig.hpp"

#include <fstream>
#include <set>

namespace vocseg::train {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config error at " + where + ": object expected");
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw std::invalid_argument("config error at " + where + "." + key + ": unknown key");
}

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"model", "train", "loss", "contrastive", "dataset"}, "config");
  RunConfig cfg;

  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m,
                   {"image_size", "patch_size", "d_model", "n_heads", "n_encoder_layers",
                    "n_decoder_layers", "mlp_ratio", "n_audio_features", "n_audio_frames",
                    "n_phono_classes", "n_seg_classes", "fusion_mode", "modality_dropout_p",
                    "projection_dim"},
                   "model");
    maybe(m, "image_size", cfg.model.image_size);
    maybe(m, "patch_size", cfg.model.patch_size);
    maybe(m, "d_model", cfg.model.d_model);
    maybe(m, "n_heads", cfg.model.n_heads);
    maybe(m, "n_encoder_layers", cfg.model.n_encoder_layers);
    maybe(m, "n_decoder_layers", cfg.model.n_decoder_layers);
    maybe(m, "mlp_ratio", cfg.model.mlp_ratio);
    maybe(m, "n_audio_features", cfg.model.n_audio_features);
    maybe(m, "n_audio_frames", cfg.model.n_audio_frames);
    maybe(m, "n_phono_classes", cfg.model.n_phono_classes);
    maybe(m, "n_seg_classes", cfg.model.n_seg_classes);
    maybe(m, "projection_dim", cfg.model.projection_dim);
    if (m.contains("fusion_mode"))
      cfg.model.fusion_mode = model::fusion_mode_from_string(m.at("fusion_mode"));
    maybe(m, "modality_dropout_p", cfg.model.modality_dropout_p);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t,
                   {"learning_rate", "batch_size", "patience", "max_epochs",
                    "unfreeze_schedule", "modality_dropout_p", "seed", "contrastive_enabled",
                    "weight_decay", "beta1", "beta2", "adam_eps"},
                   "train");
    maybe(t, "learning_rate", cfg.train.learning_rate);
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "patience", cfg.train.patience);
    maybe(t, "max_epochs", cfg.train.max_epochs);
    maybe(t, "modality_dropout_p", cfg.train.modality_dropout_p);
    maybe(t, "seed", cfg.train.seed);
    maybe(t, "contrastive_enabled", cfg.train.contrastive_enabled);
    maybe(t, "weight_decay", cfg.train.weight_decay);
    maybe(t, "beta1", cfg.train.beta1);
    maybe(t, "beta2", cfg.train.beta2);
    maybe(t, "adam_eps", cfg.train.adam_eps);
    if (t.contains("unfreeze_schedule")) {
      cfg.train.unfreeze_schedule.clear();
      for (const auto& e : t.at("unfreeze_schedule")) {
        if (!e.is_array() || e.size() != 2)
          throw std::invalid_argument(
              "config error at train.unfreeze_schedule: [epoch, block] pairs expected");
        cfg.train.unfreeze_schedule.push_back({e[0].get<int>(), e[1].get<int>()});
      }
    } else {
      cfg.train.unfreeze_schedule = default_unfreeze_schedule(cfg.model.n_encoder_layers);
    }
  } else {
    cfg.train.unfreeze_schedule = default_unfreeze_schedule(cfg.model.n_encoder_layers);
  }

  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    reject_unknown(l, {"ce", "dice", "contrastive"}, "loss");
    maybe(l, "ce", cfg.train.weights.ce);
    maybe(l, "dice", cfg.train.weights.dice);
    maybe(l, "contrastive", cfg.train.weights.contrastive);
  }

  if (j.contains("contrastive")) {
    const auto& c = j.at("contrastive");
    reject_unknown(c, {"temperature", "global_level", "local_level", "projection_dim"},
                   "contrastive");
    maybe(c, "temperature", cfg.train.contrastive.temperature);
    maybe(c, "global_level", cfg.train.contrastive.global_level);
    maybe(c, "local_level", cfg.train.contrastive.local_level);
    if (c.contains("projection_dim"))
      cfg.model.projection_dim = c.at("projection_dim").get<int>();
  }

  maybe(j, "dataset", cfg.dataset);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["model"] = {{"image_size", cfg.model.image_size},
                {"patch_size", cfg.model.patch_size},
                {"d_model", cfg.model.d_model},
                {"n_heads", cfg.model.n_heads},
                {"n_encoder_layers", cfg.model.n_encoder_layers},
                {"n_decoder_layers", cfg.model.n_decoder_layers},
                {"mlp_ratio", cfg.model.mlp_ratio},
                {"n_audio_features", cfg.model.n_audio_features},
                {"n_audio_frames", cfg.model.n_audio_frames},
                {"n_phono_classes", cfg.model.n_phono_classes},
                {"n_seg_classes", cfg.model.n_seg_classes},
                {"fusion_mode", model::to_string(cfg.model.fusion_mode)},
                {"modality_dropout_p", cfg.model.modality_dropout_p},
                {"projection_dim", cfg.model.projection_dim}};
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& s : cfg.train.unfreeze_schedule)
    sched.push_back(nlohmann::json::array({s.epoch, s.block}));
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"patience", cfg.train.patience},
                {"max_epochs", cfg.train.max_epochs},
                {"unfreeze_schedule", std::move(sched)},
                {"modality_dropout_p", cfg.train.modality_dropout_p},
                {"seed", cfg.train.seed},
                {"contrastive_enabled", cfg.train.contrastive_enabled},
                {"weight_decay", cfg.train.weight_decay},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"adam_eps", cfg.train.adam_eps}};
  j["loss"] = {{"ce", cfg.train.weights.ce},
               {"dice", cfg.train.weights.dice},
               {"contrastive", cfg.train.weights.contrastive}};
  j["contrastive"] = {{"temperature", cfg.train.contrastive.temperature},
                      {"global_level", cfg.train.contrastive.global_level},
                      {"local_level", cfg.train.contrastive.local_level},
                      {"projection_dim", cfg.model.projection_dim}};
  j["dataset"] = cfg.dataset;
  return j;
}

}  // namespace vocseg::train
