#pragma once

#include <json.hpp>

#include "vocseg/harness/trainer.hpp"
#include "vocseg/model/config.hpp"

namespace vocseg::train {

// CLI-facing run configuration: sections model / train / loss /
// contrastive plus the dataset path. Unknown keys are rejected with their
// path; defaults are materialized into the emitted resolved copy.
struct RunConfig {
  model::ModelConfig model;
  TrainConfig train;
  std::string dataset;

  void validate() const {
    model.validate();
    train.validate();
  }
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);  // fully resolved

}  // namespace vocseg::train
