#pragma once

#include "vocseg/harness/trainer.hpp"
#include "vocseg/metrics/evaluate.hpp"

namespace vocseg::train {

struct EvalResult {
  metrics::DatasetEvaluation eval;
  double mean_iou = 0, mean_dice = 0, mean_assd_mm = 0, mean_hd95_mm = 0;
  size_t frames = 0;
  bool video_only = false;
};

// Inference with argmax decoding over the test partition, then the full
// metrics engine. video_only substitutes placeholder memory.
EvalResult evaluate(const model::Network<float>& net, const std::vector<synth::Sample>& test_set,
                    const std::vector<std::string>& class_names, bool video_only = false);

// Table-row style line: "name | iou ± std | dice ± std | assd | hd95".
std::string table_row(const std::string& name, const EvalResult& r);

}  // namespace vocseg::train
