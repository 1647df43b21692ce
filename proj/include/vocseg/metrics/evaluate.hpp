#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vocseg/metrics/distance.hpp"
#include "vocseg/metrics/labelmask.hpp"

namespace vocseg::metrics {

struct OverlapMetrics {
  std::optional<double> iou, dice, precision, recall;
  size_t support_pixels = 0;    // truth
  size_t predicted_pixels = 0;  // prediction
  size_t intersection = 0;
};

// iou = |P∩T|/|P∪T|, dice = 2|P∩T|/(|P|+|T|), precision = |P∩T|/|P|,
// recall = |P∩T|/|T|. Undefined when the denominator is 0; both-empty
// masks score iou = dice = 1 by convention.
OverlapMetrics overlap_metrics(const LabelMask& pred, const LabelMask& truth, uint8_t cls);

struct ClassMetrics {
  int cls = 0;
  std::optional<double> iou, dice, precision, recall;
  std::optional<double> assd_mm, hd95_mm;
  size_t support_pixels = 0;
  size_t predicted_pixels = 0;
};

ClassMetrics class_metrics(const LabelMask& pred, const LabelMask& truth, uint8_t cls);

// Per-pixel confusion coding for one class.
enum class Confusion : uint8_t { TN = 0, TP = 1, FP = 2, FN = 3 };

struct FpFnMap {
  int width = 0, height = 0;
  std::vector<uint8_t> codes;  // Confusion values
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

FpFnMap fp_fn_map(const LabelMask& pred, const LabelMask& truth, uint8_t cls);

struct Quantiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct MetricAggregate {
  double mean = 0;
  double stddev = 0;  // population std over defined entries
  size_t defined = 0;
  size_t undefined = 0;
  Quantiles quantiles;
};

struct ClassSummary {
  int cls = 0;
  std::string name;
  MetricAggregate iou, dice, precision, recall, assd_mm, hd95_mm;
};

struct DatasetEvaluation {
  std::vector<std::vector<ClassMetrics>> per_frame;  // [frame][foreground class]
  std::vector<ClassSummary> per_class;               // foreground classes only
  // means over frames of per-frame foreground means (defined entries only)
  double mean_iou = 0, mean_dice = 0, mean_assd_mm = 0, mean_hd95_mm = 0;
  double std_iou = 0, std_dice = 0, std_assd_mm = 0, std_hd95_mm = 0;
};

// Evaluates aligned prediction/truth sequences over foreground classes
// 1..n_classes-1 (class 0 is background).
DatasetEvaluation evaluate_dataset(const std::vector<LabelMask>& preds,
                                   const std::vector<LabelMask>& truths, int n_classes,
                                   const std::vector<std::string>& class_names = {});

// Report emission: one CSV row per (frame, class) and a markdown summary
// table of mean ± std per class.
std::string per_frame_csv(const DatasetEvaluation& eval);
std::string summary_markdown(const DatasetEvaluation& eval);

}  // namespace vocseg::metrics
