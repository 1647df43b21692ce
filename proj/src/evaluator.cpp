#include "vocseg/harness/evaluator.hpp"

#include <cstdio>

namespace vocseg::train {

EvalResult evaluate(const model::Network<float>& net, const std::vector<synth::Sample>& test_set,
                    const std::vector<std::string>& class_names, bool video_only) {
  if (test_set.empty()) throw std::invalid_argument("evaluate: empty test partition");
  if (test_set.front().image.dim(1) != net.config().image_size)
    throw std::invalid_argument("evaluate: checkpoint image size does not match data");

  EvalResult r;
  r.video_only = video_only;
  auto preds = predict_masks(net, test_set, video_only);
  std::vector<metrics::LabelMask> truths;
  truths.reserve(test_set.size());
  for (const auto& s : test_set) truths.push_back(s.mask);

  r.eval = metrics::evaluate_dataset(preds, truths, net.config().n_seg_classes, class_names);
  r.mean_iou = r.eval.mean_iou;
  r.mean_dice = r.eval.mean_dice;
  r.mean_assd_mm = r.eval.mean_assd_mm;
  r.mean_hd95_mm = r.eval.mean_hd95_mm;
  r.frames = test_set.size();
  return r;
}

std::string table_row(const std::string& name, const EvalResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "| %s | %.2f ± %.2f | %.2f ± %.2f | %.2f ± %.2f | %.2f ± %.2f |",
                name.c_str(), r.eval.mean_iou, r.eval.std_iou, r.eval.mean_dice,
                r.eval.std_dice, r.eval.mean_assd_mm, r.eval.std_assd_mm, r.eval.mean_hd95_mm,
                r.eval.std_hd95_mm);
  return buf;
}

}  // namespace vocseg::train
