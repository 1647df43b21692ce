#include "vocseg/metrics/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "vocseg/common/threads.hpp"

namespace vocseg::metrics {

OverlapMetrics overlap_metrics(const LabelMask& pred, const LabelMask& truth, uint8_t cls) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw std::invalid_argument("mask dimensions differ");
  OverlapMetrics m;
  for (size_t i = 0; i < pred.pixels(); ++i) {
    const bool p = pred.values[i] == cls;
    const bool t = truth.values[i] == cls;
    m.predicted_pixels += p;
    m.support_pixels += t;
    m.intersection += p && t;
  }
  const size_t uni = m.predicted_pixels + m.support_pixels - m.intersection;
  if (uni == 0) {
    m.iou = 1.0;  // both empty, by convention
    m.dice = 1.0;
  } else {
    m.iou = static_cast<double>(m.intersection) / static_cast<double>(uni);
    m.dice = 2.0 * static_cast<double>(m.intersection) /
             static_cast<double>(m.predicted_pixels + m.support_pixels);
  }
  if (m.predicted_pixels > 0)
    m.precision = static_cast<double>(m.intersection) / static_cast<double>(m.predicted_pixels);
  if (m.support_pixels > 0)
    m.recall = static_cast<double>(m.intersection) / static_cast<double>(m.support_pixels);
  return m;
}

ClassMetrics class_metrics(const LabelMask& pred, const LabelMask& truth, uint8_t cls) {
  ClassMetrics cm;
  cm.cls = cls;
  const OverlapMetrics om = overlap_metrics(pred, truth, cls);
  cm.iou = om.iou;
  cm.dice = om.dice;
  cm.precision = om.precision;
  cm.recall = om.recall;
  cm.support_pixels = om.support_pixels;
  cm.predicted_pixels = om.predicted_pixels;
  if (auto sd = surface_distances(pred, truth, cls)) {
    cm.assd_mm = sd->assd_mm;
    cm.hd95_mm = sd->hd95_mm;
  }
  return cm;
}

FpFnMap fp_fn_map(const LabelMask& pred, const LabelMask& truth, uint8_t cls) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw std::invalid_argument("mask dimensions differ");
  FpFnMap m;
  m.width = pred.width;
  m.height = pred.height;
  m.codes.resize(pred.pixels());
  for (size_t i = 0; i < pred.pixels(); ++i) {
    const bool p = pred.values[i] == cls;
    const bool t = truth.values[i] == cls;
    Confusion c;
    if (p && t) {
      c = Confusion::TP;
      ++m.tp;
    } else if (p) {
      c = Confusion::FP;
      ++m.fp;
    } else if (t) {
      c = Confusion::FN;
      ++m.fn;
    } else {
      c = Confusion::TN;
      ++m.tn;
    }
    m.codes[i] = static_cast<uint8_t>(c);
  }
  return m;
}

namespace {

MetricAggregate aggregate(const std::vector<std::optional<double>>& xs) {
  MetricAggregate a;
  std::vector<double> defined;
  for (const auto& x : xs) {
    if (x)
      defined.push_back(*x);
    else
      ++a.undefined;
  }
  a.defined = defined.size();
  if (defined.empty()) return a;
  double sum = 0;
  for (double v : defined) sum += v;
  a.mean = sum / static_cast<double>(defined.size());
  double ss = 0;
  for (double v : defined) ss += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(ss / static_cast<double>(defined.size()));
  a.quantiles.min = percentile(defined, 0.0);
  a.quantiles.q1 = percentile(defined, 0.25);
  a.quantiles.median = percentile(defined, 0.5);
  a.quantiles.q3 = percentile(defined, 0.75);
  a.quantiles.max = percentile(defined, 1.0);
  return a;
}

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

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v, int prec = 6) {
  return v ? fmt(*v, prec) : std::string("NA");
}

}  // namespace

DatasetEvaluation evaluate_dataset(const std::vector<LabelMask>& preds,
                                   const std::vector<LabelMask>& truths, int n_classes,
                                   const std::vector<std::string>& class_names) {
  if (preds.size() != truths.size())
    throw std::invalid_argument("prediction/truth sequence lengths differ");
  if (n_classes < 2) throw std::invalid_argument("need at least background + 1 class");

  DatasetEvaluation ev;
  ev.per_frame.resize(preds.size());

  // frames are independent; aggregation below runs in frame order
  const int nt = threads::kernel_threads();
#pragma omp parallel for num_threads(nt) schedule(dynamic)
  for (long long f = 0; f < static_cast<long long>(preds.size()); ++f) {
    std::vector<ClassMetrics> row;
    for (int c = 1; c < n_classes; ++c)
      row.push_back(class_metrics(preds[f], truths[f], static_cast<uint8_t>(c)));
    ev.per_frame[f] = std::move(row);
  }

  for (int c = 1; c < n_classes; ++c) {
    ClassSummary cs;
    cs.cls = c;
    cs.name = static_cast<size_t>(c) < class_names.size() ? class_names[c]
                                                          : "class" + std::to_string(c);
    std::vector<std::optional<double>> iou, dice, prec, rec, assd, hd;
    for (const auto& frame : ev.per_frame) {
      const ClassMetrics& cm = frame[c - 1];
      iou.push_back(cm.iou);
      dice.push_back(cm.dice);
      prec.push_back(cm.precision);
      rec.push_back(cm.recall);
      assd.push_back(cm.assd_mm);
      hd.push_back(cm.hd95_mm);
    }
    cs.iou = aggregate(iou);
    cs.dice = aggregate(dice);
    cs.precision = aggregate(prec);
    cs.recall = aggregate(rec);
    cs.assd_mm = aggregate(assd);
    cs.hd95_mm = aggregate(hd);
    ev.per_class.push_back(std::move(cs));
  }

  // frame-level foreground means, then mean ± std over frames
  std::vector<double> fiou, fdice, fassd, fhd;
  for (const auto& frame : ev.per_frame) {
    double siou = 0, sdice = 0, sassd = 0, shd = 0;
    int niou = 0, ndist = 0;
    for (const auto& cm : frame) {
      if (cm.iou) {
        siou += *cm.iou;
        sdice += *cm.dice;
        ++niou;
      }
      if (cm.assd_mm) {
        sassd += *cm.assd_mm;
        shd += *cm.hd95_mm;
        ++ndist;
      }
    }
    if (niou) {
      fiou.push_back(siou / niou);
      fdice.push_back(sdice / niou);
    }
    if (ndist) {
      fassd.push_back(sassd / ndist);
      fhd.push_back(shd / ndist);
    }
  }
  const MeanStd a = mean_std(fiou), b = mean_std(fdice), c = mean_std(fassd), d = mean_std(fhd);
  ev.mean_iou = a.mean;
  ev.std_iou = a.stddev;
  ev.mean_dice = b.mean;
  ev.std_dice = b.stddev;
  ev.mean_assd_mm = c.mean;
  ev.std_assd_mm = c.stddev;
  ev.mean_hd95_mm = d.mean;
  ev.std_hd95_mm = d.stddev;
  return ev;
}

std::string per_frame_csv(const DatasetEvaluation& eval) {
  std::string out =
      "frame,class,class_name,iou,dice,precision,recall,assd_mm,hd95_mm,support_px,predicted_px\n";
  for (size_t f = 0; f < eval.per_frame.size(); ++f)
    for (size_t c = 0; c < eval.per_frame[f].size(); ++c) {
      const ClassMetrics& cm = eval.per_frame[f][c];
      const std::string name = eval.per_class[c].name;
      out += std::to_string(f) + "," + std::to_string(cm.cls) + "," + name + "," +
             opt_fmt(cm.iou) + "," + opt_fmt(cm.dice) + "," + opt_fmt(cm.precision) + "," +
             opt_fmt(cm.recall) + "," + opt_fmt(cm.assd_mm, 4) + "," + opt_fmt(cm.hd95_mm, 4) +
             "," + std::to_string(cm.support_pixels) + "," + std::to_string(cm.predicted_pixels) +
             "\n";
    }
  return out;
}

std::string summary_markdown(const DatasetEvaluation& eval) {
  std::string out;
  out += "| Class | IoU | Dice | ASSD (mm) | HD95 (mm) | undefined |\n";
  out += "|---|---|---|---|---|---|\n";
  auto cell = [](const MetricAggregate& a, int prec) {
    if (a.defined == 0) return std::string("NA");
    return fmt(a.mean, prec) + " ± " + fmt(a.stddev, prec);
  };
  for (const auto& cs : eval.per_class) {
    const size_t undef = cs.assd_mm.undefined;
    out += "| " + cs.name + " | " + cell(cs.iou, 2) + " | " + cell(cs.dice, 2) + " | " +
           cell(cs.assd_mm, 2) + " | " + cell(cs.hd95_mm, 2) + " | " + std::to_string(undef) +
           " |\n";
  }
  out += "| overall | " + fmt(eval.mean_iou, 2) + " ± " + fmt(eval.std_iou, 2) + " | " +
         fmt(eval.mean_dice, 2) + " ± " + fmt(eval.std_dice, 2) + " | " +
         fmt(eval.mean_assd_mm, 2) + " ± " + fmt(eval.std_assd_mm, 2) + " | " +
         fmt(eval.mean_hd95_mm, 2) + " ± " + fmt(eval.std_hd95_mm, 2) + " | |\n";
  return out;
}

}  // namespace vocseg::metrics
