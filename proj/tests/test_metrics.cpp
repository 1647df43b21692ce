#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "vocseg/common/rng.hpp"
#include "vocseg/metrics/evaluate.hpp"

using namespace vocseg;
using metrics::LabelMask;

namespace {

LabelMask random_mask(int w, int h, int n_classes, rng::Stream& st, double spacing = 1.0) {
  LabelMask m = LabelMask::filled(w, h, 0, spacing);
  // a few random rectangles per class so surfaces are nontrivial
  for (int c = 1; c < n_classes; ++c) {
    const int boxes = static_cast<int>(st.integer(0, 2));
    for (int b = 0; b < boxes; ++b) {
      const int x0 = static_cast<int>(st.integer(0, w - 2));
      const int y0 = static_cast<int>(st.integer(0, h - 2));
      const int x1 = std::min<int>(w - 1, x0 + static_cast<int>(st.integer(1, w / 2)));
      const int y1 = std::min<int>(h - 1, y0 + static_cast<int>(st.integer(1, h / 2)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.at(x, y) = static_cast<uint8_t>(c);
    }
  }
  return m;
}

// Independent naive oracle for the accelerated path: nearest distances by
// direct enumeration, own percentile code.
double oracle_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double rank = q * (static_cast<double>(v.size()) - 1.0);
  const size_t lo = static_cast<size_t>(rank);
  const size_t hi = lo + 1 < v.size() ? lo + 1 : v.size() - 1;
  return v[lo] + (v[hi] - v[lo]) * (rank - static_cast<double>(lo));
}

struct OracleResult {
  double assd, hd95;
  bool defined;
};

OracleResult oracle_distances(const LabelMask& pred, const LabelMask& truth, uint8_t cls) {
  auto surf = [&](const LabelMask& m) {
    std::vector<std::pair<double, double>> pts;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x) {
        if (m.at(x, y) != cls) continue;
        bool b = x == 0 || y == 0 || x == m.width - 1 || y == m.height - 1;
        if (!b)
          b = m.at(x - 1, y) != cls || m.at(x + 1, y) != cls || m.at(x, y - 1) != cls ||
              m.at(x, y + 1) != cls;
        if (b) pts.emplace_back((x + 0.5) * m.spacing_mm, (y + 0.5) * m.spacing_mm);
      }
    return pts;
  };
  auto pa = surf(pred), pb = surf(truth);
  if (pa.empty() || pb.empty()) return {0, 0, false};
  std::vector<double> pooled;
  double sum = 0;
  auto directed = [&](const auto& from, const auto& to) {
    for (const auto& a : from) {
      double best = 1e300;
      for (const auto& b : to) {
        const double d = std::hypot(a.first - b.first, a.second - b.second);
        best = std::min(best, d);
      }
      pooled.push_back(best);
      sum += best;
    }
  };
  directed(pa, pb);
  directed(pb, pa);
  return {sum / static_cast<double>(pooled.size()), oracle_percentile(pooled, 0.95), true};
}

}  // namespace

TEST_CASE("overlap metrics anchors") {
  rng::Stream st(1);
  auto m = random_mask(16, 16, 3, st);
  auto om = metrics::overlap_metrics(m, m, 1);
  if (om.support_pixels > 0) {
    CHECK(*om.iou == 1.0);
    CHECK(*om.dice == 1.0);
    CHECK(*om.precision == 1.0);
    CHECK(*om.recall == 1.0);
  }

  LabelMask a = LabelMask::filled(8, 8, 0);
  LabelMask b = LabelMask::filled(8, 8, 0);
  for (int x = 0; x < 4; ++x) a.at(x, 0) = 1;
  for (int x = 4; x < 8; ++x) b.at(x, 0) = 1;
  auto dj = metrics::overlap_metrics(a, b, 1);
  CHECK(*dj.iou == 0.0);
  CHECK(*dj.dice == 0.0);
  CHECK(*dj.precision == 0.0);
  CHECK(*dj.recall == 0.0);

  // both empty: iou = dice = 1 by convention, precision/recall undefined
  auto be = metrics::overlap_metrics(LabelMask::filled(4, 4, 0), LabelMask::filled(4, 4, 0), 1);
  CHECK(*be.iou == 1.0);
  CHECK(*be.dice == 1.0);
  CHECK_FALSE(be.precision.has_value());
  CHECK_FALSE(be.recall.has_value());
}

TEST_CASE("dice equals 2*iou/(1+iou) on random masks") {
  rng::Stream st(2);
  for (int t = 0; t < 100; ++t) {
    auto a = random_mask(20, 20, 4, st);
    auto b = random_mask(20, 20, 4, st);
    for (uint8_t c = 1; c < 4; ++c) {
      auto om = metrics::overlap_metrics(a, b, c);
      if (om.iou && om.dice) {
        const double want = 2.0 * *om.iou / (1.0 + *om.iou);
        CHECK(std::abs(*om.dice - want) < 1e-12);
      }
    }
  }
  // Table-style consistency: iou 0.91 corresponds to dice 0.9529...
  const double dice = 2.0 * 0.91 / 1.91;
  CHECK(std::abs(dice - 0.9529) < 1e-4);
  CHECK(std::abs(dice - 0.95) < 0.005);
}

TEST_CASE("surface extraction anchors") {
  // full-frame region: surface is the border ring
  LabelMask full = LabelMask::filled(6, 5, 1);
  auto ring = metrics::extract_surface(full, 1);
  CHECK(ring.size() == static_cast<size_t>(2 * 6 + 2 * 5 - 4));

  // single pixel
  LabelMask single = LabelMask::filled(7, 7, 0);
  single.at(3, 3) = 2;
  CHECK(metrics::extract_surface(single, 2).size() == 1);

  // 3x3 solid square: 8 perimeter pixels
  LabelMask sq = LabelMask::filled(9, 9, 0);
  for (int y = 3; y < 6; ++y)
    for (int x = 3; x < 6; ++x) sq.at(x, y) = 1;
  CHECK(metrics::extract_surface(sq, 1).size() == 8);

  // empty class -> empty surface
  CHECK(metrics::extract_surface(sq, 3).empty());
}

TEST_CASE("assd/hd95 point anchors") {
  LabelMask a = LabelMask::filled(8, 8, 0, 2.4);
  LabelMask b = LabelMask::filled(8, 8, 0, 2.4);
  a.at(1, 1) = 1;
  b.at(4, 1) = 1;  // 3 px apart at 2.4 mm spacing -> 7.2 mm
  auto sd = metrics::surface_distances(a, b, 1);
  REQUIRE(sd.has_value());
  CHECK(sd->assd_mm == doctest::Approx(7.2).epsilon(1e-12));
  CHECK(sd->hd95_mm == doctest::Approx(7.2).epsilon(1e-12));

  auto same = metrics::surface_distances(a, a, 1);
  REQUIRE(same.has_value());
  CHECK(same->assd_mm == 0.0);
  CHECK(same->hd95_mm == 0.0);

  // empty surface -> undefined
  CHECK_FALSE(metrics::surface_distances(a, b, 2).has_value());
}

TEST_CASE("accelerated distances equal brute force on 50 random pairs") {
  rng::Stream st(3);
  int tested = 0;
  while (tested < 50) {
    const int w = static_cast<int>(st.integer(8, 32));
    const int h = static_cast<int>(st.integer(8, 32));
    const int ncls = static_cast<int>(st.integer(2, 5));
    const double spacing = st.uniform(0.5, 3.0);
    auto a = random_mask(w, h, ncls, st, spacing);
    auto b = random_mask(w, h, ncls, st, spacing);
    for (int c = 1; c < ncls; ++c) {
      auto fast = metrics::surface_distances(a, b, static_cast<uint8_t>(c));
      auto slow = oracle_distances(a, b, static_cast<uint8_t>(c));
      REQUIRE(fast.has_value() == slow.defined);
      if (!fast) continue;
      CHECK(std::abs(fast->assd_mm - slow.assd) < 1e-9);
      CHECK(std::abs(fast->hd95_mm - slow.hd95) < 1e-9);
      CHECK(fast->hd95_mm <= fast->hd_max_mm + 1e-12);
      ++tested;
    }
  }
}

TEST_CASE("distance symmetry, scale equivariance, translation invariance") {
  rng::Stream st(4);
  for (int t = 0; t < 10; ++t) {
    auto a = random_mask(24, 24, 3, st);
    auto b = random_mask(24, 24, 3, st);
    auto ab = metrics::surface_distances(a, b, 1);
    auto ba = metrics::surface_distances(b, a, 1);
    REQUIRE(ab.has_value() == ba.has_value());
    if (ab) {
      CHECK(ab->assd_mm == doctest::Approx(ba->assd_mm).epsilon(1e-12));
      CHECK(ab->hd95_mm == doctest::Approx(ba->hd95_mm).epsilon(1e-12));
    }

    // doubling spacing doubles distances exactly, overlap unchanged
    LabelMask a2 = a, b2 = b;
    a2.spacing_mm *= 2;
    b2.spacing_mm *= 2;
    auto sd2 = metrics::surface_distances(a2, b2, 1);
    if (ab && sd2) {
      CHECK(sd2->assd_mm == doctest::Approx(2 * ab->assd_mm).epsilon(1e-12));
      CHECK(sd2->hd95_mm == doctest::Approx(2 * ab->hd95_mm).epsilon(1e-12));
    }
    auto o1 = metrics::overlap_metrics(a, b, 1);
    auto o2 = metrics::overlap_metrics(a2, b2, 1);
    CHECK(o1.iou == o2.iou);
  }

  // translation by (2,1) with padding, no border clipping
  LabelMask a = LabelMask::filled(16, 16, 0);
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 9; ++x) a.at(x, y) = 1;
  LabelMask b = LabelMask::filled(16, 16, 0);
  for (int y = 4; y < 9; ++y)
    for (int x = 5; x < 9; ++x) b.at(x, y) = 1;
  auto base = metrics::surface_distances(a, b, 1);
  LabelMask at = LabelMask::filled(16, 16, 0), bt = LabelMask::filled(16, 16, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      if (x >= 2 && y >= 1) {
        at.at(x, y) = a.at(x - 2, y - 1);
        bt.at(x, y) = b.at(x - 2, y - 1);
      }
    }
  auto shifted = metrics::surface_distances(at, bt, 1);
  REQUIRE(base.has_value());
  REQUIRE(shifted.has_value());
  CHECK(base->assd_mm == doctest::Approx(shifted->assd_mm).epsilon(1e-12));
  CHECK(base->hd95_mm == doctest::Approx(shifted->hd95_mm).epsilon(1e-12));
}

TEST_CASE("fp/fn map is consistent with precision and recall") {
  rng::Stream st(5);
  for (int t = 0; t < 20; ++t) {
    auto a = random_mask(16, 16, 3, st);
    auto b = random_mask(16, 16, 3, st);
    auto m = metrics::fp_fn_map(a, b, 1);
    auto om = metrics::overlap_metrics(a, b, 1);
    CHECK(m.tp + m.fp + m.fn + m.tn == a.pixels());
    CHECK(m.tp == om.intersection);
    CHECK(m.tp + m.fp == om.predicted_pixels);
    CHECK(m.tp + m.fn == om.support_pixels);
    if (om.precision)
      CHECK(*om.precision ==
            doctest::Approx(static_cast<double>(m.tp) / (m.tp + m.fp)).epsilon(1e-12));
    if (om.recall)
      CHECK(*om.recall ==
            doctest::Approx(static_cast<double>(m.tp) / (m.tp + m.fn)).epsilon(1e-12));
  }

  // identical masks: no FP/FN; strict superset: FN 0, recall 1
  auto x = random_mask(12, 12, 2, st);
  auto same = metrics::fp_fn_map(x, x, 1);
  CHECK(same.fp == 0);
  CHECK(same.fn == 0);

  LabelMask truth = LabelMask::filled(10, 10, 0);
  for (int y = 3; y < 6; ++y)
    for (int x2 = 3; x2 < 6; ++x2) truth.at(x2, y) = 1;
  LabelMask pred = truth;
  for (int y = 2; y < 7; ++y)
    for (int x2 = 2; x2 < 7; ++x2) pred.at(x2, y) = 1;
  auto sup = metrics::fp_fn_map(pred, truth, 1);
  CHECK(sup.fn == 0);
  CHECK(sup.fp > 0);
  auto om = metrics::overlap_metrics(pred, truth, 1);
  CHECK(*om.recall == 1.0);
}

TEST_CASE("evaluate_dataset aggregates and flags undefined entries") {
  rng::Stream st(6);
  std::vector<LabelMask> preds, truths;
  for (int f = 0; f < 10; ++f) {
    preds.push_back(random_mask(20, 20, 4, st, 2.0));
    truths.push_back(random_mask(20, 20, 4, st, 2.0));
  }
  auto ev = metrics::evaluate_dataset(preds, truths, 4, {"bg", "c1", "c2", "c3"});
  CHECK(ev.per_frame.size() == 10);
  CHECK(ev.per_class.size() == 3);

  // oracle recomputation of the per-class dice mean
  for (int c = 1; c < 4; ++c) {
    std::vector<double> dices;
    for (int f = 0; f < 10; ++f) {
      auto om = metrics::overlap_metrics(preds[f], truths[f], static_cast<uint8_t>(c));
      if (om.dice) dices.push_back(*om.dice);
    }
    double mean = 0;
    for (double d : dices) mean += d;
    mean /= static_cast<double>(dices.size());
    CHECK(ev.per_class[c - 1].dice.mean == doctest::Approx(mean).epsilon(1e-12));
  }

  // perfect predictions: overlap 1, distances 0, std 0
  auto ev2 = metrics::evaluate_dataset(truths, truths, 4);
  for (const auto& cs : ev2.per_class) {
    if (cs.dice.defined) {
      CHECK(cs.dice.mean == 1.0);
      CHECK(cs.dice.stddev == 0.0);
    }
    if (cs.hd95_mm.defined) {
      CHECK(cs.hd95_mm.mean == 0.0);
      CHECK(cs.hd95_mm.stddev == 0.0);
    }
  }

  // single frame: std 0
  auto ev3 = metrics::evaluate_dataset({preds[0]}, {truths[0]}, 4);
  for (const auto& cs : ev3.per_class)
    if (cs.dice.defined) CHECK(cs.dice.stddev == 0.0);

  // report emission sanity
  auto csv = metrics::per_frame_csv(ev);
  CHECK(csv.find("frame,class") == 0);
  auto md = metrics::summary_markdown(ev);
  CHECK(md.find("| Class |") == 0);
}

TEST_CASE("mask save/load round trip with sidecar") {
  rng::Stream st(7);
  auto m = random_mask(14, 11, 4, st, 2.4);
  const std::string path = "/tmp/vocseg_test_mask.vstn";
  metrics::save_mask(path, m, {"bg", "tongue", "velum", "lips"});
  std::vector<std::string> names;
  auto back = metrics::load_mask(path, &names);
  CHECK(back.width == m.width);
  CHECK(back.height == m.height);
  CHECK(back.values == m.values);
  CHECK(back.spacing_mm == doctest::Approx(2.4));
  CHECK(names.size() == 4);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST_CASE("dimension mismatch errors") {
  auto a = LabelMask::filled(4, 4, 0);
  auto b = LabelMask::filled(5, 4, 0);
  CHECK_THROWS_AS(metrics::overlap_metrics(a, b, 1), std::invalid_argument);
  CHECK_THROWS_AS(metrics::fp_fn_map(a, b, 1), std::invalid_argument);
  CHECK_THROWS_AS(metrics::evaluate_dataset({a}, {a, a}, 2), std::invalid_argument);
}
