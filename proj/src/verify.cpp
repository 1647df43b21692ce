#include "vocseg/verify/verify.hpp"

#include <cmath>
#include <cstdio>

#include "vocseg/common/rng.hpp"
#include "vocseg/metrics/evaluate.hpp"
#include "vocseg/numcore/gradcheck.hpp"
#include "vocseg/objectives/losses.hpp"

namespace vocseg::verify {

namespace {

using nc::TensorD;

TensorD randn(nc::Shape shape, rng::Stream& st, bool rg = true) {
  std::vector<double> v(nc::numel(shape));
  for (auto& x : v) x = st.normal();
  return TensorD::from(std::move(shape), std::move(v), rg);
}

TensorD randu(nc::Shape shape, rng::Stream& st, double lo, double hi, bool rg = true) {
  std::vector<double> v(nc::numel(shape));
  for (auto& x : v) x = st.uniform(lo, hi);
  return TensorD::from(std::move(shape), std::move(v), rg);
}

Check grad_check(const std::string& name, const std::function<TensorD()>& fwd,
                 const std::vector<TensorD>& leaves, double tol, double h = 1e-4) {
  const auto rep = nc::check_gradients(fwd, leaves, 8, h, 4242);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max rel err %.3g over %zu coords (tol %.0e)",
                rep.max_rel_err, rep.coords_checked, tol);
  return {name, rep.max_rel_err < tol, buf};
}

metrics::LabelMask random_mask(int w, int h, int n_classes, rng::Stream& st,
                               double spacing = 1.0) {
  metrics::LabelMask m = metrics::LabelMask::filled(w, h, 0, spacing);
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

}  // namespace

SuiteResult verify_gradients() {
  SuiteResult res;
  res.suite = "gradients";
  rng::Stream st(20250801);

  {
    auto a = randn({5, 7}, st);
    auto b = randn({7, 3}, st);
    res.checks.push_back(
        grad_check("matmul", [&] { return nc::mean(nc::matmul(a, b)); }, {a, b}, 1e-4));
  }
  {
    auto a = randn({4, 6}, st);
    auto b = randn({4, 6}, st);
    res.checks.push_back(grad_check(
        "add/sub/mul", [&] { return nc::mean(nc::mul(nc::add(a, b), nc::sub(a, b))); }, {a, b},
        1e-4));
  }
  {
    auto x = randu({3, 5}, st, 0.5, 2.5);
    res.checks.push_back(grad_check(
        "gelu/relu/sigmoid/exp/log",
        [&] {
          return nc::mean(nc::add(nc::add(nc::gelu(x), nc::relu(x)),
                                  nc::add(nc::sigmoid(x), nc::log_op(nc::exp_op(x)))));
        },
        {x}, 1e-4));
  }
  {
    auto x = randn({6, 9}, st);
    auto w = randn({6, 9}, st, false);
    res.checks.push_back(grad_check(
        "softmax", [&] { return nc::mean(nc::mul(nc::softmax(x, 1), w)); }, {x}, 1e-4));
  }
  {
    auto x = randn({4, 10}, st);
    auto g = randu({10}, st, 0.5, 1.5);
    auto b = randn({10}, st);
    auto w = randn({4, 10}, st, false);
    res.checks.push_back(grad_check(
        "layernorm", [&] { return nc::mean(nc::mul(nc::layernorm(x, g, b, 1e-5), w)); },
        {x, g, b}, 1e-4));
  }
  {
    auto x = randn({5, 7}, st);
    res.checks.push_back(grad_check(
        "reductions/layout",
        [&] {
          return nc::add(nc::mean(nc::sum_axis(x, 0)),
                         nc::add(nc::mean(nc::transpose(x)),
                                 nc::sum(nc::reshape(nc::scale(x, 0.5), {7, 5}))));
        },
        {x}, 1e-4));
  }
  {
    auto a = randn({3, 4}, st);
    auto b = randn({2, 4}, st);
    res.checks.push_back(grad_check(
        "concat/slice",
        [&] {
          auto cat = nc::concat<double>({a, b}, 0);
          auto sl = nc::slice(cat, 0, 1, 4);
          return nc::mean(nc::mul(sl, sl));
        },
        {a, b}, 1e-4));
  }
  {
    auto t = randn({6, 4}, st);
    res.checks.push_back(grad_check(
        "embedding_lookup",
        [&] {
          auto e = nc::embedding_lookup(t, {0, 3, 5});
          return nc::mean(nc::mul(e, e));
        },
        {t}, 1e-4));
  }
  {
    auto img = randn({1, 6, 6}, st);
    auto w = randn({1, 11, 9}, st, false);
    res.checks.push_back(grad_check(
        "bilinear_resize",
        [&] { return nc::mean(nc::mul(nc::bilinear_resize(img, 11, 9), w)); }, {img}, 1e-4));
  }
  {
    auto img = randn({2, 4, 4}, st);
    res.checks.push_back(grad_check(
        "nearest_resize",
        [&] {
          auto up = nc::nearest_resize(img, 7, 5);
          return nc::mean(nc::mul(up, up));
        },
        {img}, 1e-4));
  }
  {
    auto img = randn({1, 8, 8}, st);
    res.checks.push_back(grad_check(
        "patchify/unpatchify",
        [&] {
          auto tok = nc::patchify(img, 4);
          return nc::mean(nc::mul(tok, nc::patchify(nc::unpatchify(tok, 1, 8, 8, 4), 4)));
        },
        {img}, 1e-4));
  }
  {
    auto x = randn({5, 6}, st);
    auto w = randn({5, 6}, st, false);
    res.checks.push_back(grad_check(
        "l2_normalize_rows",
        [&] { return nc::mean(nc::mul(nc::l2_normalize_rows(x), w)); }, {x}, 1e-4));
  }
  {
    auto x = randn({4, 3, 3}, st);
    auto w = randn({4, 3, 3}, st, false);
    res.checks.push_back(grad_check(
        "softmax_channels",
        [&] { return nc::mean(nc::mul(nc::softmax_channels(x), w)); }, {x}, 1e-4));
  }
  {
    rng::Stream mst(7);
    metrics::LabelMask m = random_mask(4, 4, 5, mst);
    auto logits = randn({5, 4, 4}, st);
    res.checks.push_back(grad_check(
        "cross_entropy", [&] { return loss::cross_entropy(logits, m); }, {logits}, 1e-4));
    res.checks.push_back(grad_check(
        "soft_dice_loss",
        [&] { return loss::soft_dice_loss(nc::softmax_channels(logits), m); }, {logits}, 1e-4));
  }

  // full composite loss on a 2-sample toy batch; smaller step because the
  // low-temperature InfoNCE terms dominate the truncation error
  {
    model::ModelConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 4;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_encoder_layers = 1;
    cfg.n_decoder_layers = 1;
    cfg.n_audio_frames = 2;
    cfg.fusion_mode = model::FusionMode::CrossAttention;
    model::Network<double> net(cfg, 31);

    rng::Stream dst(17);
    std::vector<model::ModelInput<double>> batch;
    std::vector<metrics::LabelMask> masks;
    for (int i = 0; i < 2; ++i) {
      model::ModelInput<double> in;
      in.image = randu({1, 16, 16}, dst, 0, 1, false);
      in.audio = randu({cfg.n_audio_frames, cfg.n_audio_features}, dst, -1, 1, false);
      in.phono = randu({cfg.n_phono_classes}, dst, 0, 1, false);
      batch.push_back(std::move(in));
      masks.push_back(random_mask(16, 16, 5, dst));
    }
    std::vector<const metrics::LabelMask*> mask_ptrs = {&masks[0], &masks[1]};
    loss::LossWeights w{1.0, 1.0, 0.1};
    loss::ContrastiveConfig cc;
    auto fwd = [&] {
      return loss::total_loss(net, net.forward(batch), mask_ptrs, w, cc).total;
    };
    std::vector<TensorD> leaves;
    rng::Stream pick(23);
    for (const auto& e : net.params().entries())
      if (!e.frozen && pick.uniform() < 0.3) leaves.push_back(e.tensor);
    res.checks.push_back(grad_check("composite total_loss (25+ params)", fwd, leaves, 1e-3,
                                    3e-5));
  }
  return res;
}

SuiteResult verify_metrics(int instances) {
  SuiteResult res;
  res.suite = "metrics";
  rng::Stream st(20250802);

  int tested = 0;
  double worst = 0;
  bool overlap_ok = true, defined_ok = true;
  while (tested < instances) {
    const int w = static_cast<int>(st.integer(8, 32));
    const int h = static_cast<int>(st.integer(8, 32));
    const int ncls = static_cast<int>(st.integer(2, 5));
    const double spacing = st.uniform(0.5, 3.0);
    auto a = random_mask(w, h, ncls, st, spacing);
    auto b = random_mask(w, h, ncls, st, spacing);
    for (int c = 1; c < ncls && tested < instances; ++c) {
      const auto fast = metrics::surface_distances(a, b, static_cast<uint8_t>(c));
      const auto sa = metrics::extract_surface(a, static_cast<uint8_t>(c));
      const auto sb = metrics::extract_surface(b, static_cast<uint8_t>(c));
      if (sa.empty() || sb.empty()) {
        defined_ok = defined_ok && !fast.has_value();
        continue;
      }
      const auto slow = metrics::surface_distances_bruteforce(sa, sb);
      worst = std::max({worst, std::abs(fast->assd_mm - slow.assd_mm),
                        std::abs(fast->hd95_mm - slow.hd95_mm)});
      ++tested;

      // overlap metrics equal naive counting exactly
      size_t inter = 0, np = 0, nt = 0;
      for (size_t i = 0; i < a.pixels(); ++i) {
        const bool p = a.values[i] == c, t = b.values[i] == c;
        inter += p && t;
        np += p;
        nt += t;
      }
      const auto om = metrics::overlap_metrics(a, b, static_cast<uint8_t>(c));
      overlap_ok = overlap_ok && om.intersection == inter && om.predicted_pixels == np &&
                   om.support_pixels == nt;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d instances, worst |accel - brute| = %.3g mm (tol 1e-9)",
                tested, worst);
  res.checks.push_back({"assd/hd95 accelerated == brute force", worst < 1e-9, buf});
  res.checks.push_back({"overlap metrics == naive counting", overlap_ok, ""});
  res.checks.push_back({"empty surfaces flagged undefined", defined_ok, ""});
  return res;
}

SuiteResult verify_losses() {
  SuiteResult res;
  res.suite = "losses";
  rng::Stream st(20250803);

  {
    // dice == 2*iou/(1+iou) on random instances + the Table-consistency point
    bool ok = true;
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
      auto a = random_mask(16, 16, 4, st);
      auto b = random_mask(16, 16, 4, st);
      for (uint8_t c = 1; c < 4; ++c) {
        auto om = metrics::overlap_metrics(a, b, c);
        if (om.iou && om.dice) {
          const double want = 2.0 * *om.iou / (1.0 + *om.iou);
          worst = std::max(worst, std::abs(*om.dice - want));
          ok = ok && std::abs(*om.dice - want) < 1e-12;
        }
      }
    }
    const double table_dice = 2.0 * 0.91 / 1.91;
    ok = ok && std::abs(table_dice - 0.9529) < 1e-4 && std::abs(table_dice - 0.95) < 0.005;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst |dice - 2iou/(1+iou)| = %.3g; iou 0.91 -> dice %.5f",
                  worst, table_dice);
    res.checks.push_back({"dice identity + Table consistency", ok, buf});
  }
  {
    bool ok = true;
    for (int b : {2, 3, 8}) {
      std::vector<double> all;
      for (int i = 0; i < b; ++i) all.insert(all.end(), {0.4, -0.2, 0.8, 0.1});
      auto emb = nc::TensorD::from({b, 4}, all);
      auto g = loss::contrastive_global<double>(emb, emb, emb, 0.07);
      ok = ok && std::abs(g.image_audio - std::log(b)) < 1e-6 &&
           std::abs(g.phono_image - std::log(b)) < 1e-6;
    }
    res.checks.push_back({"contrastive ln(B) anchor (identical embeddings)", ok, ""});
  }
  {
    auto m = random_mask(6, 6, 3, st);
    std::vector<double> onehot(3 * 36, 0.0);
    for (int p = 0; p < 36; ++p) onehot[m.values[p] * 36 + p] = 1.0;
    const double perfect =
        loss::soft_dice_loss(nc::TensorD::from({3, 6, 6}, onehot), m).scalar();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "value %.3g (tol 1e-5)", perfect);
    res.checks.push_back({"soft dice of perfect prediction", perfect < 1e-5, buf});
  }
  {
    metrics::LabelMask m = random_mask(4, 4, 5, st);
    const double ce = loss::cross_entropy(nc::TensorD::zeros({5, 4, 4}), m).scalar();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "|ce - ln 5| = %.3g (tol 1e-6)",
                  std::abs(ce - std::log(5.0)));
    res.checks.push_back({"uniform-logit CE equals ln C", std::abs(ce - std::log(5.0)) < 1e-6,
                          buf});
  }
  return res;
}

std::string format(const SuiteResult& r) {
  std::string out = "suite: " + r.suite + "\n";
  for (const auto& c : r.checks) {
    out += std::string("  [") + (c.passed ? "PASS" : "FAIL") + "] " + c.name;
    if (!c.detail.empty()) out += ": " + c.detail;
    out += "\n";
  }
  return out;
}

}  // namespace vocseg::verify
