#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vocseg/common/rng.hpp"
#include "vocseg/numcore/gradcheck.hpp"
#include "vocseg/objectives/losses.hpp"

using namespace vocseg;
using metrics::LabelMask;

namespace {

template <class S>
nc::TensorT<S> rand_tensor(nc::Shape shape, rng::Stream& st, double lo = -1, double hi = 1,
                           bool rg = false) {
  std::vector<S> v(nc::numel(shape));
  for (auto& x : v) x = static_cast<S>(st.uniform(lo, hi));
  return nc::TensorT<S>::from(std::move(shape), std::move(v), rg);
}

LabelMask rand_mask(int w, int h, int n_classes, rng::Stream& st) {
  LabelMask m = LabelMask::filled(w, h, 0);
  for (auto& v : m.values) v = static_cast<uint8_t>(st.integer(0, n_classes - 1));
  return m;
}

}  // namespace

TEST_CASE("cross entropy: uniform logits give ln C") {
  LabelMask m = rand_mask(4, 4, 5, *(new rng::Stream(1)));
  auto logits = nc::TensorD::zeros({5, 4, 4});
  auto ce = loss::cross_entropy(logits, m);
  CHECK(std::abs(ce.scalar() - std::log(5.0)) < 1e-6);
}

TEST_CASE("cross entropy: confident correct logits approach zero") {
  rng::Stream st(2);
  LabelMask m = rand_mask(4, 4, 5, st);
  auto at_margin = [&](double margin) {
    std::vector<double> lv(5 * 16, 0.0);
    for (int p = 0; p < 16; ++p) lv[m.values[p] * 16 + p] = margin;
    return loss::cross_entropy(nc::TensorD::from({5, 4, 4}, lv), m).scalar();
  };
  // closed form: ln(1 + (C-1) e^{-margin}); the infinite-margin limit is 0
  CHECK(at_margin(10) == doctest::Approx(std::log1p(4 * std::exp(-10.0))).epsilon(1e-9));
  CHECK(at_margin(10) < 2e-4);
  CHECK(at_margin(20) < 1e-8);
  CHECK(at_margin(10) > at_margin(20));
  CHECK(at_margin(20) >= 0.0);
}

TEST_CASE("cross entropy matches a naive per-pixel oracle") {
  rng::Stream st(3);
  LabelMask m = rand_mask(4, 4, 5, st);
  auto logits = rand_tensor<double>({5, 4, 4}, st, -2, 2);
  auto ce = loss::cross_entropy(logits, m);

  double want = 0;
  for (int p = 0; p < 16; ++p) {
    double denom = 0;
    for (int k = 0; k < 5; ++k) denom += std::exp(logits.values()[k * 16 + p]);
    want += -std::log(std::exp(logits.values()[m.values[p] * 16 + p]) / denom);
  }
  want /= 16.0;
  CHECK(std::abs(ce.scalar() - want) < 1e-6);
}

TEST_CASE("cross entropy rejects out-of-range classes") {
  LabelMask m = LabelMask::filled(2, 2, 7);
  CHECK_THROWS_AS(loss::cross_entropy(nc::TensorD::zeros({5, 2, 2}), m), std::out_of_range);
}

TEST_CASE("soft dice: perfect prediction scores ~0, disjoint scores ~1") {
  rng::Stream st(4);
  LabelMask m = rand_mask(6, 6, 3, st);
  // one-hot probabilities equal to the truth
  std::vector<double> onehot(3 * 36, 0.0);
  for (int p = 0; p < 36; ++p) onehot[m.values[p] * 36 + p] = 1.0;
  auto perfect = loss::soft_dice_loss(nc::TensorD::from({3, 6, 6}, onehot), m);
  CHECK(perfect.scalar() < 1e-5);
  CHECK(perfect.scalar() >= 0.0);

  // probabilities one-hot on a class disjoint from truth
  LabelMask all1 = LabelMask::filled(6, 6, 1);
  std::vector<double> wrong(3 * 36, 0.0);
  for (int p = 0; p < 36; ++p) wrong[2 * 36 + p] = 1.0;
  auto disjoint = loss::soft_dice_loss(nc::TensorD::from({3, 6, 6}, wrong), all1);
  CHECK(disjoint.scalar() > 0.999);
  CHECK(disjoint.scalar() <= 1.0);
}

TEST_CASE("soft dice matches direct formula recomputation") {
  rng::Stream st(5);
  LabelMask m = rand_mask(4, 4, 3, st);
  auto logits = rand_tensor<double>({3, 4, 4}, st, -2, 2);
  auto probs = nc::softmax_channels(logits);
  auto dice = loss::soft_dice_loss(probs, m);

  const double eps = 1e-6;
  double mean_term = 0;
  for (int k = 1; k < 3; ++k) {
    double inter = 0, ps = 0, ys = 0;
    for (int p = 0; p < 16; ++p) {
      const double prob = probs.values()[k * 16 + p];
      ps += prob;
      if (m.values[p] == k) {
        inter += prob;
        ys += 1;
      }
    }
    mean_term += (2 * inter + eps) / (ps + ys + eps);
  }
  const double want = 1.0 - mean_term / 2.0;
  CHECK(std::abs(dice.scalar() - want) < 1e-9);
}

TEST_CASE("contrastive global: identical embeddings give ln B per direction") {
  for (int b : {2, 3, 8}) {
    std::vector<double> row = {0.3, -0.7, 0.2, 0.9};
    std::vector<double> all;
    for (int i = 0; i < b; ++i) all.insert(all.end(), row.begin(), row.end());
    auto emb = nc::TensorD::from({b, 4}, all);
    auto g = loss::contrastive_global<double>(emb, emb, emb, 0.07);
    CHECK(std::abs(g.image_audio - std::log(b)) < 1e-6);
    CHECK(std::abs(g.audio_image - std::log(b)) < 1e-6);
    CHECK(std::abs(g.image_phono - std::log(b)) < 1e-6);
    CHECK(std::abs(g.phono_image - std::log(b)) < 1e-6);
    CHECK(g.total.scalar() == doctest::Approx(4 * std::log(b)).epsilon(1e-6));
  }
}

TEST_CASE("contrastive global: aligned pairs with orthogonal cross terms, closed form") {
  // B=2: item embeddings aligned across modalities, orthogonal across items
  auto img = nc::TensorD::from({2, 2}, {1, 0, 0, 1});
  auto aud = nc::TensorD::from({2, 2}, {1, 0, 0, 1});
  const double tau = 0.07;
  auto g = loss::contrastive_global<double>(img, aud, nc::TensorD(), tau);
  const double want = std::log(1.0 + std::exp(-1.0 / tau));  // ~6.2e-7
  CHECK(std::abs(g.image_audio - want) < 1e-9);
  CHECK(std::abs(g.audio_image - want) < 1e-9);
  CHECK(g.image_audio < 1e-6);
  CHECK(g.pairs_used == 1);
}

TEST_CASE("contrastive global: invariant to a common permutation of the batch") {
  rng::Stream st(6);
  auto img = rand_tensor<double>({5, 8}, st);
  auto aud = rand_tensor<double>({5, 8}, st);
  auto pho = rand_tensor<double>({5, 8}, st);
  auto base = loss::contrastive_global<double>(img, aud, pho, 0.07);

  std::vector<int> perm = {3, 0, 4, 1, 2};
  auto permute = [&](const nc::TensorD& t) {
    std::vector<double> v(t.size());
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 8; ++j) v[i * 8 + j] = t.values()[perm[i] * 8 + j];
    return nc::TensorD::from({5, 8}, v);
  };
  auto permuted = loss::contrastive_global<double>(permute(img), permute(aud), permute(pho), 0.07);
  CHECK(base.total.scalar() == doctest::Approx(permuted.total.scalar()).epsilon(1e-9));
}

TEST_CASE("contrastive global rejects batches without negatives") {
  auto one = nc::TensorD::from({1, 4}, {1, 2, 3, 4});
  CHECK_THROWS_AS(loss::contrastive_global<double>(one, one, one, 0.07),
                  std::invalid_argument);
}

TEST_CASE("contrastive local: placeholder-only and single-candidate cases are zero") {
  // all placeholders: undefined memory projections everywhere
  std::vector<nc::TensorD> imgs(3), mems(3);
  rng::Stream st(7);
  imgs[0] = rand_tensor<double>({4, 8}, st);
  auto zero = loss::contrastive_local<double>(imgs, mems, 0.07);
  CHECK(zero.scalar() == 0.0);

  // single batch item with a single memory token: softmax over one candidate
  std::vector<nc::TensorD> img1 = {rand_tensor<double>({4, 8}, st)};
  std::vector<nc::TensorD> mem1 = {rand_tensor<double>({1, 8}, st)};
  auto single = loss::contrastive_local<double>(img1, mem1, 0.07);
  CHECK(single.scalar() == 0.0);
}

TEST_CASE("contrastive local decreases when projection parameters train") {
  rng::Stream st(8);
  // fixed random batch: 4 items, image tokens [6,16], memory tokens [3,16]
  std::vector<nc::TensorD> img_raw, mem_raw;
  for (int i = 0; i < 4; ++i) {
    img_raw.push_back(rand_tensor<double>({6, 16}, st));
    mem_raw.push_back(rand_tensor<double>({3, 16}, st));
  }
  auto wi = rand_tensor<double>({16, 8}, st, -0.3, 0.3, true);
  auto wm = rand_tensor<double>({16, 8}, st, -0.3, 0.3, true);

  auto eval = [&] {
    std::vector<nc::TensorD> ip, mp;
    for (int i = 0; i < 4; ++i) {
      ip.push_back(nc::matmul(img_raw[i], wi));
      mp.push_back(nc::matmul(mem_raw[i], wm));
    }
    return loss::contrastive_local<double>(ip, mp, 0.07);
  };

  const double initial = eval().scalar();
  double best = initial;
  const double lr = 0.05;
  for (int step = 0; step < 200; ++step) {
    wi.zero_grad();
    wm.zero_grad();
    auto l = eval();
    nc::backward(l);
    auto gi = wi.grad();
    auto gm = wm.grad();
    for (size_t k = 0; k < wi.size(); ++k) wi.values()[k] -= lr * gi[k];
    for (size_t k = 0; k < wm.size(); ++k) wm.values()[k] -= lr * gm[k];
    best = std::min(best, l.scalar());
  }
  const double final_loss = eval().scalar();
  CHECK(final_loss < initial);
  CHECK(best < initial);
}

TEST_CASE("total loss: weight projection and rejection of all-zero weights") {
  model::ModelConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 4;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_encoder_layers = 1;
  cfg.n_decoder_layers = 1;
  cfg.fusion_mode = model::FusionMode::CrossAttention;
  model::Network<double> net(cfg, 21);

  rng::Stream st(9);
  model::ModelInput<double> in;
  in.image = rand_tensor<double>({1, 16, 16}, st, 0, 1);
  in.audio = rand_tensor<double>({cfg.n_audio_frames, cfg.n_audio_features}, st);
  in.phono = rand_tensor<double>({cfg.n_phono_classes}, st, 0, 1);
  auto outs = net.forward({in, in});
  LabelMask m1 = rand_mask(16, 16, 5, st);
  LabelMask m2 = rand_mask(16, 16, 5, st);

  loss::LossWeights only_ce{1.0, 0.0, 0.0};
  auto lb = loss::total_loss(net, outs, {&m1, &m2}, only_ce, {});
  auto ce1 = loss::cross_entropy(outs[0].logits, m1);
  auto ce2 = loss::cross_entropy(outs[1].logits, m2);
  CHECK(lb.total_value == doctest::Approx((ce1.scalar() + ce2.scalar()) / 2).epsilon(1e-12));

  loss::LossWeights zero{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(loss::total_loss(net, outs, {&m1, &m2}, zero, {}), std::invalid_argument);

  // permutation equivariance over the batch
  loss::LossWeights full{1.0, 1.0, 0.1};
  auto a = loss::total_loss(net, {outs[0], outs[1]}, {&m1, &m2}, full, {});
  auto b = loss::total_loss(net, {outs[1], outs[0]}, {&m2, &m1}, full, {});
  CHECK(a.total_value == doctest::Approx(b.total_value).epsilon(1e-9));
}

TEST_CASE("composite loss gradient matches finite differences (toy batch)") {
  model::ModelConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 4;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_encoder_layers = 1;
  cfg.n_decoder_layers = 1;
  cfg.n_audio_frames = 2;
  cfg.fusion_mode = model::FusionMode::CrossAttention;
  model::Network<double> net(cfg, 22);

  rng::Stream st(10);
  std::vector<model::ModelInput<double>> batch;
  std::vector<LabelMask> masks;
  for (int i = 0; i < 2; ++i) {
    model::ModelInput<double> in;
    in.image = rand_tensor<double>({1, 16, 16}, st, 0, 1);
    in.audio = rand_tensor<double>({cfg.n_audio_frames, cfg.n_audio_features}, st);
    in.phono = rand_tensor<double>({cfg.n_phono_classes}, st, 0, 1);
    batch.push_back(std::move(in));
    masks.push_back(rand_mask(16, 16, 5, st));
  }
  std::vector<const LabelMask*> mask_ptrs = {&masks[0], &masks[1]};

  loss::LossWeights w{1.0, 1.0, 0.1};
  loss::ContrastiveConfig cc;
  auto forward = [&] {
    auto outs = net.forward(batch);
    return loss::total_loss(net, outs, mask_ptrs, w, cc).total;
  };

  // 25+ random coordinates across trainable (non-frozen) parameters
  std::vector<nc::TensorD> leaves;
  rng::Stream pick(11);
  for (const auto& e : net.params().entries())
    if (!e.frozen && pick.uniform() < 0.35) leaves.push_back(e.tensor);
  REQUIRE(leaves.size() >= 9);

  // smaller step than the per-primitive checks: the tau=0.07 InfoNCE terms
  // have large third derivatives, so h=1e-4 truncation noise dominates
  auto rep = nc::check_gradients(forward, leaves, 3, 3e-5, 12);
  INFO("worst ", rep.worst, " rel ", rep.max_rel_err, " coords ", rep.coords_checked);
  CHECK(rep.coords_checked >= 25);
  CHECK(rep.max_rel_err < 1e-3);
}
