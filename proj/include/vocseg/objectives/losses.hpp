#pragma once

#include "vocseg/metrics/labelmask.hpp"
#include "vocseg/model/network.hpp"
#include "vocseg/numcore/ops.hpp"

namespace vocseg::loss {

struct LossWeights {
  double ce = 1.0;
  double dice = 1.0;
  double contrastive = 0.1;

  void validate() const {
    const bool finite = std::isfinite(ce) && std::isfinite(dice) && std::isfinite(contrastive);
    if (!finite || ce < 0 || dice < 0 || contrastive < 0)
      throw std::invalid_argument("loss weights must be finite and >= 0");
    if (ce == 0 && dice == 0 && contrastive == 0)
      throw std::invalid_argument("at least one loss weight must be positive");
  }
};

struct ContrastiveConfig {
  double temperature = 0.07;
  bool global_level = true;
  bool local_level = true;

  void validate() const {
    if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
  }
};

// Mean over pixels of -log softmax(logits)[true class]. Fused primitive
// with the analytic (softmax - onehot)/N backward.
template <class S>
nc::TensorT<S> cross_entropy(const nc::TensorT<S>& logits, const metrics::LabelMask& mask) {
  if (logits.rank() != 3) throw std::invalid_argument("cross_entropy: [C,H,W] logits required");
  const size_t c = logits.dim(0);
  const size_t hw = static_cast<size_t>(logits.dim(1)) * logits.dim(2);
  if (mask.pixels() != hw || mask.height != logits.dim(1) || mask.width != logits.dim(2))
    throw std::invalid_argument("cross_entropy: mask extent mismatch");
  for (uint8_t v : mask.values)
    if (v >= c) throw std::out_of_range("cross_entropy: class index out of range");

  const S* lv = logits.values().data();
  double total = 0;
  for (size_t p = 0; p < hw; ++p) {
    double mx = lv[p];
    for (size_t k = 1; k < c; ++k) mx = std::max<double>(mx, lv[k * hw + p]);
    double sum = 0;
    for (size_t k = 0; k < c; ++k) sum += std::exp(static_cast<double>(lv[k * hw + p]) - mx);
    total += std::log(sum) + mx - static_cast<double>(lv[mask.values[p] * hw + p]);
  }
  const S value = static_cast<S>(total / static_cast<double>(hw));

  nc::Node<S>* pl = logits.node();
  const std::vector<uint8_t> labels = mask.values;
  return nc::make_op<S>(
      "cross_entropy", {1}, {value}, {logits}, [pl, labels, c, hw](nc::Node<S>& o) {
        if (!pl->requires_grad) return;
        pl->ensure_grad();
        const S g = o.grad[0] / static_cast<S>(hw);
        const S* lv = pl->value.data();
        for (size_t p = 0; p < hw; ++p) {
          S mx = lv[p];
          for (size_t k = 1; k < c; ++k) mx = std::max(mx, lv[k * hw + p]);
          S sum = S(0);
          for (size_t k = 0; k < c; ++k) sum += std::exp(lv[k * hw + p] - mx);
          for (size_t k = 0; k < c; ++k) {
            const S soft = std::exp(lv[k * hw + p] - mx) / sum;
            pl->grad[k * hw + p] += g * (soft - (labels[p] == k ? S(1) : S(0)));
          }
        }
      });
}

// 1 - mean over foreground classes of (2*sum(p*y)+eps)/(sum(p)+sum(y)+eps).
// Takes class probabilities (softmax of logits), not logits.
template <class S>
nc::TensorT<S> soft_dice_loss(const nc::TensorT<S>& probs, const metrics::LabelMask& mask,
                              S eps = S(1e-6)) {
  if (probs.rank() != 3) throw std::invalid_argument("soft_dice_loss: [C,H,W] probs required");
  const size_t c = probs.dim(0);
  const size_t hw = static_cast<size_t>(probs.dim(1)) * probs.dim(2);
  if (mask.pixels() != hw) throw std::invalid_argument("soft_dice_loss: mask extent mismatch");
  if (c < 2) throw std::invalid_argument("soft_dice_loss: need foreground classes");

  const S* pv = probs.values().data();
  const size_t fg = c - 1;
  std::vector<double> inter(c, 0), psum(c, 0), ysum(c, 0);
  for (size_t k = 1; k < c; ++k)
    for (size_t p = 0; p < hw; ++p) {
      const double prob = pv[k * hw + p];
      const bool y = mask.values[p] == k;
      inter[k] += y ? prob : 0.0;
      psum[k] += prob;
      ysum[k] += y ? 1.0 : 0.0;
    }
  double mean_term = 0;
  for (size_t k = 1; k < c; ++k)
    mean_term += (2.0 * inter[k] + eps) / (psum[k] + ysum[k] + eps);
  mean_term /= static_cast<double>(fg);
  const S value = static_cast<S>(1.0 - mean_term);

  nc::Node<S>* pp = probs.node();
  const std::vector<uint8_t> labels = mask.values;
  return nc::make_op<S>(
      "soft_dice_loss", {1}, {value}, {probs},
      [pp, labels, c, hw, fg, eps, inter, psum, ysum](nc::Node<S>& o) {
        if (!pp->requires_grad) return;
        pp->ensure_grad();
        const S g = o.grad[0];
        for (size_t k = 1; k < c; ++k) {
          const double denom = psum[k] + ysum[k] + static_cast<double>(eps);
          const double numer = 2.0 * inter[k] + static_cast<double>(eps);
          for (size_t p = 0; p < hw; ++p) {
            const double y = labels[p] == k ? 1.0 : 0.0;
            const double dterm = (2.0 * y * denom - numer) / (denom * denom);
            pp->grad[k * hw + p] -= g * static_cast<S>(dterm / static_cast<double>(fg));
          }
        }
      });
}

// -(1/B) sum_i log softmax(row_i of S/tau)[i]: one InfoNCE direction over a
// square similarity matrix, diagonal entries are the positives.
template <class S>
nc::TensorT<S> info_nce_direction(const nc::TensorT<S>& sim, S tau) {
  if (sim.rank() != 2 || sim.dim(0) != sim.dim(1))
    throw std::invalid_argument("info_nce_direction: square similarity matrix required");
  const int b = sim.dim(0);
  std::vector<S> eye(static_cast<size_t>(b) * b, S(0));
  for (int i = 0; i < b; ++i) eye[static_cast<size_t>(i) * b + i] = S(1);
  auto probs = nc::softmax(nc::scale(sim, S(1) / tau), 1);
  auto diag = nc::sum_axis(nc::mul(probs, nc::TensorT<S>::from({b, b}, eye)), 1);
  return nc::scale(nc::mean(nc::log_op(diag)), S(-1));
}

template <class S>
struct GlobalContrastive {
  nc::TensorT<S> total;  // sum over pairs and directions
  double image_audio = 0, audio_image = 0, image_phono = 0, phono_image = 0;
  int pairs_used = 0;
};

// Symmetric InfoNCE over the pairs (image,audio) and (image,phono);
// within-batch items are the negatives. Inputs are per-item projection
// rows [B, projection_dim]; rows are L2-normalized here so similarities
// are cosines. Undefined (skipped) pair inputs may be passed undefined.
template <class S>
GlobalContrastive<S> contrastive_global(const nc::TensorT<S>& img, const nc::TensorT<S>& aud,
                                        const nc::TensorT<S>& pho, S tau) {
  if (!img.defined() || img.dim(0) < 2)
    throw std::invalid_argument("contrastive_global: need batch of >= 2 (no negatives)");
  GlobalContrastive<S> out;
  auto ni = nc::l2_normalize_rows(img);
  nc::TensorT<S> total;
  auto add_pair = [&](const nc::TensorT<S>& other, double& fwd, double& bwd) {
    if (!other.defined() || other.dim(0) != img.dim(0)) return;
    auto no = nc::l2_normalize_rows(other);
    auto sim = nc::matmul(ni, nc::transpose(no));
    auto a = info_nce_direction(sim, tau);
    auto b = info_nce_direction(nc::transpose(sim), tau);
    fwd = a.scalar();
    bwd = b.scalar();
    auto pair_loss = nc::add(a, b);
    total = total.defined() ? nc::add(total, pair_loss) : pair_loss;
    out.pairs_used++;
  };
  add_pair(aud, out.image_audio, out.audio_image);
  add_pair(pho, out.image_phono, out.phono_image);
  out.total = total.defined() ? total : nc::TensorT<S>::zeros({1});
  return out;
}

// Local level: each image token's positive is the similarity-weighted
// aggregate of its own frame's real memory tokens (soft alignment);
// negatives are real memory tokens of other batch items. Items whose
// memory is all placeholders contribute nothing.
template <class S>
nc::TensorT<S> contrastive_local(const std::vector<nc::TensorT<S>>& img_tokens_proj,
                                 const std::vector<nc::TensorT<S>>& real_memory_proj, S tau) {
  if (img_tokens_proj.size() != real_memory_proj.size())
    throw std::invalid_argument("contrastive_local: batch size mismatch");
  const size_t b = img_tokens_proj.size();
  std::vector<nc::TensorT<S>> q_norm(b), k_norm(b);
  for (size_t i = 0; i < b; ++i) {
    if (!real_memory_proj[i].defined()) continue;
    q_norm[i] = nc::l2_normalize_rows(img_tokens_proj[i]);
    k_norm[i] = nc::l2_normalize_rows(real_memory_proj[i]);
  }

  nc::TensorT<S> total;
  int contributing = 0;
  for (size_t i = 0; i < b; ++i) {
    if (!k_norm[i].defined()) continue;
    ++contributing;

    auto align = nc::softmax(nc::scale(nc::matmul(q_norm[i], nc::transpose(k_norm[i])),
                                       S(1) / tau),
                             1);
    auto positive = nc::l2_normalize_rows(nc::matmul(align, k_norm[i]));
    auto s_pos = nc::sum_axis(nc::mul(q_norm[i], positive), 1);  // [P,1]

    std::vector<nc::TensorT<S>> negs;
    for (size_t j = 0; j < b; ++j)
      if (j != i && k_norm[j].defined()) negs.push_back(k_norm[j]);
    if (negs.empty()) continue;  // softmax over one candidate: exact zero loss

    auto s_neg = nc::matmul(q_norm[i], nc::transpose(nc::concat(negs, 0)));
    auto logits = nc::scale(nc::concat<S>({s_pos, s_neg}, 1), S(1) / tau);
    auto probs = nc::softmax(logits, 1);
    auto p0 = nc::slice(probs, 1, 0, 1);
    auto item = nc::scale(nc::mean(nc::log_op(p0)), S(-1));
    total = total.defined() ? nc::add(total, item) : item;
  }
  if (!total.defined()) return nc::TensorT<S>::zeros({1});
  return nc::scale(total, S(1) / static_cast<S>(contributing));
}

template <class S>
struct LossBreakdown {
  nc::TensorT<S> total;
  double ce = 0, dice = 0, con_global = 0, con_local = 0;
  double total_value = 0;
};

// w_ce*CE + w_dice*Dice + w_contrastive*(global + local). With a zero
// contrastive weight the contrastive module is never evaluated, so such a
// run is bit-identical to one without the module.
template <class S>
LossBreakdown<S> total_loss(const model::Network<S>& net,
                            const std::vector<model::ForwardOutput<S>>& outs,
                            const std::vector<const metrics::LabelMask*>& masks,
                            const LossWeights& w, const ContrastiveConfig& cc) {
  w.validate();
  cc.validate();
  if (outs.empty() || outs.size() != masks.size())
    throw std::invalid_argument("total_loss: inconsistent batch");
  const size_t b = outs.size();
  const S tau = static_cast<S>(cc.temperature);

  LossBreakdown<S> out;
  nc::TensorT<S> ce_sum, dice_sum;
  for (size_t i = 0; i < b; ++i) {
    auto ce = cross_entropy(outs[i].logits, *masks[i]);
    auto dice = soft_dice_loss(nc::softmax_channels(outs[i].logits), *masks[i]);
    ce_sum = ce_sum.defined() ? nc::add(ce_sum, ce) : ce;
    dice_sum = dice_sum.defined() ? nc::add(dice_sum, dice) : dice;
  }
  auto ce_mean = nc::scale(ce_sum, S(1) / static_cast<S>(b));
  auto dice_mean = nc::scale(dice_sum, S(1) / static_cast<S>(b));
  out.ce = ce_mean.scalar();
  out.dice = dice_mean.scalar();

  nc::TensorT<S> total = nc::add(nc::scale(ce_mean, static_cast<S>(w.ce)),
                                 nc::scale(dice_mean, static_cast<S>(w.dice)));

  if (w.contrastive > 0 && (cc.global_level || cc.local_level)) {
    nc::TensorT<S> con;
    if (cc.global_level && b >= 2) {
      // restrict each pair to the items whose modality is present
      auto gather = [&](bool model::ForwardOutput<S>::*flag, auto project_tokens) {
        std::vector<nc::TensorT<S>> img_rows, other_rows;
        for (size_t i = 0; i < b; ++i) {
          if (!(outs[i].*flag)) continue;
          img_rows.push_back(net.project_image_global(outs[i].image_tokens));
          other_rows.push_back(project_tokens(outs[i]));
        }
        std::pair<nc::TensorT<S>, nc::TensorT<S>> r;
        if (img_rows.size() >= 2) {
          r.first = nc::concat(img_rows, 0);
          r.second = nc::concat(other_rows, 0);
        }
        return r;
      };
      auto [ia, aa] = gather(&model::ForwardOutput<S>::audio_used,
                             [&](const model::ForwardOutput<S>& o) {
                               return net.project_audio_global(o.audio_tokens);
                             });
      auto [ip, pp] = gather(&model::ForwardOutput<S>::phono_used,
                             [&](const model::ForwardOutput<S>& o) {
                               return net.project_phono_global(o.phono_token);
                             });
      // each pair is evaluated on its own present subset
      if (ia.defined()) {
        auto g = contrastive_global(ia, aa, nc::TensorT<S>(), tau);
        out.con_global += g.total.scalar();
        con = con.defined() ? nc::add(con, g.total) : g.total;
      }
      if (ip.defined()) {
        auto g = contrastive_global(ip, nc::TensorT<S>(), pp, tau);
        out.con_global += g.total.scalar();
        con = con.defined() ? nc::add(con, g.total) : g.total;
      }
    }
    if (cc.local_level) {
      std::vector<nc::TensorT<S>> img_proj(b), mem_proj(b);
      for (size_t i = 0; i < b; ++i) {
        if (!outs[i].memory) continue;
        const auto& mem = *outs[i].memory;
        std::vector<int> real_rows;
        for (size_t t = 0; t < mem.provenance.size(); ++t)
          if (mem.provenance[t] == model::TokenSource::Audio ||
              mem.provenance[t] == model::TokenSource::Phono)
            real_rows.push_back(static_cast<int>(t));
        if (real_rows.empty()) continue;
        img_proj[i] = net.project_image_local(outs[i].image_tokens);
        mem_proj[i] =
            net.project_memory_local(nc::embedding_lookup(mem.tokens, real_rows));
      }
      auto local = contrastive_local(img_proj, mem_proj, tau);
      out.con_local = local.scalar();
      con = con.defined() ? nc::add(con, local) : local;
    }
    if (con.defined()) total = nc::add(total, nc::scale(con, static_cast<S>(w.contrastive)));
  }

  out.total = total;
  out.total_value = total.scalar();
  return out;
}

}  // namespace vocseg::loss
