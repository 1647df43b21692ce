#pragma once

#include <cassert>
#include <optional>

#include "vocseg/common/rng.hpp"
#include "vocseg/model/config.hpp"
#include "vocseg/numcore/ops.hpp"

namespace vocseg::model {

template <class S>
struct ParamEntry {
  std::string name;
  nc::TensorT<S> tensor;
  bool frozen = false;  // permanently excluded from optimization (audio encoder)
};

// Named parameter registry. Every parameter is seeded from (seed, name) so
// initialization is independent of construction order.
template <class S>
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed) {}

  nc::TensorT<S> normal(const std::string& name, nc::Shape shape, double sd,
                        bool frozen = false) {
    rng::Stream st(seed_, name);
    std::vector<S> v(nc::numel(shape));
    for (auto& x : v) x = static_cast<S>(st.normal(0.0, sd));
    return add(name, nc::TensorT<S>::from(std::move(shape), std::move(v)), frozen);
  }
  nc::TensorT<S> constant(const std::string& name, nc::Shape shape, S value,
                          bool frozen = false) {
    return add(name, nc::TensorT<S>::filled(std::move(shape), value), frozen);
  }

  std::vector<ParamEntry<S>>& entries() { return entries_; }
  const std::vector<ParamEntry<S>>& entries() const { return entries_; }

  const ParamEntry<S>* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  uint64_t seed() const { return seed_; }

 private:
  nc::TensorT<S> add(const std::string& name, nc::TensorT<S> t, bool frozen) {
    if (find(name)) throw std::logic_error("duplicate parameter name: " + name);
    t.set_requires_grad(!frozen);
    entries_.push_back({name, t, frozen});
    return entries_.back().tensor;
  }

  uint64_t seed_;
  std::vector<ParamEntry<S>> entries_;
};

// ---- layers -----------------------------------------------------------------

template <class S>
struct Linear {
  nc::TensorT<S> w;  // [in, out]
  nc::TensorT<S> b;  // [out]

  static Linear create(ParamStore<S>& ps, const std::string& name, int in, int out,
                       bool frozen = false, double sd = 0.02) {
    return {ps.normal(name + ".w", {in, out}, sd, frozen),
            ps.constant(name + ".b", {out}, S(0), frozen)};
  }
  nc::TensorT<S> operator()(const nc::TensorT<S>& x) const {
    return nc::add_rowvec(nc::matmul(x, w), b);
  }
};

template <class S>
struct LayerNorm {
  nc::TensorT<S> gain, bias;
  S eps = S(1e-5);

  static LayerNorm create(ParamStore<S>& ps, const std::string& name, int width,
                          bool frozen = false) {
    return {ps.constant(name + ".gain", {width}, S(1), frozen),
            ps.constant(name + ".bias", {width}, S(0), frozen)};
  }
  nc::TensorT<S> operator()(const nc::TensorT<S>& x) const {
    return nc::layernorm(x, gain, bias, eps);
  }
};

// Rows of captured attention weights, one matrix per (layer, head) call.
using AttentionSink = std::vector<std::vector<double>>;

template <class S>
struct MultiHeadAttention {
  Linear<S> q, k, v, o;
  int heads = 1;

  static MultiHeadAttention create(ParamStore<S>& ps, const std::string& name, int d, int heads,
                                   bool frozen = false) {
    return {Linear<S>::create(ps, name + ".q", d, d, frozen),
            Linear<S>::create(ps, name + ".k", d, d, frozen),
            Linear<S>::create(ps, name + ".v", d, d, frozen),
            Linear<S>::create(ps, name + ".o", d, d, frozen), heads};
  }

  nc::TensorT<S> operator()(const nc::TensorT<S>& queries, const nc::TensorT<S>& keys_values,
                            AttentionSink* sink = nullptr) const {
    const int d = queries.dim(1);
    const int dh = d / heads;
    auto Q = q(queries);
    auto K = k(keys_values);
    auto V = v(keys_values);
    std::vector<nc::TensorT<S>> head_outs;
    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int h = 0; h < heads; ++h) {
      auto Qh = nc::slice(Q, 1, h * dh, (h + 1) * dh);
      auto Kh = nc::slice(K, 1, h * dh, (h + 1) * dh);
      auto Vh = nc::slice(V, 1, h * dh, (h + 1) * dh);
      auto scores = nc::scale(nc::matmul(Qh, nc::transpose(Kh)), inv_sqrt);
      auto attn = nc::softmax(scores, 1);
      if (sink) {
        std::vector<double> a(attn.values().begin(), attn.values().end());
        sink->push_back(std::move(a));
      }
      head_outs.push_back(nc::matmul(attn, Vh));
    }
    return o(nc::concat(head_outs, 1));
  }
};

// Pre-LN transformer block: x + MHA(LN(x)), then x + MLP(LN(x)).
template <class S>
struct EncoderBlock {
  LayerNorm<S> ln1, ln2;
  MultiHeadAttention<S> attn;
  Linear<S> fc1, fc2;

  static EncoderBlock create(ParamStore<S>& ps, const std::string& name, int d, int heads,
                             int mlp_hidden, bool frozen = false) {
    return {LayerNorm<S>::create(ps, name + ".ln1", d, frozen),
            LayerNorm<S>::create(ps, name + ".ln2", d, frozen),
            MultiHeadAttention<S>::create(ps, name + ".attn", d, heads, frozen),
            Linear<S>::create(ps, name + ".fc1", d, mlp_hidden, frozen),
            Linear<S>::create(ps, name + ".fc2", mlp_hidden, d, frozen)};
  }

  nc::TensorT<S> operator()(const nc::TensorT<S>& x, AttentionSink* sink = nullptr) const {
    auto n = ln1(x);
    auto h = nc::add(x, attn(n, n, sink));
    return nc::add(h, fc2(nc::gelu(fc1(ln2(h)))));
  }
};

// Decoder block: self-attention over image tokens, optional cross-attention
// with image tokens as queries and memory as keys/values, then MLP. Each
// sublayer is pre-LN with a residual.
template <class S>
struct DecoderBlock {
  LayerNorm<S> ln_self, ln_cross, ln_mlp;
  MultiHeadAttention<S> self_attn, cross_attn;
  Linear<S> fc1, fc2;
  bool use_cross = true;

  static DecoderBlock create(ParamStore<S>& ps, const std::string& name, int d, int heads,
                             int mlp_hidden, bool use_cross) {
    DecoderBlock b{LayerNorm<S>::create(ps, name + ".ln_self", d),
                   LayerNorm<S>::create(ps, name + ".ln_cross", d),
                   LayerNorm<S>::create(ps, name + ".ln_mlp", d),
                   MultiHeadAttention<S>::create(ps, name + ".self", d, heads),
                   MultiHeadAttention<S>::create(ps, name + ".cross", d, heads),
                   Linear<S>::create(ps, name + ".fc1", d, mlp_hidden),
                   Linear<S>::create(ps, name + ".fc2", mlp_hidden, d),
                   use_cross};
    return b;
  }

  nc::TensorT<S> operator()(const nc::TensorT<S>& x, const nc::TensorT<S>& memory,
                            AttentionSink* self_sink = nullptr,
                            AttentionSink* cross_sink = nullptr) const {
    auto n = ln_self(x);
    auto h = nc::add(x, self_attn(n, n, self_sink));
    if (use_cross && memory.defined())
      h = nc::add(h, cross_attn(ln_cross(h), memory, cross_sink));
    return nc::add(h, fc2(nc::gelu(fc1(ln_mlp(h)))));
  }
};

// ---- memory tokens -------------------------------------------------------------

enum class TokenSource : uint8_t { Audio, Phono, NullAudio, NullPhono };

template <class S>
struct MemoryTokens {
  nc::TensorT<S> tokens;  // [M, d_model], M >= 1
  std::vector<TokenSource> provenance;

  size_t real_count() const {
    size_t n = 0;
    for (auto p : provenance)
      n += (p == TokenSource::Audio || p == TokenSource::Phono) ? 1 : 0;
    return n;
  }
};

// ---- forward output -------------------------------------------------------------

template <class S>
struct ForwardOutput {
  nc::TensorT<S> logits;          // [C, H, W]
  nc::TensorT<S> image_tokens;    // [P, d]
  nc::TensorT<S> audio_tokens;    // [T, d], undefined when unused
  nc::TensorT<S> phono_token;     // [1, d], undefined when unused
  nc::TensorT<S> decoded_tokens;  // [P, d]
  std::optional<MemoryTokens<S>> memory;
  bool audio_used = false;
  bool phono_used = false;
};

template <class S>
struct ModelInput {
  nc::TensorT<S> image;  // [1, H, W], values in [0,1]
  nc::TensorT<S> audio;  // [T, n_audio_features]
  nc::TensorT<S> phono;  // [n_phono_classes]
};

struct ForwardOptions {
  bool train = false;        // enables modality dropout
  bool video_only = false;   // force placeholder memory (no audio/phono)
  rng::Stream* dropout_rng = nullptr;
  AttentionSink* cross_attention_sink = nullptr;
};

// ---- the network -----------------------------------------------------------------

template <class S>
class Network {
 public:
  Network(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg), params_(seed) {
    cfg_.validate();
    const int d = cfg.d_model;
    const int hidden = cfg.mlp_ratio * d;
    const int patch_feat = cfg.patch_size * cfg.patch_size;

    patch_embed_ = Linear<S>::create(params_, "img_enc.stem.embed", patch_feat, d);
    pos_emb_ = params_.normal("img_enc.stem.pos", {cfg.patches(), d}, 0.02);
    for (int i = 0; i < cfg.n_encoder_layers; ++i)
      enc_blocks_.push_back(EncoderBlock<S>::create(
          params_, "img_enc.block" + std::to_string(i), d, cfg.n_heads, hidden));
    enc_ln_ = LayerNorm<S>::create(params_, "img_enc.ln", d);

    // frozen randomly initialized stand-in for the pretrained audio encoder
    audio_proj_ = Linear<S>::create(params_, "audio_enc.proj", cfg.n_audio_features, d, true,
                                    0.3);
    audio_block_ = EncoderBlock<S>::create(params_, "audio_enc.block0", d, cfg.n_heads, hidden,
                                           true);
    audio_ln_ = LayerNorm<S>::create(params_, "audio_enc.ln", d, true);

    phono_fc1_ = Linear<S>::create(params_, "phono_enc.fc1", cfg.n_phono_classes, d, false, 0.3);
    phono_fc2_ = Linear<S>::create(params_, "phono_enc.fc2", d, d);

    null_audio_ = params_.normal("memory.null_audio", {1, d}, 0.02);
    null_phono_ = params_.normal("memory.null_phono", {1, d}, 0.02);
    memory_proj_ = Linear<S>::create(params_, "memory.proj", d, d);

    if (cfg.fusion_mode == FusionMode::ConcatVA || cfg.fusion_mode == FusionMode::ConcatVP ||
        cfg.fusion_mode == FusionMode::ConcatVAP) {
      const int k = cfg.fusion_mode == FusionMode::ConcatVAP ? 3 : 2;
      concat_proj_ = Linear<S>::create(params_, "fusion.concat", k * d, d);
      // identity block on the image rows: the image pathway passes through
      // unchanged at init and the pooled modality contributions start near 0
      for (int i = 0; i < d; ++i)
        concat_proj_.w.values()[static_cast<size_t>(i) * d + i] += S(1);
    }

    const bool cross = cfg.fusion_mode == FusionMode::CrossAttention;
    for (int i = 0; i < cfg.n_decoder_layers; ++i)
      dec_blocks_.push_back(DecoderBlock<S>::create(
          params_, "decoder.block" + std::to_string(i), d, cfg.n_heads, hidden, cross));
    dec_ln_ = LayerNorm<S>::create(params_, "decoder.ln", d);
    head_ = Linear<S>::create(params_, "head.out", d, patch_feat * cfg.n_seg_classes);

    // contrastive projection heads (global per modality + local token heads);
    // fan-in scaled init keeps embedding norms away from zero, where the
    // L2 normalization in the loss is ill-conditioned
    const double proj_sd = 1.0 / std::sqrt(static_cast<double>(d));
    img_g1_ = Linear<S>::create(params_, "contrastive.img.fc1", d, d, false, proj_sd);
    img_g2_ = Linear<S>::create(params_, "contrastive.img.fc2", d, cfg.projection_dim, false,
                                proj_sd);
    aud_g1_ = Linear<S>::create(params_, "contrastive.aud.fc1", d, d, false, proj_sd);
    aud_g2_ = Linear<S>::create(params_, "contrastive.aud.fc2", d, cfg.projection_dim, false,
                                proj_sd);
    pho_g1_ = Linear<S>::create(params_, "contrastive.pho.fc1", d, d, false, proj_sd);
    pho_g2_ = Linear<S>::create(params_, "contrastive.pho.fc2", d, cfg.projection_dim, false,
                                proj_sd);
    img_local_ = Linear<S>::create(params_, "contrastive.local.img", d, cfg.projection_dim,
                                   false, proj_sd);
    mem_local_ = Linear<S>::create(params_, "contrastive.local.mem", d, cfg.projection_dim,
                                   false, proj_sd);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  // [1,H,W] -> [P,d]: patchify, linear embed, learned positional embeddings,
  // encoder blocks, final layernorm.
  nc::TensorT<S> encode_image(const nc::TensorT<S>& frame,
                              bool ablate_positional = false) const {
    if (frame.rank() != 3 || frame.dim(1) != cfg_.image_size || frame.dim(2) != cfg_.image_size)
      throw std::invalid_argument("encode_image: expected [1," +
                                  std::to_string(cfg_.image_size) + "," +
                                  std::to_string(cfg_.image_size) + "]");
    auto tok = patch_embed_(nc::patchify(frame, cfg_.patch_size));
    if (!ablate_positional) tok = nc::add(tok, pos_emb_);
    for (const auto& blk : enc_blocks_) tok = blk(tok);
    return enc_ln_(tok);
  }

  // [T,F] -> [T,d]; parameters are frozen, excluded from the optimizer set.
  nc::TensorT<S> encode_audio(const nc::TensorT<S>& features) const {
    if (features.rank() != 2 || features.dim(0) < 1)
      throw std::invalid_argument("encode_audio: nonempty [T,F] sequence required");
    if (features.dim(1) != cfg_.n_audio_features)
      throw std::invalid_argument("encode_audio: feature width mismatch");
    return audio_ln_(audio_block_(audio_proj_(features)));
  }

  // [n_phono_classes] (multi-hot in [0,1]) -> [1,d], 2-layer MLP with GELU.
  nc::TensorT<S> encode_phono(const nc::TensorT<S>& phono) const {
    if (phono.size() != static_cast<size_t>(cfg_.n_phono_classes))
      throw std::invalid_argument("encode_phono: width mismatch");
    auto row = nc::reshape(phono, {1, cfg_.n_phono_classes});
    return phono_fc2_(nc::gelu(phono_fc1_(row)));
  }

  // Present modalities concatenated along the token axis, then linearly
  // projected; a dropped modality is replaced by one learned placeholder.
  MemoryTokens<S> build_memory(const nc::TensorT<S>& audio_tokens,
                               const nc::TensorT<S>& phono_token, bool use_audio,
                               bool use_phono) const {
    std::vector<nc::TensorT<S>> parts;
    MemoryTokens<S> mem;
    if (use_audio && audio_tokens.defined()) {
      parts.push_back(audio_tokens);
      for (int t = 0; t < audio_tokens.dim(0); ++t)
        mem.provenance.push_back(TokenSource::Audio);
    } else {
      parts.push_back(null_audio_);
      mem.provenance.push_back(TokenSource::NullAudio);
    }
    if (use_phono && phono_token.defined()) {
      parts.push_back(phono_token);
      mem.provenance.push_back(TokenSource::Phono);
    } else {
      parts.push_back(null_phono_);
      mem.provenance.push_back(TokenSource::NullPhono);
    }
    mem.tokens = memory_proj_(nc::concat(parts, 0));
    return mem;
  }

  // n_decoder_layers of self-attention / cross-attention / MLP.
  nc::TensorT<S> decode(const nc::TensorT<S>& image_tokens, const nc::TensorT<S>& memory,
                        AttentionSink* cross_sink = nullptr) const {
    auto x = image_tokens;
    for (const auto& blk : dec_blocks_) x = blk(x, memory, nullptr, cross_sink);
    return dec_ln_(x);
  }

  // [P,d] -> [C,H,W]: per-token linear patch logits, assembled to full
  // resolution (linear unpatchify head).
  nc::TensorT<S> segment(const nc::TensorT<S>& decoded_tokens) const {
    auto patch_logits = head_(decoded_tokens);  // [P, p*p*C]
    return nc::unpatchify(patch_logits, cfg_.n_seg_classes, cfg_.image_size, cfg_.image_size,
                          cfg_.patch_size);
  }

  ForwardOutput<S> forward_one(const ModelInput<S>& in, const ForwardOptions& opt) const {
    ForwardOutput<S> out;
    out.image_tokens = encode_image(in.image);

    const FusionMode mode = cfg_.fusion_mode;
    const bool wants_audio = mode == FusionMode::ConcatVA || mode == FusionMode::ConcatVAP ||
                             mode == FusionMode::CrossAttention;
    const bool wants_phono = mode == FusionMode::ConcatVP || mode == FusionMode::ConcatVAP ||
                             mode == FusionMode::CrossAttention;

    bool use_audio = wants_audio && !opt.video_only;
    bool use_phono = wants_phono && !opt.video_only;
    if (opt.train && opt.dropout_rng) {
      if (use_audio && opt.dropout_rng->uniform() < cfg_.modality_dropout_p) use_audio = false;
      if (use_phono && opt.dropout_rng->uniform() < cfg_.modality_dropout_p) use_phono = false;
    }
    out.audio_used = use_audio;
    out.phono_used = use_phono;

    if (use_audio) out.audio_tokens = encode_audio(in.audio);
    if (use_phono) out.phono_token = encode_phono(in.phono);

    switch (mode) {
      case FusionMode::ImageOnly:
        out.decoded_tokens = decode(out.image_tokens, nc::TensorT<S>());
        break;
      case FusionMode::ConcatVA:
      case FusionMode::ConcatVP:
      case FusionMode::ConcatVAP: {
        const int P = cfg_.patches();
        auto ones = nc::TensorT<S>::filled({P, 1}, S(1));
        std::vector<nc::TensorT<S>> cols = {out.image_tokens};
        if (mode == FusionMode::ConcatVA || mode == FusionMode::ConcatVAP) {
          // audio tokens pooled by mean before concatenation
          auto a = use_audio ? nc::mean_axis(out.audio_tokens, 0) : null_audio_;
          cols.push_back(nc::matmul(ones, a));
        }
        if (mode == FusionMode::ConcatVP || mode == FusionMode::ConcatVAP) {
          auto p = use_phono ? out.phono_token : null_phono_;
          cols.push_back(nc::matmul(ones, p));
        }
        auto fused = concat_proj_(nc::concat(cols, 1));
        out.decoded_tokens = decode(fused, nc::TensorT<S>());
        break;
      }
      case FusionMode::CrossAttention: {
        out.memory = build_memory(out.audio_tokens, out.phono_token, use_audio, use_phono);
        out.decoded_tokens =
            decode(out.image_tokens, out.memory->tokens, opt.cross_attention_sink);
        break;
      }
    }
    out.logits = segment(out.decoded_tokens);
    return out;
  }

  std::vector<ForwardOutput<S>> forward(const std::vector<ModelInput<S>>& batch,
                                        const ForwardOptions& opt = {}) const {
    if (batch.empty()) throw std::invalid_argument("forward: empty batch");
    for (const auto& in : batch)
      if (in.image.shape() != batch.front().image.shape())
        throw std::invalid_argument("forward: inconsistent sample shapes");
    std::vector<ForwardOutput<S>> outs;
    outs.reserve(batch.size());
    for (const auto& in : batch) outs.push_back(forward_one(in, opt));
    return outs;
  }

  // contrastive projections (the losses consume these)
  nc::TensorT<S> project_image_global(const nc::TensorT<S>& image_tokens) const {
    return img_g2_(nc::gelu(img_g1_(nc::mean_axis(image_tokens, 0))));
  }
  nc::TensorT<S> project_audio_global(const nc::TensorT<S>& audio_tokens) const {
    return aud_g2_(nc::gelu(aud_g1_(nc::mean_axis(audio_tokens, 0))));
  }
  nc::TensorT<S> project_phono_global(const nc::TensorT<S>& phono_token) const {
    return pho_g2_(nc::gelu(pho_g1_(phono_token)));
  }
  nc::TensorT<S> project_image_local(const nc::TensorT<S>& image_tokens) const {
    return img_local_(image_tokens);
  }
  nc::TensorT<S> project_memory_local(const nc::TensorT<S>& memory_tokens) const {
    return mem_local_(memory_tokens);
  }

 private:
  ModelConfig cfg_;
  ParamStore<S> params_;

  Linear<S> patch_embed_;
  nc::TensorT<S> pos_emb_;
  std::vector<EncoderBlock<S>> enc_blocks_;
  LayerNorm<S> enc_ln_;

  Linear<S> audio_proj_;
  EncoderBlock<S> audio_block_;
  LayerNorm<S> audio_ln_;

  Linear<S> phono_fc1_, phono_fc2_;

  nc::TensorT<S> null_audio_, null_phono_;
  Linear<S> memory_proj_;
  Linear<S> concat_proj_;

  std::vector<DecoderBlock<S>> dec_blocks_;
  LayerNorm<S> dec_ln_;
  Linear<S> head_;

  Linear<S> img_g1_, img_g2_, aud_g1_, aud_g2_, pho_g1_, pho_g2_;
  Linear<S> img_local_, mem_local_;
};

using NetworkF = Network<float>;
using NetworkD = Network<double>;

// Converts a float-tensor input (the dataset representation) to the
// network scalar type.
template <class S>
ModelInput<S> to_input(const nc::TensorT<float>& image, const nc::TensorT<float>& audio,
                       const nc::TensorT<float>& phono) {
  auto cast = [](const nc::TensorT<float>& t) {
    std::vector<S> v(t.values().begin(), t.values().end());
    return nc::TensorT<S>::from(t.shape(), std::move(v));
  };
  return {cast(image), cast(audio), cast(phono)};
}

}  // namespace vocseg::model
