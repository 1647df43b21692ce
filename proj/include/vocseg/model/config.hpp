#pragma once

#include <stdexcept>
#include <string>

namespace vocseg::model {

// Table-1 style fusion variants; ImageOnly is the V row.
enum class FusionMode { ImageOnly, ConcatVA, ConcatVP, ConcatVAP, CrossAttention };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::ImageOnly: return "image_only";
    case FusionMode::ConcatVA: return "concat_va";
    case FusionMode::ConcatVP: return "concat_vp";
    case FusionMode::ConcatVAP: return "concat_vap";
    case FusionMode::CrossAttention: return "cross_attention";
  }
  throw std::logic_error("bad fusion mode");
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "image_only") return FusionMode::ImageOnly;
  if (s == "concat_va") return FusionMode::ConcatVA;
  if (s == "concat_vp") return FusionMode::ConcatVP;
  if (s == "concat_vap") return FusionMode::ConcatVAP;
  if (s == "cross_attention") return FusionMode::CrossAttention;
  throw std::invalid_argument("unknown fusion mode: " + s);
}

struct ModelConfig {
  int image_size = 64;  // 224 mirrors the source pipeline, 64 is desk scale
  int patch_size = 8;
  int d_model = 64;
  int n_heads = 4;
  int n_encoder_layers = 2;
  int n_decoder_layers = 2;
  int mlp_ratio = 2;  // hidden width of transformer MLPs = mlp_ratio * d_model
  int n_audio_features = 16;
  int n_audio_frames = 4;
  int n_phono_classes = 12;
  int n_seg_classes = 5;  // background, tongue, velum, upper lip, lower lip
  FusionMode fusion_mode = FusionMode::CrossAttention;
  double modality_dropout_p = 0.25;
  int projection_dim = 32;  // contrastive latent width

  int patches() const { return (image_size / patch_size) * (image_size / patch_size); }

  void validate() const {
    if (image_size % patch_size != 0)
      throw std::invalid_argument("image_size must be divisible by patch_size");
    if (d_model % n_heads != 0)
      throw std::invalid_argument("d_model must be divisible by n_heads");
    if (n_seg_classes < 2) throw std::invalid_argument("need at least 2 segmentation classes");
    if (n_encoder_layers < 1 || n_decoder_layers < 1)
      throw std::invalid_argument("encoder/decoder depth must be positive");
    if (modality_dropout_p < 0 || modality_dropout_p > 1)
      throw std::invalid_argument("modality_dropout_p must be in [0,1]");
    if (projection_dim < 2) throw std::invalid_argument("projection_dim must be >= 2");
  }
};

}  // namespace vocseg::model
