#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vocseg/metrics/labelmask.hpp"
#include "vocseg/numcore/tensor.hpp"

namespace vocseg::synth {

inline constexpr int kNativePx = 84;
inline constexpr double kNativeSpacingMm = 2.4;
inline const std::vector<std::string> kClassNames = {"background", "tongue", "velum",
                                                     "upper_lip", "lower_lip"};

struct GeneratorConfig {
  int speakers = 5;
  int frames_per_speaker = 300;
  int augment = 0;  // extra augmented copies per original frame
  uint64_t seed = 17;
  int audio_frames = 4;
  int n_audio_features = 16;
  int n_phono_classes = 12;
  double audio_noise = 0.05;
};

// Anatomy and motion seeds; generation is a pure function of
// (SpeakerParams, frame index, global seed).
struct SpeakerParams {
  int id = 0;
  uint64_t anatomy_seed = 0;
  // articulator base positions / sizes (pixels at native 84x84)
  double tongue_cx, tongue_cy, tongue_rx, tongue_ry, tongue_wobble_phase;
  double velum_cx, velum_cy, velum_rx, velum_ry;
  double lip_x, lip_y, lip_len, lip_half_thickness, lip_angle;
  double tissue_base, tissue_gradient;
  // trajectory frequencies / phases
  double fx1, fx2, px1, px2;
  double fy1, fy2, py1, py2;
  double fv, pv, fg, pg, fvis, pvis;
};

SpeakerParams speaker_params(uint64_t seed, int speaker_id);

// Smooth periodic latent articulator state.
struct LatentState {
  double tongue_x = 0;   // [-1,1]
  double tongue_y = 0;   // [-1,1]
  double velum_open = 0; // [0,1]
  double lip_gap = 0;    // [0,1]
  double velum_vis = 0;  // [0,1] image contrast of the velum, audio-independent
};

LatentState latent_state(const SpeakerParams& sp, int frame);

// One synchronized observation at native resolution.
struct RawSample {
  nc::TensorF image;        // [1,84,84], values in [0,1]
  metrics::LabelMask mask;  // classes 0..4
  nc::TensorF audio;        // [T, n_audio_features]
  nc::TensorF phono;        // [n_phono_classes], multi-hot
  int speaker = 0;
  int frame = 0;
  int aug = 0;  // 0 = original, k>0 = k-th augmented copy
};

RawSample generate_frame(const SpeakerParams& sp, int frame, uint64_t seed);

// Geometric + intensity augmentation. Geometry applies jointly to image
// (bilinear) and mask (nearest); intensity to the image only.
struct AugmentParams {
  double rot_deg = 0;   // [-10, 10]
  double tx = 0, ty = 0;  // [-4, 4] px
  double scale = 1;     // [0.9, 1.1]
  double brightness = 0;  // [-0.1, 0.1]
  double contrast = 1;  // [0.8, 1.25]
  double gamma = 1;     // [0.8, 1.25]

  static AugmentParams identity() { return {}; }
  static AugmentParams sample(uint64_t seed);
};

RawSample apply_augment(const RawSample& s, const AugmentParams& p);
RawSample augment(const RawSample& s, uint64_t seed);

// ---- dataset files ---------------------------------------------------------
// Directory layout: manifest.json + speaker_XXX.bin blobs of VSTN tensors
// (image, mask, audio, phono per record).

struct RecordRef {
  int speaker = 0;
  int frame = 0;
  int aug = 0;
  uint64_t offset = 0;  // byte offset into the speaker blob
};

struct Manifest {
  int version = 1;
  uint64_t seed = 0;
  GeneratorConfig config;
  std::vector<int> frames_per_speaker;
  double norm_min = 0, norm_max = 1;  // dataset-level intensity range
  double spacing_mm = kNativeSpacingMm;
  std::vector<std::string> class_names = kClassNames;
  std::vector<RecordRef> records;
};

Manifest generate_dataset(const GeneratorConfig& cfg, const std::string& out_dir);
Manifest load_manifest(const std::string& dir);
RawSample load_record(const std::string& dir, const Manifest& m, size_t index);

// Per-class pixel frequencies over the whole dataset (index = class id).
std::vector<double> class_pixel_frequencies(const std::string& dir, const Manifest& m);

// ---- preprocessing ----------------------------------------------------------

// Model-resolution sample: resized, dataset-min/max normalized to [0,1],
// spacing rescaled by 84/image_size * 2.4.
struct Sample {
  nc::TensorF image;
  metrics::LabelMask mask;
  nc::TensorF audio;
  nc::TensorF phono;
  int speaker = 0;
  int frame = 0;
  int aug = 0;
};

Sample preprocess(const RawSample& raw, const Manifest& m, int image_size);

// ---- leave-one-speaker-out splits -------------------------------------------

struct Split {
  std::vector<size_t> train, val, test;  // indices into Manifest::records
};

// test: held-out speaker originals only; val: last 15% of each remaining
// speaker's original frames (no augmented copies, and augmented copies of
// val frames are dropped); train: the rest plus their augmentations.
Split split_loso(const Manifest& m, int held_out_speaker);

}  // namespace vocseg::synth
