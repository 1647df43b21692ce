#include "vocseg/synthdata/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vocseg/common/rng.hpp"
#include "vocseg/numcore/kernels.hpp"
#include "vocseg/numcore/ops.hpp"

namespace vocseg::synth {

namespace {

constexpr int W = kNativePx;
constexpr int H = kNativePx;
constexpr double kTimeStep = 0.12;  // latent time units per frame

double clamp01(double v) { return v < 0 ? 0 : (v > 1 ? 1 : v); }

// logistic edge profile: ~1 inside (f<0), ~0 outside
double soft_inside(double f, double edge) { return 1.0 / (1.0 + std::exp(f / edge)); }

struct Ellipse {
  double cx, cy, rx, ry;
  double wobble_amp, wobble_freq, wobble_phase;

  // negative inside; boundary radius wobbles with angle
  double sdf(double x, double y) const {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    const double r = std::sqrt(dx * dx + dy * dy);
    const double th = std::atan2(dy, dx);
    return r - (1.0 + wobble_amp * std::sin(wobble_freq * th + wobble_phase));
  }
};

// distance from point to segment minus half thickness; negative inside
double capsule_sdf(double x, double y, double x0, double y0, double x1, double y1,
                   double half_th) {
  const double vx = x1 - x0, vy = y1 - y0;
  const double wx = x - x0, wy = y - y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0;
  t = t < 0 ? 0 : (t > 1 ? 1 : t);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy) - half_th;
}

LatentState latent_state_at(const SpeakerParams& sp, double frame_time) {
  const double u = frame_time * kTimeStep;
  LatentState s;
  s.tongue_x = 0.7 * std::sin(sp.fx1 * u + sp.px1) + 0.3 * std::sin(sp.fx2 * u + sp.px2);
  s.tongue_y = 0.7 * std::sin(sp.fy1 * u + sp.py1) + 0.3 * std::sin(sp.fy2 * u + sp.py2);
  s.velum_open = 0.5 + 0.5 * std::sin(sp.fv * u + sp.pv);
  s.lip_gap = clamp01(0.5 + 0.4 * std::sin(sp.fg * u + sp.pg) +
                      0.1 * std::sin(2.3 * sp.fg * u + 0.7));
  s.velum_vis = 0.5 + 0.5 * std::sin(sp.fvis * u + sp.pvis);
  return s;
}

struct Scene {
  Ellipse tongue, velum;
  double up_x0, up_y0, up_x1, up_y1;  // upper lip segment
  double lo_x0, lo_y0, lo_x1, lo_y1;  // lower lip segment
  double lip_half_th;
};

Scene build_scene(const SpeakerParams& sp, const LatentState& st) {
  Scene sc;
  sc.tongue = {sp.tongue_cx + st.tongue_x * 6.0, sp.tongue_cy + st.tongue_y * 5.0,
               sp.tongue_rx,  sp.tongue_ry,
               0.07,          3.0,
               sp.tongue_wobble_phase};
  sc.velum = {sp.velum_cx + (st.velum_open - 0.5) * 5.0,
              sp.velum_cy + (st.velum_open - 0.5) * 10.0,
              sp.velum_rx,
              sp.velum_ry,
              0.05,
              2.0,
              sp.tongue_wobble_phase * 1.7};
  const double ca = std::cos(sp.lip_angle), sa = std::sin(sp.lip_angle);
  const double uy = sp.lip_y - 2.0 - st.lip_gap * 3.0;
  const double ly = sp.lip_y + 3.0 + st.lip_gap * 6.0;
  sc.up_x0 = sp.lip_x;
  sc.up_y0 = uy;
  sc.up_x1 = sp.lip_x + sp.lip_len * ca;
  sc.up_y1 = uy + sp.lip_len * sa;
  sc.lo_x0 = sp.lip_x;
  sc.lo_y0 = ly;
  sc.lo_x1 = sp.lip_x + sp.lip_len * ca;
  sc.lo_y1 = ly - sp.lip_len * sa * 0.6;
  sc.lip_half_th = sp.lip_half_thickness;
  return sc;
}

}  // namespace

SpeakerParams speaker_params(uint64_t seed, int speaker_id) {
  rng::Stream st(rng::mix(seed, 0xA11A70u), static_cast<uint64_t>(speaker_id));
  SpeakerParams sp;
  sp.id = speaker_id;
  sp.anatomy_seed = rng::mix(seed, static_cast<uint64_t>(speaker_id));
  sp.tongue_cx = 0.54 * W + st.uniform(-3, 3);
  sp.tongue_cy = 0.63 * H + st.uniform(-3, 3);
  sp.tongue_rx = 14.0 + st.uniform(-1.5, 1.5);
  sp.tongue_ry = 10.0 + st.uniform(-1.2, 1.2);
  sp.tongue_wobble_phase = st.uniform(0, 6.283);
  sp.velum_cx = 0.64 * W + st.uniform(-2, 2);
  sp.velum_cy = 0.26 * H + st.uniform(-2, 2);
  sp.velum_rx = 6.0 + st.uniform(-0.6, 0.6);
  sp.velum_ry = 4.5 + st.uniform(-0.4, 0.4);
  sp.lip_x = 0.16 * W + st.uniform(-2, 2);
  sp.lip_y = 0.42 * H + st.uniform(-2.5, 2.5);
  sp.lip_len = 12.0 + st.uniform(-1.5, 1.5);
  sp.lip_half_thickness = 1.5 + st.uniform(-0.15, 0.25);
  sp.lip_angle = st.uniform(-0.18, 0.18);
  sp.tissue_base = 0.16 + st.uniform(-0.02, 0.02);
  sp.tissue_gradient = 0.10 + st.uniform(-0.03, 0.03);
  sp.fx1 = st.uniform(0.9, 1.2);
  sp.fx2 = st.uniform(2.1, 2.6);
  sp.px1 = st.uniform(0, 6.283);
  sp.px2 = st.uniform(0, 6.283);
  sp.fy1 = st.uniform(0.8, 1.1);
  sp.fy2 = st.uniform(1.9, 2.4);
  sp.py1 = st.uniform(0, 6.283);
  sp.py2 = st.uniform(0, 6.283);
  sp.fv = st.uniform(0.6, 0.9);
  sp.pv = st.uniform(0, 6.283);
  sp.fg = st.uniform(1.1, 1.5);
  sp.pg = st.uniform(0, 6.283);
  sp.fvis = st.uniform(0.35, 0.55);
  sp.pvis = st.uniform(0, 6.283);
  return sp;
}

LatentState latent_state(const SpeakerParams& sp, int frame) {
  return latent_state_at(sp, static_cast<double>(frame));
}

RawSample generate_frame(const SpeakerParams& sp, int frame, uint64_t seed) {
  const LatentState st = latent_state(sp, frame);
  const Scene sc = build_scene(sp, st);

  rng::Stream noise(rng::mix(seed, sp.anatomy_seed), static_cast<uint64_t>(frame) * 2 + 1);

  RawSample s;
  s.speaker = sp.id;
  s.frame = frame;
  s.mask = metrics::LabelMask::filled(W, H, 0, kNativeSpacingMm);
  std::vector<float> img(static_cast<size_t>(W) * H);

  const double velum_contrast = 0.03 + 0.30 * st.velum_vis * st.velum_vis;
  const double tongue_contrast = 0.34;
  const double frame_brightness = noise.uniform(-0.03, 0.03);

  // head outline gives the background some anatomy-like context
  const Ellipse head = {0.5 * W, 0.52 * H, 0.46 * W, 0.47 * H, 0.03, 2.0, 1.3};

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double fx = x + 0.5, fy = y + 0.5;
      double v = sp.tissue_base + sp.tissue_gradient * (fy / H - 0.5) +
                 0.03 * std::sin(0.11 * fx + sp.px1) * std::sin(0.13 * fy + sp.py1);
      v += 0.08 * soft_inside(head.sdf(fx, fy), 0.02);

      const double ft = sc.tongue.sdf(fx, fy);
      const double fv2 = sc.velum.sdf(fx, fy);
      const double fu = capsule_sdf(fx, fy, sc.up_x0, sc.up_y0, sc.up_x1, sc.up_y1,
                                    sc.lip_half_th);
      const double fl = capsule_sdf(fx, fy, sc.lo_x0, sc.lo_y0, sc.lo_x1, sc.lo_y1,
                                    sc.lip_half_th);

      v += tongue_contrast * soft_inside(ft, 0.05);
      v += velum_contrast * soft_inside(fv2, 0.06);
      v += 0.26 * soft_inside(fu, 0.6);  // capsule sdf is in pixels
      v -= 0.22 * soft_inside(fl, 0.6);

      v += frame_brightness + noise.normal(0.0, 0.03);
      img[static_cast<size_t>(y) * W + x] = static_cast<float>(clamp01(v));

      uint8_t cls = 0;
      if (ft < 0) cls = 1;
      if (fv2 < 0) cls = 2;
      if (fu < 0) cls = 3;
      if (fl < 0) cls = 4;
      s.mask.at(x, y) = cls;
    }
  }
  s.image = nc::TensorF::from({1, H, W}, std::move(img));

  // audio: band-energy-like sinusoid mixture of the latent state; frame j
  // emphasizes articulator (j mod 4) so tokens are not interchangeable
  const int T = 4, F = 16;
  std::vector<float> audio(static_cast<size_t>(T) * F);
  static const double wk[4] = {1.0, 1.7, 0.6, 2.3};
  static const double fk[4] = {0.0, 0.4, 1.1, 2.0};
  for (int j = 0; j < T; ++j) {
    const double tau = (j - (T - 1) / 2.0) * 0.35;
    const LatentState sj = latent_state_at(sp, frame + tau);
    const double bank_state[4] = {sj.tongue_x, sj.tongue_y, 2 * sj.velum_open - 1,
                                  2 * sj.lip_gap - 1};
    for (int b = 0; b < 4; ++b) {
      const double w = (j % 4 == b) ? 1.0 : 0.25;
      for (int k = 0; k < 4; ++k) {
        const double val = w * std::sin(wk[k] * bank_state[b] * 1.4 + fk[k]) +
                           noise.normal(0.0, 0.05);
        audio[static_cast<size_t>(j) * F + b * 4 + k] = static_cast<float>(val);
      }
    }
  }
  s.audio = nc::TensorF::from({T, F}, std::move(audio));

  // phono: quantization of the latent state into multi-hot bins; the velum
  // gets the finest binning since its image contrast is the least reliable
  std::vector<float> ph(12, 0.0f);
  auto bin = [](double v01, int n) {
    int b = static_cast<int>(v01 * n);
    return b < 0 ? 0 : (b >= n ? n - 1 : b);
  };
  ph[bin((st.tongue_x + 1) / 2, 3)] = 1.0f;
  ph[3 + bin((st.tongue_y + 1) / 2, 3)] = 1.0f;
  ph[6 + bin(st.velum_open, 4)] = 1.0f;
  ph[10 + bin(st.lip_gap, 2)] = 1.0f;
  s.phono = nc::TensorF::from({12}, std::move(ph));
  return s;
}

AugmentParams AugmentParams::sample(uint64_t seed) {
  rng::Stream st(seed, "augment");
  AugmentParams p;
  p.rot_deg = st.uniform(-10, 10);
  p.tx = st.uniform(-4, 4);
  p.ty = st.uniform(-4, 4);
  p.scale = st.uniform(0.9, 1.1);
  p.brightness = st.uniform(-0.1, 0.1);
  p.contrast = st.uniform(0.8, 1.25);
  p.gamma = st.uniform(0.8, 1.25);
  return p;
}

RawSample apply_augment(const RawSample& s, const AugmentParams& p) {
  RawSample out = s;
  const int w = s.mask.width, h = s.mask.height;
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double th = p.rot_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(th), sa = std::sin(th);

  std::vector<float> img(static_cast<size_t>(w) * h, 0.0f);
  metrics::LabelMask mask = metrics::LabelMask::filled(w, h, 0, s.mask.spacing_mm);
  const float* src = s.image.values().data();

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // inverse map: undo translation, rotation, scale about the center
      const double dx = x - cx - p.tx, dy = y - cy - p.ty;
      const double sx = (ca * dx + sa * dy) / p.scale + cx;
      const double sy = (-sa * dx + ca * dy) / p.scale + cy;

      // bilinear sample, zero outside
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      double acc = 0;
      for (int oy = 0; oy <= 1; ++oy)
        for (int ox = 0; ox <= 1; ++ox) {
          const int xi = x0 + ox, yi = y0 + oy;
          if (xi < 0 || yi < 0 || xi >= w || yi >= h) continue;
          const double wgt = (ox ? fx : 1 - fx) * (oy ? fy : 1 - fy);
          acc += wgt * src[static_cast<size_t>(yi) * w + xi];
        }

      // intensity: contrast about mid-gray, brightness, clamp, gamma
      acc = (acc - 0.5) * p.contrast + 0.5 + p.brightness;
      acc = clamp01(acc);
      acc = std::pow(acc, p.gamma);
      img[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);

      const int nx = static_cast<int>(std::lround(sx)), ny = static_cast<int>(std::lround(sy));
      if (nx >= 0 && ny >= 0 && nx < w && ny < h) mask.at(x, y) = s.mask.at(nx, ny);
    }

  out.image = nc::TensorF::from({1, h, w}, std::move(img));
  out.mask = std::move(mask);
  return out;
}

RawSample augment(const RawSample& s, uint64_t seed) {
  return apply_augment(s, AugmentParams::sample(seed));
}

Sample preprocess(const RawSample& raw, const Manifest& m, int image_size) {
  Sample out;
  out.speaker = raw.speaker;
  out.frame = raw.frame;
  out.aug = raw.aug;
  out.audio = raw.audio;
  out.phono = raw.phono;

  nc::NoGradGuard no_grad;
  nc::TensorF resized = image_size == raw.mask.height && image_size == raw.mask.width
                            ? raw.image
                            : nc::bilinear_resize(raw.image, image_size, image_size);

  // dataset-level min-max normalization; zero range maps to 0
  const double range = m.norm_max - m.norm_min;
  std::vector<float> vals = resized.values();
  for (auto& v : vals)
    v = range > 0 ? static_cast<float>(clamp01((v - m.norm_min) / range)) : 0.0f;
  out.image = nc::TensorF::from({1, image_size, image_size}, std::move(vals));

  out.mask = metrics::LabelMask::filled(image_size, image_size, 0,
                                        kNativeSpacingMm * kNativePx / image_size);
  for (int y = 0; y < image_size; ++y) {
    const size_t sy = kernels::nearest_tap(y, raw.mask.height, image_size);
    for (int x = 0; x < image_size; ++x) {
      const size_t sx = kernels::nearest_tap(x, raw.mask.width, image_size);
      out.mask.at(x, y) = raw.mask.at(static_cast<int>(sx), static_cast<int>(sy));
    }
  }
  return out;
}

}  // namespace vocseg::synth
