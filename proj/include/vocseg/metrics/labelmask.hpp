#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vocseg::metrics {

// Per-pixel class-index raster with physical pixel spacing in mm.
struct LabelMask {
  int width = 0;
  int height = 0;
  double spacing_mm = 1.0;
  std::vector<uint8_t> values;  // row-major, height*width

  uint8_t at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
  size_t pixels() const { return values.size(); }

  static LabelMask filled(int w, int h, uint8_t v, double spacing = 1.0) {
    LabelMask m;
    m.width = w;
    m.height = h;
    m.spacing_mm = spacing;
    m.values.assign(static_cast<size_t>(w) * h, v);
    return m;
  }
};

// Mask file: "VSTN" u8 raster (rank 2, height x width) + JSON sidecar
// (spacing_mm, class names) at <path>.json.
void save_mask(const std::string& path, const LabelMask& mask,
               const std::vector<std::string>& class_names);
LabelMask load_mask(const std::string& path, std::vector<std::string>* class_names = nullptr);

}  // namespace vocseg::metrics
