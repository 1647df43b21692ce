#pragma once

#include <optional>

#include "vocseg/metrics/labelmask.hpp"

namespace vocseg::metrics {

// Pixel-center boundary point, coordinates in mm.
struct SurfacePoint {
  double x_mm = 0;
  double y_mm = 0;
};
using SurfacePointSet = std::vector<SurfacePoint>;

// Boundary rule: a pixel is on the surface of class c iff it is class c and
// at least one 4-neighbor is not class c; the image border counts as
// background. Nonempty iff the class region is nonempty.
SurfacePointSet extract_surface(const LabelMask& mask, uint8_t cls);

struct SurfaceDistanceResult {
  double assd_mm = 0;
  double hd95_mm = 0;
  double hd_max_mm = 0;
};

// Brute-force O(|A|*|B|) nearest-distance reference, kept as the oracle the
// accelerated path is tested against.
SurfaceDistanceResult surface_distances_bruteforce(const SurfacePointSet& pred,
                                                   const SurfacePointSet& truth);

// Accelerated path: two-pass exact Euclidean distance transform per class
// over the pixel grid, then directed distances read off the transform.
// Returns nullopt when either surface is empty (undefined, excluded from
// aggregates).
std::optional<SurfaceDistanceResult> surface_distances(const LabelMask& pred,
                                                       const LabelMask& truth, uint8_t cls);

double assd(const SurfacePointSet& pred, const SurfacePointSet& truth);
double hd95(const SurfacePointSet& pred, const SurfacePointSet& truth);

// Exact squared Euclidean distance transform (Felzenszwalb-Huttenlocher),
// feature pixels marked true. Distances in pixel units squared.
std::vector<double> squared_distance_transform(const std::vector<uint8_t>& feature, int width,
                                               int height);

// 95th-percentile convention used throughout: linear interpolation between
// order statistics at rank q*(n-1).
double percentile(std::vector<double> values, double q);

}  // namespace vocseg::metrics
