#include "vocseg/metrics/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vocseg::metrics {

SurfacePointSet extract_surface(const LabelMask& mask, uint8_t cls) {
  SurfacePointSet points;
  const int w = mask.width, h = mask.height;
  const double s = mask.spacing_mm;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(x, y) != cls) continue;
      const bool boundary = x == 0 || y == 0 || x == w - 1 || y == h - 1 ||
                            mask.at(x - 1, y) != cls || mask.at(x + 1, y) != cls ||
                            mask.at(x, y - 1) != cls || mask.at(x, y + 1) != cls;
      if (boundary) points.push_back({(x + 0.5) * s, (y + 0.5) * s});
    }
  return points;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(rank);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

namespace {

// directed nearest distances from each point of `from` to the set `to`
std::vector<double> directed_bruteforce(const SurfacePointSet& from, const SurfacePointSet& to) {
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const double dx = a.x_mm - b.x_mm, dy = a.y_mm - b.y_mm;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) best = d2;
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

SurfaceDistanceResult from_pooled(std::vector<double> pooled, double sum_ab, size_t count) {
  SurfaceDistanceResult r;
  r.assd_mm = sum_ab / static_cast<double>(count);
  r.hd_max_mm = *std::max_element(pooled.begin(), pooled.end());
  r.hd95_mm = percentile(std::move(pooled), 0.95);
  return r;
}

// 1-D squared distance transform lower envelope (Felzenszwalb-Huttenlocher).
void dt1d(const double* f, double* d, int n, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = 0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + q * static_cast<double>(q)) - (f[p] + p * static_cast<double>(p))) /
          (2.0 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const int p = v[k];
    d[q] = (q - p) * static_cast<double>(q - p) + f[p];
  }
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<uint8_t>& feature, int width,
                                               int height) {
  const double kInf = 1e20;
  std::vector<double> dist(static_cast<size_t>(width) * height);
  for (size_t i = 0; i < dist.size(); ++i) dist[i] = feature[i] ? 0.0 : kInf;

  const int n = std::max(width, height);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  // pass 1: columns
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) f[y] = dist[static_cast<size_t>(y) * width + x];
    dt1d(f.data(), d.data(), height, v.data(), z.data());
    for (int y = 0; y < height; ++y) dist[static_cast<size_t>(y) * width + x] = d[y];
  }
  // pass 2: rows
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) f[x] = dist[static_cast<size_t>(y) * width + x];
    dt1d(f.data(), d.data(), width, v.data(), z.data());
    for (int x = 0; x < width; ++x) dist[static_cast<size_t>(y) * width + x] = d[x];
  }
  return dist;
}

SurfaceDistanceResult surface_distances_bruteforce(const SurfacePointSet& pred,
                                                   const SurfacePointSet& truth) {
  if (pred.empty() || truth.empty())
    throw std::invalid_argument("surface distance of empty surface is undefined");
  std::vector<double> ab = directed_bruteforce(pred, truth);
  std::vector<double> ba = directed_bruteforce(truth, pred);
  double sum = 0;
  for (double x : ab) sum += x;
  for (double x : ba) sum += x;
  std::vector<double> pooled = ab;
  pooled.insert(pooled.end(), ba.begin(), ba.end());
  return from_pooled(std::move(pooled), sum, ab.size() + ba.size());
}

std::optional<SurfaceDistanceResult> surface_distances(const LabelMask& pred,
                                                       const LabelMask& truth, uint8_t cls) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw std::invalid_argument("mask dimensions differ");
  const int w = pred.width, h = pred.height;
  const double s = pred.spacing_mm;

  auto surface_grid = [&](const LabelMask& m) {
    std::vector<uint8_t> g(static_cast<size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (m.at(x, y) != cls) continue;
        const bool boundary = x == 0 || y == 0 || x == w - 1 || y == h - 1 ||
                              m.at(x - 1, y) != cls || m.at(x + 1, y) != cls ||
                              m.at(x, y - 1) != cls || m.at(x, y + 1) != cls;
        if (boundary) g[static_cast<size_t>(y) * w + x] = 1;
      }
    return g;
  };

  const std::vector<uint8_t> ga = surface_grid(pred);
  const std::vector<uint8_t> gb = surface_grid(truth);
  const size_t na = static_cast<size_t>(std::count(ga.begin(), ga.end(), uint8_t(1)));
  const size_t nb = static_cast<size_t>(std::count(gb.begin(), gb.end(), uint8_t(1)));
  if (na == 0 || nb == 0) return std::nullopt;

  const std::vector<double> dta = squared_distance_transform(ga, w, h);
  const std::vector<double> dtb = squared_distance_transform(gb, w, h);

  std::vector<double> pooled;
  pooled.reserve(na + nb);
  double sum = 0;
  for (size_t i = 0; i < ga.size(); ++i)
    if (ga[i]) {
      const double d = std::sqrt(dtb[i]) * s;
      pooled.push_back(d);
      sum += d;
    }
  for (size_t i = 0; i < gb.size(); ++i)
    if (gb[i]) {
      const double d = std::sqrt(dta[i]) * s;
      pooled.push_back(d);
      sum += d;
    }
  return from_pooled(std::move(pooled), sum, na + nb);
}

double assd(const SurfacePointSet& pred, const SurfacePointSet& truth) {
  return surface_distances_bruteforce(pred, truth).assd_mm;
}

double hd95(const SurfacePointSet& pred, const SurfacePointSet& truth) {
  return surface_distances_bruteforce(pred, truth).hd95_mm;
}

}  // namespace vocseg::metrics
