// Benchmark comparing the serial reference kernels against the OpenMP
// versions (which must be bit-identical, only faster).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "vocseg/common/rng.hpp"
#include "vocseg/common/threads.hpp"
#include "vocseg/metrics/distance.hpp"
#include "vocseg/numcore/kernels.hpp"

using namespace vocseg;
using Clock = std::chrono::steady_clock;

namespace {

template <class F>
double time_ms(F f, int reps) {
  f();  // warmup
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) f();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double par_ms, bool identical) {
  std::printf("%-28s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n", name, serial_ms,
              par_ms, serial_ms / par_ms, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("kernel benchmark, %d thread(s)\n\n", threads::max_threads());
  rng::Stream st(7);

  {
    const size_t m = 256, k = 256, n = 256;
    std::vector<float> a(m * k), b(k * n), c1(m * n), c2(m * n);
    for (auto& v : a) v = static_cast<float>(st.normal());
    for (auto& v : b) v = static_cast<float>(st.normal());
    const double ts = time_ms([&] { kernels::serial::matmul(a.data(), b.data(), c1.data(), m, k, n); }, 5);
    const double tp = time_ms([&] { kernels::par::matmul(a.data(), b.data(), c2.data(), m, k, n); }, 5);
    report("matmul 256x256x256 f32", ts, tp, std::memcmp(c1.data(), c2.data(), c1.size() * 4) == 0);
  }
  {
    const size_t rows = 4096, cols = 256;
    std::vector<float> x(rows * cols), y1(rows * cols), y2(rows * cols);
    for (auto& v : x) v = static_cast<float>(st.normal());
    const double ts = time_ms([&] { kernels::serial::softmax_rows(x.data(), y1.data(), rows, cols); }, 10);
    const double tp = time_ms([&] { kernels::par::softmax_rows(x.data(), y2.data(), rows, cols); }, 10);
    report("softmax 4096x256 rows", ts, tp, std::memcmp(y1.data(), y2.data(), y1.size() * 4) == 0);
  }
  {
    std::vector<float> img(1 * 512 * 512), o1(1 * 224 * 224), o2(o1.size());
    for (auto& v : img) v = static_cast<float>(st.uniform());
    const double ts = time_ms([&] { kernels::serial::bilinear_resize(img.data(), o1.data(), 1, 512, 512, 224, 224); }, 10);
    const double tp = time_ms([&] { kernels::par::bilinear_resize(img.data(), o2.data(), 1, 512, 512, 224, 224); }, 10);
    report("bilinear 512->224", ts, tp, std::memcmp(o1.data(), o2.data(), o1.size() * 4) == 0);
  }
  {
    const size_t n = 1 << 22;
    std::vector<float> x(n), y1(n), y2(n);
    for (auto& v : x) v = static_cast<float>(st.normal());
    auto g = [](float v) { return v > 0 ? v : 0.1f * v; };
    const double ts = time_ms([&] { kernels::serial::map(x.data(), y1.data(), n, g); }, 10);
    const double tp = time_ms([&] { kernels::par::map(x.data(), y2.data(), n, g); }, 10);
    report("elementwise map 4M f32", ts, tp, std::memcmp(y1.data(), y2.data(), n * 4) == 0);
  }
  {
    // surface distances: exact-EDT path vs the brute-force O(|A|*|B|)
    // reference, on speckled masks with dense boundaries
    metrics::LabelMask a = metrics::LabelMask::filled(128, 128, 0, 2.4);
    metrics::LabelMask b = a;
    rng::Stream ms(11);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        if (ms.uniform() < 0.25) a.at(x, y) = 1;
        if (ms.uniform() < 0.25) b.at(x, y) = 1;
      }
    const auto sa = metrics::extract_surface(a, 1);
    const auto sb = metrics::extract_surface(b, 1);
    std::printf("\nsurface distance: %zu vs %zu boundary points\n", sa.size(), sb.size());
    double r1 = 0, r2 = 0;
    const double ts = time_ms([&] { r1 = metrics::surface_distances_bruteforce(sa, sb).hd95_mm; }, 3);
    const double tp = time_ms([&] { r2 = metrics::surface_distances(a, b, 1)->hd95_mm; }, 3);
    report("  brute force vs exact EDT", ts, tp, std::abs(r1 - r2) < 1e-9);
  }
  return 0;
}
