#pragma once

#include <cmath>
#include <cstddef>

#include "vocseg/common/threads.hpp"

// Hot numeric kernels, each in a serial and an OpenMP flavor. Both flavors
// run the identical per-element code, so outputs are bit-identical for any
// thread count; the parallel versions only distribute independent output
// rows/elements. The serial versions are kept as the reference the tests
// and the kernel benchmark compare against.

namespace vocseg::kernels {

inline constexpr size_t kParallelCutoff = 16384;  // flops below this stay serial

// ---- matmul: c[m x n] = a[m x k] * b[k x n] ----------------------------

template <class S>
inline void matmul_row(const S* a, const S* b, S* c, size_t k, size_t n, size_t i) {
  S* crow = c + i * n;
  for (size_t j = 0; j < n; ++j) crow[j] = S(0);
  const S* arow = a + i * k;
  for (size_t kk = 0; kk < k; ++kk) {
    const S av = arow[kk];
    const S* brow = b + kk * n;
    for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

namespace serial {
template <class S>
void matmul(const S* a, const S* b, S* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) matmul_row(a, b, c, k, n, i);
}
}  // namespace serial

namespace par {
template <class S>
void matmul(const S* a, const S* b, S* c, size_t m, size_t k, size_t n) {
  const int nt = threads::kernel_threads();
  if (nt <= 1 || m * k * n < kParallelCutoff) {
    serial::matmul(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i)
    matmul_row(a, b, c, k, n, static_cast<size_t>(i));
}
}  // namespace par

// Gradient companions: c[m x k] += a[m x n] * b[k x n]^T and
// c[k x n] += a[m x k]^T * b[m x n]. Row-parallel like matmul.

template <class S>
inline void matmul_nt_acc_row(const S* a, const S* b, S* c, size_t n, size_t k, size_t i) {
  const S* arow = a + i * n;
  S* crow = c + i * k;
  for (size_t kk = 0; kk < k; ++kk) {
    const S* brow = b + kk * n;
    S acc = S(0);
    for (size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
    crow[kk] += acc;
  }
}

template <class S>
inline void matmul_tn_acc_row(const S* a, const S* b, S* c, size_t m, size_t k, size_t n,
                              size_t kk) {
  S* crow = c + kk * n;
  for (size_t i = 0; i < m; ++i) {
    const S av = a[i * k + kk];
    const S* brow = b + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

namespace serial {
template <class S>
void matmul_nt_acc(const S* a, const S* b, S* c, size_t m, size_t n, size_t k) {
  for (size_t i = 0; i < m; ++i) matmul_nt_acc_row(a, b, c, n, k, i);
}
template <class S>
void matmul_tn_acc(const S* a, const S* b, S* c, size_t m, size_t k, size_t n) {
  for (size_t kk = 0; kk < k; ++kk) matmul_tn_acc_row(a, b, c, m, k, n, kk);
}
}  // namespace serial

namespace par {
template <class S>
void matmul_nt_acc(const S* a, const S* b, S* c, size_t m, size_t n, size_t k) {
  const int nt = threads::kernel_threads();
  if (nt <= 1 || m * n * k < kParallelCutoff) {
    serial::matmul_nt_acc(a, b, c, m, n, k);
    return;
  }
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i)
    matmul_nt_acc_row(a, b, c, n, k, static_cast<size_t>(i));
}
template <class S>
void matmul_tn_acc(const S* a, const S* b, S* c, size_t m, size_t k, size_t n) {
  const int nt = threads::kernel_threads();
  if (nt <= 1 || m * n * k < kParallelCutoff) {
    serial::matmul_tn_acc(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long kk = 0; kk < static_cast<long long>(k); ++kk)
    matmul_tn_acc_row(a, b, c, m, k, n, static_cast<size_t>(kk));
}
}  // namespace par

// ---- elementwise map / zip ---------------------------------------------

namespace serial {
template <class S, class F>
void map(const S* x, S* y, size_t n, F f) {
  for (size_t i = 0; i < n; ++i) y[i] = f(x[i]);
}
template <class S, class F>
void zip(const S* a, const S* b, S* y, size_t n, F f) {
  for (size_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
}
}  // namespace serial

namespace par {
template <class S, class F>
void map(const S* x, S* y, size_t n, F f) {
  const int nt = threads::kernel_threads();
  if (nt <= 1 || n < kParallelCutoff) {
    serial::map(x, y, n, f);
    return;
  }
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    y[i] = f(x[i]);
}
template <class S, class F>
void zip(const S* a, const S* b, S* y, size_t n, F f) {
  const int nt = threads::kernel_threads();
  if (nt <= 1 || n < kParallelCutoff) {
    serial::zip(a, b, y, n, f);
    return;
  }
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    y[i] = f(a[i], b[i]);
}
}  // namespace par

// ---- softmax over contiguous rows ----------------------------------------

template <class S>
inline void softmax_row(const S* x, S* y, size_t n) {
  S mx = x[0];
  for (size_t i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
  S sum = S(0);
  for (size_t i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  const S inv = S(1) / sum;
  for (size_t i = 0; i < n; ++i) y[i] *= inv;
}

namespace serial {
template <class S>
void softmax_rows(const S* x, S* y, size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) softmax_row(x + r * cols, y + r * cols, cols);
}
}  // namespace serial

namespace par {
template <class S>
void softmax_rows(const S* x, S* y, size_t rows, size_t cols) {
  const int nt = threads::kernel_threads();
  if (nt <= 1 || rows * cols < kParallelCutoff) {
    serial::softmax_rows(x, y, rows, cols);
    return;
  }
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    softmax_row(x + r * cols, y + r * cols, cols);
}
}  // namespace par

// ---- bilinear resize, channel-planar [C,H,W] -> [C,OH,OW] ----------------
// Align-corner-free convention: source coord = (dst + 0.5) * scale - 0.5,
// clamped to the valid range, so a constant image stays constant.

struct BilinearTap {
  size_t i0, i1;
  double w1;  // weight of i1; i0 gets (1 - w1)
};

inline BilinearTap bilinear_tap(size_t out_i, size_t in_n, size_t out_n) {
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  double src = (static_cast<double>(out_i) + 0.5) * scale - 0.5;
  if (src < 0) src = 0;
  const double hi = static_cast<double>(in_n - 1);
  if (src > hi) src = hi;
  BilinearTap t;
  t.i0 = static_cast<size_t>(src);
  if (t.i0 >= in_n - 1) t.i0 = in_n >= 2 ? in_n - 2 : 0;
  t.i1 = in_n >= 2 ? t.i0 + 1 : 0;
  t.w1 = src - static_cast<double>(t.i0);
  if (in_n == 1) t.w1 = 0.0;
  return t;
}

template <class S>
inline void bilinear_row(const S* src, S* dst, size_t h, size_t w, size_t oh, size_t ow,
                         size_t c, size_t oy) {
  const BilinearTap ty = bilinear_tap(oy, h, oh);
  const S* plane = src + c * h * w;
  S* out = dst + c * oh * ow + oy * ow;
  for (size_t ox = 0; ox < ow; ++ox) {
    const BilinearTap tx = bilinear_tap(ox, w, ow);
    const double v00 = plane[ty.i0 * w + tx.i0];
    const double v01 = plane[ty.i0 * w + tx.i1];
    const double v10 = plane[ty.i1 * w + tx.i0];
    const double v11 = plane[ty.i1 * w + tx.i1];
    const double top = v00 * (1.0 - tx.w1) + v01 * tx.w1;
    const double bot = v10 * (1.0 - tx.w1) + v11 * tx.w1;
    out[ox] = static_cast<S>(top * (1.0 - ty.w1) + bot * ty.w1);
  }
}

namespace serial {
template <class S>
void bilinear_resize(const S* src, S* dst, size_t ch, size_t h, size_t w, size_t oh, size_t ow) {
  for (size_t c = 0; c < ch; ++c)
    for (size_t oy = 0; oy < oh; ++oy) bilinear_row(src, dst, h, w, oh, ow, c, oy);
}
}  // namespace serial

namespace par {
template <class S>
void bilinear_resize(const S* src, S* dst, size_t ch, size_t h, size_t w, size_t oh, size_t ow) {
  const int nt = threads::kernel_threads();
  const size_t total = ch * oh;
  if (nt <= 1 || total * ow < kParallelCutoff) {
    serial::bilinear_resize(src, dst, ch, h, w, oh, ow);
    return;
  }
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long t = 0; t < static_cast<long long>(total); ++t) {
    const size_t c = static_cast<size_t>(t) / oh;
    const size_t oy = static_cast<size_t>(t) % oh;
    bilinear_row(src, dst, h, w, oh, ow, c, oy);
  }
}
}  // namespace par

// Nearest-neighbor index for resize: floor((i + 0.5) * in / out).
inline size_t nearest_tap(size_t out_i, size_t in_n, size_t out_n) {
  size_t i = static_cast<size_t>((static_cast<double>(out_i) + 0.5) *
                                 static_cast<double>(in_n) / static_cast<double>(out_n));
  return i >= in_n ? in_n - 1 : i;
}

}  // namespace vocseg::kernels
