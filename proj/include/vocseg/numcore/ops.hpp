#pragma once

#include <cmath>
#include <initializer_list>
#include <numbers>

#include "vocseg/numcore/kernels.hpp"
#include "vocseg/numcore/tensor.hpp"

namespace vocseg::nc {

// Builds an op output node: checks the result for NaN/Inf, wires parents
// and the backward rule only when grad recording is active and some input
// requires grad. Higher modules use this to define fused primitives.
template <class S>
TensorT<S> make_op_vec(const char* name, Shape shape, std::vector<S> value,
                       const std::vector<TensorT<S>>& parents,
                       std::function<void(Node<S>&)> backward) {
  if (numel(shape) != value.size())
    throw std::invalid_argument(std::string(name) + ": output size mismatch");
  for (S v : value)
    if (!std::isfinite(static_cast<double>(v)))
      throw std::runtime_error(std::string("op '") + name + "' produced a non-finite value");
  auto n = std::make_shared<Node<S>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->seq = next_seq();
  n->op = name;
  bool rg = false;
  if (grad_enabled()) {
    for (const auto& p : parents) rg = rg || p.requires_grad();
  }
  n->requires_grad = rg;
  if (rg) {
    for (const auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward = std::move(backward);
  }
  return TensorT<S>(std::move(n));
}

template <class S>
TensorT<S> make_op(const char* name, Shape shape, std::vector<S> value,
                   std::initializer_list<TensorT<S>> parents,
                   std::function<void(Node<S>&)> backward) {
  return make_op_vec<S>(name, std::move(shape), std::move(value),
                        std::vector<TensorT<S>>(parents), std::move(backward));
}

template <class S>
inline void accum(Node<S>* p, const S* g, size_t n) {
  p->ensure_grad();
  for (size_t i = 0; i < n; ++i) p->grad[i] += g[i];
}

namespace detail {
template <class S>
void require_same_shape(const char* op, const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}
}  // namespace detail

// ---- matmul --------------------------------------------------------------

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " * " +
                                shape_str(b.shape()));
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<S> out(m * n);
  kernels::par::matmul(a.values().data(), b.values().data(), out.data(), m, k, n);
  Node<S>* pa = a.node();
  Node<S>* pb = b.node();
  return make_op<S>("matmul", {a.dim(0), b.dim(1)}, std::move(out), {a, b},
                    [pa, pb, m, k, n](Node<S>& o) {
                      if (pa->requires_grad) {
                        pa->ensure_grad();
                        kernels::par::matmul_nt_acc(o.grad.data(), pb->value.data(),
                                                    pa->grad.data(), m, n, k);
                      }
                      if (pb->requires_grad) {
                        pb->ensure_grad();
                        kernels::par::matmul_tn_acc(pa->value.data(), o.grad.data(),
                                                    pb->grad.data(), m, k, n);
                      }
                    });
}

// ---- elementwise binary ----------------------------------------------------

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  detail::require_same_shape("add", a, b);
  std::vector<S> out(a.size());
  kernels::par::zip(a.values().data(), b.values().data(), out.data(), a.size(),
                    [](S x, S y) { return x + y; });
  Node<S>* pa = a.node();
  Node<S>* pb = b.node();
  return make_op<S>("add", a.shape(), std::move(out), {a, b}, [pa, pb](Node<S>& o) {
    if (pa->requires_grad) accum(pa, o.grad.data(), o.grad.size());
    if (pb->requires_grad) accum(pb, o.grad.data(), o.grad.size());
  });
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  detail::require_same_shape("sub", a, b);
  std::vector<S> out(a.size());
  kernels::par::zip(a.values().data(), b.values().data(), out.data(), a.size(),
                    [](S x, S y) { return x - y; });
  Node<S>* pa = a.node();
  Node<S>* pb = b.node();
  return make_op<S>("sub", a.shape(), std::move(out), {a, b}, [pa, pb](Node<S>& o) {
    if (pa->requires_grad) accum(pa, o.grad.data(), o.grad.size());
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] -= o.grad[i];
    }
  });
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  detail::require_same_shape("mul", a, b);
  std::vector<S> out(a.size());
  kernels::par::zip(a.values().data(), b.values().data(), out.data(), a.size(),
                    [](S x, S y) { return x * y; });
  Node<S>* pa = a.node();
  Node<S>* pb = b.node();
  return make_op<S>("mul", a.shape(), std::move(out), {a, b}, [pa, pb](Node<S>& o) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i] * pa->value[i];
    }
  });
}

// y[r,c] = x[r,c] + v[c]; v may be shaped [c] or [1,c].
template <class S>
TensorT<S> add_rowvec(const TensorT<S>& x, const TensorT<S>& v) {
  if (x.rank() != 2) throw std::invalid_argument("add_rowvec: x must be rank 2");
  const size_t r = x.dim(0), c = x.dim(1);
  if (v.size() != c)
    throw std::invalid_argument("add_rowvec: vector length " + std::to_string(v.size()) +
                                " vs cols " + std::to_string(c));
  std::vector<S> out(x.size());
  const S* xv = x.values().data();
  const S* vv = v.values().data();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + vv[j];
  Node<S>* px = x.node();
  Node<S>* pv = v.node();
  return make_op<S>("add_rowvec", x.shape(), std::move(out), {x, v}, [px, pv, r, c](Node<S>& o) {
    if (px->requires_grad) accum(px, o.grad.data(), o.grad.size());
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) pv->grad[j] += o.grad[i * c + j];
    }
  });
}

// ---- scalar-parameterized -------------------------------------------------

template <class S>
TensorT<S> scale(const TensorT<S>& x, S s) {
  std::vector<S> out(x.size());
  kernels::par::map(x.values().data(), out.data(), x.size(), [s](S v) { return s * v; });
  Node<S>* px = x.node();
  return make_op<S>("scale", x.shape(), std::move(out), {x}, [px, s](Node<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += s * o.grad[i];
  });
}

template <class S>
TensorT<S> add_scalar(const TensorT<S>& x, S s) {
  std::vector<S> out(x.size());
  kernels::par::map(x.values().data(), out.data(), x.size(), [s](S v) { return v + s; });
  Node<S>* px = x.node();
  return make_op<S>("add_scalar", x.shape(), std::move(out), {x}, [px](Node<S>& o) {
    if (px->requires_grad) accum(px, o.grad.data(), o.grad.size());
  });
}

// ---- elementwise unary ------------------------------------------------------

namespace detail {
template <class S, class F, class DF>
TensorT<S> unary(const char* name, const TensorT<S>& x, F f, DF df) {
  std::vector<S> out(x.size());
  kernels::par::map(x.values().data(), out.data(), x.size(), f);
  Node<S>* px = x.node();
  return make_op<S>(name, x.shape(), std::move(out), {x}, [px, df](Node<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i)
      px->grad[i] += o.grad[i] * df(px->value[i], o.value[i]);
  });
}
}  // namespace detail

// tanh approximation of GELU; the finite-difference checks test exactly
// this function.
template <class S>
inline S gelu_scalar(S x) {
  const S c = static_cast<S>(std::sqrt(2.0 / std::numbers::pi));
  const S u = c * (x + S(0.044715) * x * x * x);
  return S(0.5) * x * (S(1) + std::tanh(u));
}

template <class S>
TensorT<S> gelu(const TensorT<S>& x) {
  return detail::unary<S>(
      "gelu", x, [](S v) { return gelu_scalar(v); },
      [](S v, S) {
        const S c = static_cast<S>(std::sqrt(2.0 / std::numbers::pi));
        const S u = c * (v + S(0.044715) * v * v * v);
        const S t = std::tanh(u);
        const S du = c * (S(1) + S(3) * S(0.044715) * v * v);
        return S(0.5) * (S(1) + t) + S(0.5) * v * (S(1) - t * t) * du;
      });
}

template <class S>
TensorT<S> relu(const TensorT<S>& x) {
  return detail::unary<S>(
      "relu", x, [](S v) { return v > S(0) ? v : S(0); },
      [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <class S>
TensorT<S> sigmoid(const TensorT<S>& x) {
  return detail::unary<S>(
      "sigmoid", x,
      [](S v) { return v >= S(0) ? S(1) / (S(1) + std::exp(-v)) : std::exp(v) / (S(1) + std::exp(v)); },
      [](S, S y) { return y * (S(1) - y); });
}

template <class S>
TensorT<S> exp_op(const TensorT<S>& x) {
  return detail::unary<S>(
      "exp", x, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}

template <class S>
TensorT<S> log_op(const TensorT<S>& x) {
  for (S v : x.values())
    if (!(v > S(0))) throw std::domain_error("log of non-positive value");
  return detail::unary<S>(
      "log", x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}

// ---- reductions -------------------------------------------------------------

template <class S>
TensorT<S> sum(const TensorT<S>& x) {
  S acc = S(0);
  for (S v : x.values()) acc += v;
  Node<S>* px = x.node();
  return make_op<S>("sum", {1}, {acc}, {x}, [px](Node<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (auto& g : px->grad) g += o.grad[0];
  });
}

template <class S>
TensorT<S> mean(const TensorT<S>& x) {
  S acc = S(0);
  for (S v : x.values()) acc += v;
  const S inv = S(1) / static_cast<S>(x.size());
  Node<S>* px = x.node();
  return make_op<S>("mean", {1}, {acc * inv}, {x}, [px, inv](Node<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (auto& g : px->grad) g += o.grad[0] * inv;
  });
}

// axis 0 -> [1,c]; axis 1 -> [r,1]
template <class S>
TensorT<S> sum_axis(const TensorT<S>& x, int axis) {
  if (x.rank() != 2 || (axis != 0 && axis != 1))
    throw std::invalid_argument("sum_axis: rank-2 tensor and axis 0/1 required");
  const size_t r = x.dim(0), c = x.dim(1);
  const S* xv = x.values().data();
  std::vector<S> out(axis == 0 ? c : r, S(0));
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += xv[i * c + j];
  Node<S>* px = x.node();
  Shape oshape = axis == 0 ? Shape{1, static_cast<int>(c)} : Shape{static_cast<int>(r), 1};
  return make_op<S>("sum_axis", std::move(oshape), std::move(out), {x},
                    [px, r, c, axis](Node<S>& o) {
                      if (!px->requires_grad) return;
                      px->ensure_grad();
                      for (size_t i = 0; i < r; ++i)
                        for (size_t j = 0; j < c; ++j)
                          px->grad[i * c + j] += o.grad[axis == 0 ? j : i];
                    });
}

template <class S>
TensorT<S> mean_axis(const TensorT<S>& x, int axis) {
  const S inv = S(1) / static_cast<S>(axis == 0 ? x.dim(0) : x.dim(1));
  return scale(sum_axis(x, axis), inv);
}

// ---- layout ops -------------------------------------------------------------

template <class S>
TensorT<S> reshape(const TensorT<S>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw std::invalid_argument("reshape: element count mismatch " + shape_str(x.shape()) +
                                " -> " + shape_str(shape));
  Node<S>* px = x.node();
  return make_op<S>("reshape", std::move(shape), x.values(), {x}, [px](Node<S>& o) {
    if (px->requires_grad) accum(px, o.grad.data(), o.grad.size());
  });
}

template <class S>
TensorT<S> transpose(const TensorT<S>& x) {
  if (x.rank() != 2) throw std::invalid_argument("transpose: rank-2 tensor required");
  const size_t r = x.dim(0), c = x.dim(1);
  std::vector<S> out(x.size());
  const S* xv = x.values().data();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  Node<S>* px = x.node();
  return make_op<S>("transpose", {x.dim(1), x.dim(0)}, std::move(out), {x},
                    [px, r, c](Node<S>& o) {
                      if (!px->requires_grad) return;
                      px->ensure_grad();
                      for (size_t i = 0; i < r; ++i)
                        for (size_t j = 0; j < c; ++j) px->grad[i * c + j] += o.grad[j * r + i];
                    });
}

template <class S>
TensorT<S> concat(const std::vector<TensorT<S>>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis 0/1 required");
  const size_t other = axis == 0 ? parts[0].dim(1) : parts[0].dim(0);
  size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2) throw std::invalid_argument("concat: rank-2 tensors required");
    const size_t o = axis == 0 ? p.dim(1) : p.dim(0);
    if (o != other) throw std::invalid_argument("concat: mismatched extents");
    total += static_cast<size_t>(axis == 0 ? p.dim(0) : p.dim(1));
  }
  Shape oshape = axis == 0
                     ? Shape{static_cast<int>(total), static_cast<int>(other)}
                     : Shape{static_cast<int>(other), static_cast<int>(total)};
  std::vector<S> out(numel(oshape));
  const size_t oc = static_cast<size_t>(oshape[1]);
  std::vector<Node<S>*> pnodes;
  std::vector<size_t> offsets;
  size_t off = 0;
  for (const auto& p : parts) {
    const size_t pr = p.dim(0), pc = p.dim(1);
    const S* pv = p.values().data();
    offsets.push_back(off);
    pnodes.push_back(p.node());
    if (axis == 0) {
      std::copy(pv, pv + pr * pc, out.data() + off * oc);
      off += pr;
    } else {
      for (size_t i = 0; i < pr; ++i)
        std::copy(pv + i * pc, pv + (i + 1) * pc, out.data() + i * oc + off);
      off += pc;
    }
  }
  return make_op_vec<S>("concat", oshape, std::move(out), parts,
                        [pnodes, offsets, axis, oc](Node<S>& on) {
                          for (size_t t = 0; t < pnodes.size(); ++t) {
                            Node<S>* p = pnodes[t];
                            if (!p->requires_grad) continue;
                            p->ensure_grad();
                            const size_t pr = p->shape[0], pc = p->shape[1];
                            const size_t off = offsets[t];
                            if (axis == 0) {
                              for (size_t i = 0; i < pr * pc; ++i)
                                p->grad[i] += on.grad[off * oc + i];
                            } else {
                              for (size_t i = 0; i < pr; ++i)
                                for (size_t j = 0; j < pc; ++j)
                                  p->grad[i * pc + j] += on.grad[i * oc + off + j];
                            }
                          }
                        });
}

template <class S>
TensorT<S> slice(const TensorT<S>& x, int axis, int begin, int end) {
  if (x.rank() != 2 || (axis != 0 && axis != 1))
    throw std::invalid_argument("slice: rank-2 tensor and axis 0/1 required");
  const int extent = x.dim(axis);
  if (begin < 0 || end > extent || begin >= end)
    throw std::out_of_range("slice: bad range [" + std::to_string(begin) + "," +
                            std::to_string(end) + ") for extent " + std::to_string(extent));
  const size_t r = x.dim(0), c = x.dim(1);
  const size_t nr = axis == 0 ? static_cast<size_t>(end - begin) : r;
  const size_t ncol = axis == 1 ? static_cast<size_t>(end - begin) : c;
  std::vector<S> out(nr * ncol);
  const S* xv = x.values().data();
  for (size_t i = 0; i < nr; ++i)
    for (size_t j = 0; j < ncol; ++j) {
      const size_t si = axis == 0 ? i + begin : i;
      const size_t sj = axis == 1 ? j + begin : j;
      out[i * ncol + j] = xv[si * c + sj];
    }
  Node<S>* px = x.node();
  return make_op<S>("slice", {static_cast<int>(nr), static_cast<int>(ncol)}, std::move(out), {x},
                    [px, axis, begin, nr, ncol, c](Node<S>& o) {
                      if (!px->requires_grad) return;
                      px->ensure_grad();
                      for (size_t i = 0; i < nr; ++i)
                        for (size_t j = 0; j < ncol; ++j) {
                          const size_t si = axis == 0 ? i + begin : i;
                          const size_t sj = axis == 1 ? j + begin : j;
                          px->grad[si * c + sj] += o.grad[i * ncol + j];
                        }
                    });
}

// ---- softmax / layernorm ------------------------------------------------------

// softmax along `axis`. Rank-1 tensors use axis 0. Rank-2: axis 1 row-wise
// (native), axis 0 column-wise (composed through transpose).
template <class S>
TensorT<S> softmax(const TensorT<S>& x, int axis = -1) {
  if (x.rank() == 1 || (x.rank() == 2 && (axis == 1 || axis == -1))) {
    const size_t rows = x.rank() == 1 ? 1 : x.dim(0);
    const size_t cols = x.rank() == 1 ? x.size() : x.dim(1);
    std::vector<S> out(x.size());
    kernels::par::softmax_rows(x.values().data(), out.data(), rows, cols);
    Node<S>* px = x.node();
    return make_op<S>("softmax", x.shape(), std::move(out), {x}, [px, rows, cols](Node<S>& o) {
      if (!px->requires_grad) return;
      px->ensure_grad();
      for (size_t r = 0; r < rows; ++r) {
        const S* y = o.value.data() + r * cols;
        const S* g = o.grad.data() + r * cols;
        S dot = S(0);
        for (size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
        for (size_t j = 0; j < cols; ++j) px->grad[r * cols + j] += y[j] * (g[j] - dot);
      }
    });
  }
  if (x.rank() == 2 && axis == 0) return transpose(softmax(transpose(x), 1));
  throw std::invalid_argument("softmax: unsupported rank/axis");
}

// Per-row standardization then affine; rank-1 treated as a single row.
template <class S>
TensorT<S> layernorm(const TensorT<S>& x, const TensorT<S>& gain, const TensorT<S>& bias,
                     S eps = S(1e-5)) {
  const size_t rows = x.rank() == 2 ? x.dim(0) : 1;
  const size_t cols = x.rank() == 2 ? x.dim(1) : x.size();
  if (gain.size() != cols || bias.size() != cols)
    throw std::invalid_argument("layernorm: gain/bias must match last-axis extent");
  std::vector<S> out(x.size());
  const S* xv = x.values().data();
  const S* gv = gain.values().data();
  const S* bv = bias.values().data();
  for (size_t r = 0; r < rows; ++r) {
    const S* row = xv + r * cols;
    S mu = S(0);
    for (size_t j = 0; j < cols; ++j) mu += row[j];
    mu /= static_cast<S>(cols);
    S var = S(0);
    for (size_t j = 0; j < cols; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<S>(cols);
    const S inv = S(1) / std::sqrt(var + eps);
    for (size_t j = 0; j < cols; ++j)
      out[r * cols + j] = gv[j] * (row[j] - mu) * inv + bv[j];
  }
  Node<S>* px = x.node();
  Node<S>* pg = gain.node();
  Node<S>* pb = bias.node();
  return make_op<S>(
      "layernorm", x.shape(), std::move(out), {x, gain, bias},
      [px, pg, pb, rows, cols, eps](Node<S>& o) {
        const S* xv = px->value.data();
        const S* gv = pg->value.data();
        if (px->requires_grad) px->ensure_grad();
        if (pg->requires_grad) pg->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        std::vector<S> xhat(cols);
        for (size_t r = 0; r < rows; ++r) {
          const S* row = xv + r * cols;
          const S* g = o.grad.data() + r * cols;
          S mu = S(0);
          for (size_t j = 0; j < cols; ++j) mu += row[j];
          mu /= static_cast<S>(cols);
          S var = S(0);
          for (size_t j = 0; j < cols; ++j) var += (row[j] - mu) * (row[j] - mu);
          var /= static_cast<S>(cols);
          const S inv = S(1) / std::sqrt(var + eps);
          for (size_t j = 0; j < cols; ++j) xhat[j] = (row[j] - mu) * inv;
          if (pg->requires_grad)
            for (size_t j = 0; j < cols; ++j) pg->grad[j] += g[j] * xhat[j];
          if (pb->requires_grad)
            for (size_t j = 0; j < cols; ++j) pb->grad[j] += g[j];
          if (px->requires_grad) {
            // dL/dx via the standard layernorm backward
            S sum_dxhat = S(0), sum_dxhat_xhat = S(0);
            for (size_t j = 0; j < cols; ++j) {
              const S dxhat = g[j] * gv[j];
              sum_dxhat += dxhat;
              sum_dxhat_xhat += dxhat * xhat[j];
            }
            const S n = static_cast<S>(cols);
            for (size_t j = 0; j < cols; ++j) {
              const S dxhat = g[j] * gv[j];
              px->grad[r * cols + j] +=
                  inv * (dxhat - sum_dxhat / n - xhat[j] * sum_dxhat_xhat / n);
            }
          }
        }
      });
}

// ---- lookup -------------------------------------------------------------------

template <class S>
TensorT<S> embedding_lookup(const TensorT<S>& table, const std::vector<int>& indices) {
  if (table.rank() != 2) throw std::invalid_argument("embedding_lookup: table must be rank 2");
  const size_t v = table.dim(0), d = table.dim(1);
  for (int idx : indices)
    if (idx < 0 || static_cast<size_t>(idx) >= v)
      throw std::out_of_range("embedding_lookup: index " + std::to_string(idx) +
                              " out of range [0," + std::to_string(v) + ")");
  std::vector<S> out(indices.size() * d);
  const S* tv = table.values().data();
  for (size_t i = 0; i < indices.size(); ++i)
    std::copy(tv + indices[i] * d, tv + (indices[i] + 1) * d, out.data() + i * d);
  Node<S>* pt = table.node();
  return make_op<S>("embedding_lookup",
                    {static_cast<int>(indices.size()), static_cast<int>(d)}, std::move(out),
                    {table}, [pt, indices, d](Node<S>& o) {
                      if (!pt->requires_grad) return;
                      pt->ensure_grad();
                      for (size_t i = 0; i < indices.size(); ++i)
                        for (size_t j = 0; j < d; ++j)
                          pt->grad[indices[i] * d + j] += o.grad[i * d + j];
                    });
}

// ---- resizes (channel-planar rank-3 [C,H,W]) -----------------------------------

template <class S>
TensorT<S> bilinear_resize(const TensorT<S>& x, int oh, int ow) {
  if (x.rank() != 3) throw std::invalid_argument("bilinear_resize: rank-3 [C,H,W] required");
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("bilinear_resize: bad target size");
  const size_t ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<S> out(ch * oh * ow);
  kernels::par::bilinear_resize(x.values().data(), out.data(), ch, h, w, oh, ow);
  Node<S>* px = x.node();
  return make_op<S>(
      "bilinear_resize", {x.dim(0), oh, ow}, std::move(out), {x},
      [px, ch, h, w, oh, ow](Node<S>& o) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (size_t c = 0; c < ch; ++c) {
          S* gp = px->grad.data() + c * h * w;
          const S* go = o.grad.data() + c * static_cast<size_t>(oh) * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const auto ty = kernels::bilinear_tap(oy, h, oh);
            for (int ox = 0; ox < ow; ++ox) {
              const auto tx = kernels::bilinear_tap(ox, w, ow);
              const S g = go[oy * ow + ox];
              gp[ty.i0 * w + tx.i0] += g * static_cast<S>((1 - ty.w1) * (1 - tx.w1));
              gp[ty.i0 * w + tx.i1] += g * static_cast<S>((1 - ty.w1) * tx.w1);
              gp[ty.i1 * w + tx.i0] += g * static_cast<S>(ty.w1 * (1 - tx.w1));
              gp[ty.i1 * w + tx.i1] += g * static_cast<S>(ty.w1 * tx.w1);
            }
          }
        }
      });
}

template <class S>
TensorT<S> nearest_resize(const TensorT<S>& x, int oh, int ow) {
  if (x.rank() != 3) throw std::invalid_argument("nearest_resize: rank-3 [C,H,W] required");
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("nearest_resize: bad target size");
  const size_t ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<S> out(ch * oh * ow);
  const S* xv = x.values().data();
  for (size_t c = 0; c < ch; ++c)
    for (int oy = 0; oy < oh; ++oy) {
      const size_t sy = kernels::nearest_tap(oy, h, oh);
      for (int ox = 0; ox < ow; ++ox) {
        const size_t sx = kernels::nearest_tap(ox, w, ow);
        out[c * oh * ow + oy * ow + ox] = xv[c * h * w + sy * w + sx];
      }
    }
  Node<S>* px = x.node();
  return make_op<S>("nearest_resize", {x.dim(0), oh, ow}, std::move(out), {x},
                    [px, ch, h, w, oh, ow](Node<S>& o) {
                      if (!px->requires_grad) return;
                      px->ensure_grad();
                      for (size_t c = 0; c < ch; ++c)
                        for (int oy = 0; oy < oh; ++oy) {
                          const size_t sy = kernels::nearest_tap(oy, h, oh);
                          for (int ox = 0; ox < ow; ++ox) {
                            const size_t sx = kernels::nearest_tap(ox, w, ow);
                            px->grad[c * h * w + sy * w + sx] +=
                                o.grad[c * static_cast<size_t>(oh) * ow + oy * ow + ox];
                          }
                        }
                    });
}

// ---- patch layout ---------------------------------------------------------------
// patchify: [C,H,W] -> [P, p*p*C], tokens in row-major grid order, features
// channel-major then (dy,dx). unpatchify is the exact inverse.

inline size_t patch_src_index(size_t c, size_t h, size_t w, size_t p, size_t t, size_t f,
                              size_t gw) {
  const size_t gy = t / gw, gx = t % gw;
  const size_t cc = f / (p * p);
  const size_t dy = (f / p) % p, dx = f % p;
  (void)c;
  return cc * h * w + (gy * p + dy) * w + (gx * p + dx);
}

template <class S>
TensorT<S> patchify(const TensorT<S>& x, int patch) {
  if (x.rank() != 3) throw std::invalid_argument("patchify: rank-3 [C,H,W] required");
  const size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), p = patch;
  if (patch <= 0 || h % p != 0 || w % p != 0)
    throw std::invalid_argument("patchify: image extent not divisible by patch size");
  const size_t gw = w / p, tokens = (h / p) * gw, feat = p * p * c;
  std::vector<S> out(tokens * feat);
  const S* xv = x.values().data();
  for (size_t t = 0; t < tokens; ++t)
    for (size_t f = 0; f < feat; ++f) out[t * feat + f] = xv[patch_src_index(c, h, w, p, t, f, gw)];
  Node<S>* px = x.node();
  return make_op<S>("patchify", {static_cast<int>(tokens), static_cast<int>(feat)},
                    std::move(out), {x}, [px, c, h, w, p, gw, tokens, feat](Node<S>& o) {
                      if (!px->requires_grad) return;
                      px->ensure_grad();
                      for (size_t t = 0; t < tokens; ++t)
                        for (size_t f = 0; f < feat; ++f)
                          px->grad[patch_src_index(c, h, w, p, t, f, gw)] += o.grad[t * feat + f];
                    });
}

template <class S>
TensorT<S> unpatchify(const TensorT<S>& tokens, int channels, int height, int width, int patch) {
  if (tokens.rank() != 2) throw std::invalid_argument("unpatchify: rank-2 tokens required");
  const size_t c = channels, h = height, w = width, p = patch;
  const size_t gw = w / p, ntok = (h / p) * gw, feat = p * p * c;
  if (static_cast<size_t>(tokens.dim(0)) != ntok || static_cast<size_t>(tokens.dim(1)) != feat)
    throw std::invalid_argument("unpatchify: token grid does not match target extent");
  std::vector<S> out(c * h * w);
  const S* tv = tokens.values().data();
  for (size_t t = 0; t < ntok; ++t)
    for (size_t f = 0; f < feat; ++f) out[patch_src_index(c, h, w, p, t, f, gw)] = tv[t * feat + f];
  Node<S>* pt = tokens.node();
  return make_op<S>("unpatchify", {channels, height, width}, std::move(out), {tokens},
                    [pt, c, h, w, p, gw, ntok, feat](Node<S>& o) {
                      if (!pt->requires_grad) return;
                      pt->ensure_grad();
                      for (size_t t = 0; t < ntok; ++t)
                        for (size_t f = 0; f < feat; ++f)
                          pt->grad[t * feat + f] += o.grad[patch_src_index(c, h, w, p, t, f, gw)];
                    });
}

// ---- row normalization ------------------------------------------------------------

template <class S>
TensorT<S> l2_normalize_rows(const TensorT<S>& x, S eps = S(1e-12)) {
  if (x.rank() != 2) throw std::invalid_argument("l2_normalize_rows: rank-2 tensor required");
  const size_t r = x.dim(0), c = x.dim(1);
  std::vector<S> out(x.size());
  std::vector<S> norms(r);
  const S* xv = x.values().data();
  for (size_t i = 0; i < r; ++i) {
    S s = S(0);
    for (size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
    S n = std::sqrt(s);
    if (n < eps) n = eps;
    norms[i] = n;
    for (size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] / n;
  }
  Node<S>* px = x.node();
  return make_op<S>("l2_normalize_rows", x.shape(), std::move(out), {x},
                    [px, r, c, norms](Node<S>& o) {
                      if (!px->requires_grad) return;
                      px->ensure_grad();
                      for (size_t i = 0; i < r; ++i) {
                        const S* y = o.value.data() + i * c;
                        const S* g = o.grad.data() + i * c;
                        S dot = S(0);
                        for (size_t j = 0; j < c; ++j) dot += g[j] * y[j];
                        for (size_t j = 0; j < c; ++j)
                          px->grad[i * c + j] += (g[j] - y[j] * dot) / norms[i];
                      }
                    });
}

// softmax across the class axis of [C,H,W] logits, per pixel.
template <class S>
TensorT<S> softmax_channels(const TensorT<S>& x) {
  if (x.rank() != 3) throw std::invalid_argument("softmax_channels: rank-3 [C,H,W] required");
  const size_t c = x.dim(0), hw = static_cast<size_t>(x.dim(1)) * x.dim(2);
  std::vector<S> out(x.size());
  const S* xv = x.values().data();
  for (size_t p = 0; p < hw; ++p) {
    S mx = xv[p];
    for (size_t k = 1; k < c; ++k) mx = std::max(mx, xv[k * hw + p]);
    S sum = S(0);
    for (size_t k = 0; k < c; ++k) {
      const S e = std::exp(xv[k * hw + p] - mx);
      out[k * hw + p] = e;
      sum += e;
    }
    const S inv = S(1) / sum;
    for (size_t k = 0; k < c; ++k) out[k * hw + p] *= inv;
  }
  Node<S>* px = x.node();
  return make_op<S>("softmax_channels", x.shape(), std::move(out), {x},
                    [px, c, hw](Node<S>& o) {
                      if (!px->requires_grad) return;
                      px->ensure_grad();
                      for (size_t p = 0; p < hw; ++p) {
                        S dot = S(0);
                        for (size_t k = 0; k < c; ++k)
                          dot += o.grad[k * hw + p] * o.value[k * hw + p];
                        for (size_t k = 0; k < c; ++k)
                          px->grad[k * hw + p] +=
                              o.value[k * hw + p] * (o.grad[k * hw + p] - dot);
                      }
                    });
}

}  // namespace vocseg::nc
