#pragma once

// Differentiable tensor operations. Each op validates shapes, computes its
// result eagerly, and — when a Tape is active and an input tracks gradients —
// records a closure that scatters d(out) into the inputs' grad buffers.
//
// Elementwise binary ops broadcast: every axis must either match or be 1.
// The backward pass accumulates through the same index map, which performs
// the reduction over broadcast axes for free.

#include <algorithm>
#include <array>
#include <cmath>

#include "vologan/tensor.hpp"

namespace vologan {

namespace detail {

struct BcastIndex {
  Shape out;
  std::array<std::int64_t, 4> stride_a{}, stride_b{};
};

inline int bcast_axis(int a, int b, const char* op) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  fail(std::string(op) + ": incompatible shapes");
}

inline BcastIndex broadcast(const Shape& a, const Shape& b, const char* op) {
  BcastIndex m;
  m.out = Shape{bcast_axis(a.n, b.n, op), bcast_axis(a.c, b.c, op), bcast_axis(a.h, b.h, op),
                bcast_axis(a.w, b.w, op)};
  auto strides = [](const Shape& s, const Shape& out) {
    std::array<std::int64_t, 4> st{};
    std::int64_t acc = 1;
    const int dims_s[4] = {s.n, s.c, s.h, s.w};
    const int dims_o[4] = {out.n, out.c, out.h, out.w};
    for (int i = 3; i >= 0; --i) {
      st[i] = (dims_s[i] == 1 && dims_o[i] != 1) ? 0 : acc;
      acc *= dims_s[i];
    }
    return st;
  };
  m.stride_a = strides(a, m.out);
  m.stride_b = strides(b, m.out);
  return m;
}

// Walks the output index space of a broadcast op, handing the visitor the
// flat output index plus the mapped flat indices into both operands.
template <class Visit>
void for_each_bcast(const BcastIndex& m, Visit&& visit) {
  std::int64_t o = 0;
  for (int n = 0; n < m.out.n; ++n)
    for (int c = 0; c < m.out.c; ++c)
      for (int h = 0; h < m.out.h; ++h) {
        std::int64_t ia = n * m.stride_a[0] + c * m.stride_a[1] + h * m.stride_a[2];
        std::int64_t ib = n * m.stride_b[0] + c * m.stride_b[1] + h * m.stride_b[2];
        for (int w = 0; w < m.out.w; ++w, ++o)
          visit(o, ia + w * m.stride_a[3], ib + w * m.stride_b[3]);
      }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops
// ---------------------------------------------------------------------------

template <typename T, class Fwd, class DA, class DB>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd, DA da,
                    DB db) {
  const auto m = detail::broadcast(a.shape(), b.shape(), name);
  Tensor<T> out(m.out);
  {
    const T* pa = a.values().data();
    const T* pb = b.values().data();
    T* po = out.values().data();
    detail::for_each_bcast(m, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
      po[o] = fwd(pa[ia], pb[ib]);
    });
  }
  if (track<T>({&a, &b})) {
    out.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, oc = out;
    Tape<T>::current()->record([ac, bc, oc, m, da, db]() mutable {
      if (!oc.has_grad()) return;
      const T* g = oc.grad().data();
      const T* pa = ac.values().data();
      const T* pb = bc.values().data();
      T* ga = ac.requires_grad() ? ac.ensure_grad().data() : nullptr;
      T* gb = bc.requires_grad() ? bc.ensure_grad().data() : nullptr;
      detail::for_each_bcast(m, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
        if (ga) ga[ia] += da(g[o], pa[ia], pb[ib]);
        if (gb) gb[ib] += db(g[o], pa[ia], pb[ib]);
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "add", [](T x, T y) { return x + y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
      [](T g, T x, T) { return g * x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "div", [](T x, T y) { return x / y; }, [](T g, T, T y) { return g / y; },
      [](T g, T x, T y) { return -g * x / (y * y); });
}

// ---------------------------------------------------------------------------
// Elementwise unary ops
// ---------------------------------------------------------------------------

template <typename T, class Fwd, class Grad>
Tensor<T> unary_op(const Tensor<T>& x, Fwd fwd, Grad grad_fn) {
  Tensor<T> out(x.shape());
  const T* px = x.values().data();
  T* po = out.values().data();
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc, grad_fn]() mutable {
      if (!oc.has_grad()) return;
      const T* g = oc.grad().data();
      const T* px = xc.values().data();
      const T* po = oc.values().data();
      T* gx = xc.ensure_grad().data();
      const std::int64_t n = xc.size();
      for (std::int64_t i = 0; i < n; ++i) gx[i] += grad_fn(g[i], px[i], po[i]);
    });
  }
  return out;
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& x, T s) {
  return unary_op(
      x, [s](T v) { return v * s; }, [s](T g, T, T) { return g * s; });
}

template <typename T>
Tensor<T> scalar_add(const Tensor<T>& x, T s) {
  return unary_op(
      x, [s](T v) { return v + s; }, [](T g, T, T) { return g; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return scalar_mul(x, T(-1));
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return v * v; }, [](T g, T v, T) { return g * T(2) * v; });
}

template <typename T>
Tensor<T> abs_t(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return v < T(0) ? -v : v; },
      [](T g, T v, T) { return v > T(0) ? g : (v < T(0) ? -g : T(0)); });
}

// Derivative clamped near zero so sqrt of an exactly-zero variance does not
// blow up the backward pass.
template <typename T>
Tensor<T> sqrt_t(const Tensor<T>& x) {
  for (T v : x.values())
    if (v < T(0)) fail("sqrt of negative value");
  return unary_op(
      x, [](T v) { return std::sqrt(v); },
      [](T g, T, T o) { return g / (T(2) * std::max(o, T(1e-12))); });
}

template <typename T>
Tensor<T> pow_scalar(const Tensor<T>& x, T e) {
  if (e == T(1)) return scalar_mul(x, T(1));
  return unary_op(
      x, [e](T v) { return std::pow(v, e); },
      [e](T g, T v, T) { return g * e * std::pow(v, e - T(1)); });
}

// Subgradient convention: 1 inside [lo, hi] (bounds included), 0 outside.
template <typename T>
Tensor<T> clip(const Tensor<T>& x, T lo, T hi) {
  return unary_op(
      x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](T g, T v, T) { return (v >= lo && v <= hi) ? g : T(0); });
}

template <typename T>
Tensor<T> leaky_relu_raw(const Tensor<T>& x, T slope) {
  return unary_op(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T g, T v, T) { return v > T(0) ? g : slope * g; });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.values()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc]() mutable {
      if (!oc.has_grad()) return;
      const T g = oc.grad()[0];
      T* gx = xc.ensure_grad().data();
      const std::int64_t n = xc.size();
      for (std::int64_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  const T scale = T(1) / T(x.size());
  T acc = T(0);
  for (T v : x.values()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc * scale);
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc, scale]() mutable {
      if (!oc.has_grad()) return;
      const T g = oc.grad()[0] * scale;
      T* gx = xc.ensure_grad().data();
      const std::int64_t n = xc.size();
      for (std::int64_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

// Per-(sample, channel) spatial mean; keeps shape (n, c, 1, 1).
template <typename T>
Tensor<T> mean_hw(const Tensor<T>& x) {
  const Shape s = x.shape();
  const std::int64_t hw = std::int64_t(s.h) * s.w;
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  const T* px = x.values().data();
  T* po = out.values().data();
  for (std::int64_t nc = 0; nc < std::int64_t(s.n) * s.c; ++nc) {
    T acc = T(0);
    for (std::int64_t i = 0; i < hw; ++i) acc += px[nc * hw + i];
    po[nc] = acc / T(hw);
  }
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc, hw]() mutable {
      if (!oc.has_grad()) return;
      const T* g = oc.grad().data();
      T* gx = xc.ensure_grad().data();
      const Shape s = xc.shape();
      for (std::int64_t nc = 0; nc < std::int64_t(s.n) * s.c; ++nc) {
        const T gv = g[nc] / T(hw);
        for (std::int64_t i = 0; i < hw; ++i) gx[nc * hw + i] += gv;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& s) {
  if (s.size() != x.size())
    fail("reshape from " + x.shape().str() + " to " + s.str() + " changes element count");
  Tensor<T> out = Tensor<T>::from_values(s, x.values());
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc]() mutable {
      if (!oc.has_grad()) return;
      const T* g = oc.grad().data();
      T* gx = xc.ensure_grad().data();
      const std::int64_t n = xc.size();
      for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose_hw(const Tensor<T>& x) {
  const Shape s = x.shape();
  Tensor<T> out(Shape{s.n, s.c, s.w, s.h});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c, w, h) = x.at(n, c, h, w);
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc]() mutable {
      if (!oc.has_grad()) return;
      const Shape s = xc.shape();
      xc.ensure_grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
              xc.ensure_grad()[xc.index(n, c, h, w)] += oc.grad()[oc.index(n, c, w, h)];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    fail("concat_channels: mismatched shapes " + sa.str() + " vs " + sb.str());
  Tensor<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::int64_t hw = std::int64_t(sa.h) * sa.w;
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.values().data() + std::int64_t(n) * sa.c * hw, std::int64_t(sa.c) * hw,
                out.values().data() + std::int64_t(n) * (sa.c + sb.c) * hw);
    std::copy_n(b.values().data() + std::int64_t(n) * sb.c * hw, std::int64_t(sb.c) * hw,
                out.values().data() + (std::int64_t(n) * (sa.c + sb.c) + sa.c) * hw);
  }
  if (track<T>({&a, &b})) {
    out.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, oc = out;
    Tape<T>::current()->record([ac, bc, oc, hw]() mutable {
      if (!oc.has_grad()) return;
      const Shape sa = ac.shape(), sb = bc.shape();
      for (int n = 0; n < sa.n; ++n) {
        if (ac.requires_grad()) {
          T* ga = ac.ensure_grad().data() + std::int64_t(n) * sa.c * hw;
          const T* g = oc.grad().data() + std::int64_t(n) * (sa.c + sb.c) * hw;
          for (std::int64_t i = 0; i < std::int64_t(sa.c) * hw; ++i) ga[i] += g[i];
        }
        if (bc.requires_grad()) {
          T* gb = bc.ensure_grad().data() + std::int64_t(n) * sb.c * hw;
          const T* g = oc.grad().data() + (std::int64_t(n) * (sa.c + sb.c) + sa.c) * hw;
          for (std::int64_t i = 0; i < std::int64_t(sb.c) * hw; ++i) gb[i] += g[i];
        }
      }
    });
  }
  return out;
}

// Channels [c0, c1).
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int c1) {
  const Shape s = x.shape();
  if (c0 < 0 || c1 <= c0 || c1 > s.c) fail("slice_channels: bad range on shape " + s.str());
  Tensor<T> out(Shape{s.n, c1 - c0, s.h, s.w});
  const std::int64_t hw = std::int64_t(s.h) * s.w;
  for (int n = 0; n < s.n; ++n)
    std::copy_n(x.values().data() + (std::int64_t(n) * s.c + c0) * hw,
                std::int64_t(c1 - c0) * hw,
                out.values().data() + std::int64_t(n) * (c1 - c0) * hw);
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc, c0, c1, hw]() mutable {
      if (!oc.has_grad()) return;
      const Shape s = xc.shape();
      T* gx = xc.ensure_grad().data();
      const T* g = oc.grad().data();
      for (int n = 0; n < s.n; ++n) {
        T* dst = gx + (std::int64_t(n) * s.c + c0) * hw;
        const T* src = g + std::int64_t(n) * (c1 - c0) * hw;
        for (std::int64_t i = 0; i < std::int64_t(c1 - c0) * hw; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small GEMM kernels, row-major, accumulate into C. The inner accumulation
// per output element is sequential, so results do not depend on threading.
// ---------------------------------------------------------------------------

namespace detail {

// C(m,n) += A(m,k) * B(k,n)
template <typename T>
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const T* A, const T* B, T* C) {
  parallel_for(m, [&](std::int64_t i0, std::int64_t i1) {
    for (std::int64_t i = i0; i < i1; ++i) {
      T* __restrict crow = C + i * n;
      for (std::int64_t kk = 0; kk < k; ++kk) {
        const T a = A[i * k + kk];
        if (a == T(0)) continue;
        const T* __restrict brow = B + kk * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
      }
    }
  });
}

// C(m,n) += A(m,k) * B(n,k)^T
template <typename T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* A, const T* B, T* C) {
  parallel_for(m, [&](std::int64_t i0, std::int64_t i1) {
    for (std::int64_t i = i0; i < i1; ++i) {
      const T* __restrict arow = A + i * k;
      T* __restrict crow = C + i * n;
      for (std::int64_t j = 0; j < n; ++j) {
        const T* __restrict brow = B + j * k;
        T acc = T(0);
        for (std::int64_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
        crow[j] += acc;
      }
    }
  });
}

// C(m,n) += A(k,m)^T * B(k,n)
template <typename T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* A, const T* B, T* C) {
  for (std::int64_t kk = 0; kk < k; ++kk) {
    const T* __restrict arow = A + kk * m;
    const T* __restrict brow = B + kk * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const T a = arow[i];
      if (a == T(0)) continue;
      T* __restrict crow = C + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Batched matrix multiply over the last two axes:
// (n, c, p, q) x (n, c, q, r) -> (n, c, p, r)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul_batched(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.c != sb.c || sa.w != sb.h)
    fail("matmul_batched: incompatible shapes " + sa.str() + " vs " + sb.str());
  const std::int64_t batch = std::int64_t(sa.n) * sa.c;
  const std::int64_t p = sa.h, q = sa.w, r = sb.w;
  Tensor<T> out(Shape{sa.n, sa.c, int(p), int(r)});
  for (std::int64_t i = 0; i < batch; ++i)
    detail::gemm_nn(p, r, q, a.values().data() + i * p * q, b.values().data() + i * q * r,
                    out.values().data() + i * p * r);
  if (track<T>({&a, &b})) {
    out.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, oc = out;
    Tape<T>::current()->record([ac, bc, oc, batch, p, q, r]() mutable {
      if (!oc.has_grad()) return;
      const T* g = oc.grad().data();
      for (std::int64_t i = 0; i < batch; ++i) {
        if (ac.requires_grad())
          detail::gemm_nt(p, q, r, g + i * p * r, bc.values().data() + i * q * r,
                          ac.ensure_grad().data() + i * p * q);
        if (bc.requires_grad())
          detail::gemm_tn(q, r, p, ac.values().data() + i * p * q, g + i * p * r,
                          bc.ensure_grad().data() + i * q * r);
      }
    });
  }
  return out;
}

// Softmax over the last axis; each (n, c, h) row of the result sums to 1.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  const Shape s = x.shape();
  const std::int64_t rows = std::int64_t(s.n) * s.c * s.h;
  Tensor<T> out(s);
  const T* px = x.values().data();
  T* po = out.values().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* in = px + r * s.w;
    T* o = po + r * s.w;
    T mx = in[0];
    for (int j = 1; j < s.w; ++j) mx = std::max(mx, in[j]);
    T sum = T(0);
    for (int j = 0; j < s.w; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (int j = 0; j < s.w; ++j) o[j] /= sum;
  }
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc, rows]() mutable {
      if (!oc.has_grad()) return;
      const Shape s = xc.shape();
      const T* g = oc.grad().data();
      const T* y = oc.values().data();
      T* gx = xc.ensure_grad().data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t base = r * s.w;
        T dot = T(0);
        for (int j = 0; j < s.w; ++j) dot += g[base + j] * y[base + j];
        for (int j = 0; j < s.w; ++j) gx[base + j] += y[base + j] * (g[base + j] - dot);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d: cross-correlation (no kernel flip), zero padding, via im2col + GEMM.
// input (n, ci, h, w), weight (co, ci, kh, kw), bias (1, co, 1, 1).
// ---------------------------------------------------------------------------

struct ConvPad {
  int top = 0, bottom = 0, left = 0, right = 0;
};

namespace detail {

template <typename T>
void im2col(const T* in, int ci, int h, int w, int kh, int kw, int stride, const ConvPad& pad,
            int oh, int ow, T* col) {
  const std::int64_t cols = std::int64_t(oh) * ow;
  std::int64_t k = 0;
  for (int c = 0; c < ci; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j, ++k) {
        T* dst = col + k * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * stride - pad.top + i;
          if (y < 0 || y >= h) {
            std::fill_n(dst + std::int64_t(oy) * ow, ow, T(0));
            continue;
          }
          const T* src = in + (std::int64_t(c) * h + y) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int x = ox * stride - pad.left + j;
            dst[std::int64_t(oy) * ow + ox] = (x >= 0 && x < w) ? src[x] : T(0);
          }
        }
      }
}

template <typename T>
void col2im_acc(const T* col, int ci, int h, int w, int kh, int kw, int stride,
                const ConvPad& pad, int oh, int ow, T* in_grad) {
  const std::int64_t cols = std::int64_t(oh) * ow;
  std::int64_t k = 0;
  for (int c = 0; c < ci; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j, ++k) {
        const T* src = col + k * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * stride - pad.top + i;
          if (y < 0 || y >= h) continue;
          T* dst = in_grad + (std::int64_t(c) * h + y) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int x = ox * stride - pad.left + j;
            if (x >= 0 && x < w) dst[x] += src[std::int64_t(oy) * ow + ox];
          }
        }
      }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, const ConvPad& pad = {}) {
  const Shape si = input.shape(), sw = weight.shape();
  if (stride < 1) fail("conv2d: stride must be >= 1");
  if (si.c != sw.c)
    fail("conv2d: input channels " + si.str() + " do not match weight " + sw.str());
  if (bias.shape() != Shape{1, sw.n, 1, 1})
    fail("conv2d: bias shape " + bias.shape().str() + " does not match weight " + sw.str());
  const int ph = si.h + pad.top + pad.bottom;
  const int pw = si.w + pad.left + pad.right;
  if (sw.h > ph || sw.w > pw)
    fail("conv2d: kernel " + sw.str() + " exceeds padded input " + si.str());
  const int oh = (ph - sw.h) / stride + 1;
  const int ow = (pw - sw.w) / stride + 1;
  const int co = sw.n, ci = sw.c, kh = sw.h, kw = sw.w;
  const std::int64_t K = std::int64_t(ci) * kh * kw;
  const std::int64_t L = std::int64_t(oh) * ow;

  Tensor<T> out(Shape{si.n, co, oh, ow});
  parallel_for(si.n, [&](std::int64_t n0, std::int64_t n1) {
    std::vector<T> col(std::size_t(K * L));
    for (std::int64_t n = n0; n < n1; ++n) {
      detail::im2col(input.values().data() + n * si.c * si.h * si.w, ci, si.h, si.w, kh, kw,
                     stride, pad, oh, ow, col.data());
      T* o = out.values().data() + n * co * L;
      for (int c = 0; c < co; ++c) std::fill_n(o + std::int64_t(c) * L, L, bias.values()[c]);
      detail::gemm_nn(co, L, K, weight.values().data(), col.data(), o);
    }
  });

  if (track<T>({&input, &weight, &bias})) {
    out.set_requires_grad(true);
    Tensor<T> in_c = input, w_c = weight, b_c = bias, o_c = out;
    Tape<T>::current()->record([in_c, w_c, b_c, o_c, stride, pad, oh, ow, K, L]() mutable {
      if (!o_c.has_grad()) return;
      const Shape si = in_c.shape(), sw = w_c.shape();
      const int co = sw.n, ci = sw.c, kh = sw.h, kw = sw.w;
      const T* g = o_c.grad().data();

      if (b_c.requires_grad()) {
        T* gb = b_c.ensure_grad().data();
        for (int n = 0; n < si.n; ++n)
          for (int c = 0; c < co; ++c) {
            const T* row = g + (std::int64_t(n) * co + c) * L;
            T acc = T(0);
            for (std::int64_t i = 0; i < L; ++i) acc += row[i];
            gb[c] += acc;
          }
      }
      if (w_c.requires_grad()) {
        T* gw = w_c.ensure_grad().data();
        std::vector<T> col(std::size_t(K * L));
        for (int n = 0; n < si.n; ++n) {
          detail::im2col(in_c.values().data() + std::int64_t(n) * si.c * si.h * si.w, ci, si.h,
                         si.w, kh, kw, stride, pad, oh, ow, col.data());
          detail::gemm_nt(co, K, L, g + std::int64_t(n) * co * L, col.data(), gw);
        }
      }
      if (in_c.requires_grad()) {
        T* gi = in_c.ensure_grad().data();
        parallel_for(si.n, [&](std::int64_t n0, std::int64_t n1) {
          std::vector<T> dcol(std::size_t(K * L));
          for (std::int64_t n = n0; n < n1; ++n) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            detail::gemm_tn(K, L, co, w_c.values().data(), g + n * co * L, dcol.data());
            detail::col2im_acc(dcol.data(), ci, si.h, si.w, kh, kw, stride, pad, oh, ow,
                               gi + n * si.c * si.h * si.w);
          }
        });
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// depth_to_space and inverse. Channel blocks move into spatial positions:
// out[n, co, h*r+i, w*r+j] = in[n, co*r^2 + i*r + j, h, w].
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& x, int r) {
  const Shape s = x.shape();
  if (r < 1 || s.c % (r * r) != 0)
    fail("depth_to_space: channels " + std::to_string(s.c) + " not divisible by r^2, r=" +
         std::to_string(r));
  const int co = s.c / (r * r);
  Tensor<T> out(Shape{s.n, co, s.h * r, s.w * r});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < co; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
              out.at(n, c, h * r + i, w * r + j) = x.at(n, c * r * r + i * r + j, h, w);
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc, r, co]() mutable {
      if (!oc.has_grad()) return;
      const Shape s = xc.shape();
      auto& gx = xc.ensure_grad();
      const auto& g = oc.grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < co; ++c)
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
              for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w)
                  gx[xc.index(n, c * r * r + i * r + j, h, w)] +=
                      g[oc.index(n, c, h * r + i, w * r + j)];
    });
  }
  return out;
}

template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& x, int r) {
  const Shape s = x.shape();
  if (r < 1 || s.h % r != 0 || s.w % r != 0)
    fail("space_to_depth: spatial extent " + s.str() + " not divisible by r=" + std::to_string(r));
  Tensor<T> out(Shape{s.n, s.c * r * r, s.h / r, s.w / r});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          for (int h = 0; h < s.h / r; ++h)
            for (int w = 0; w < s.w / r; ++w)
              out.at(n, c * r * r + i * r + j, h, w) = x.at(n, c, h * r + i, w * r + j);
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc, r]() mutable {
      if (!oc.has_grad()) return;
      const Shape s = xc.shape();
      auto& gx = xc.ensure_grad();
      const auto& g = oc.grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
              for (int h = 0; h < s.h / r; ++h)
                for (int w = 0; w < s.w / r; ++w)
                  gx[xc.index(n, c, h * r + i, w * r + j)] +=
                      g[oc.index(n, c * r * r + i * r + j, h, w)];
    });
  }
  return out;
}

}  // namespace vologan
