#pragma once

// Network building blocks: reflection padding, spectral normalization,
// instance normalization, the activations, both dropout variants, gated
// self-attention, and the composite conv blocks used by the generator and
// discriminator.

#include <limits>

#include "vologan/ops.hpp"
#include "vologan/rng.hpp"

namespace vologan {

// Forward context: training enables dropout and spectral-norm power-iteration
// updates; eval runs are deterministic functions of the parameters.
struct Mode {
  bool training = false;
  Rng* rng = nullptr;

  static Mode eval() { return {}; }
  static Mode train(Rng& rng) { return {true, &rng}; }
};

struct PadSpec {
  int top = 0, bottom = 0, left = 0, right = 0;
};

// ---------------------------------------------------------------------------
// Reflection padding: values mirror across the border element, which is not
// repeated, so no value absent from the input is ever introduced.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reflection_pad(const Tensor<T>& x, const PadSpec& pad) {
  const Shape s = x.shape();
  if (pad.top >= s.h || pad.bottom >= s.h || pad.left >= s.w || pad.right >= s.w)
    fail("reflection_pad: pad exceeds extent of " + s.str());
  if (pad.top < 0 || pad.bottom < 0 || pad.left < 0 || pad.right < 0)
    fail("reflection_pad: negative pad");
  auto reflect = [](int i, int extent) {
    if (i < 0) return -i;
    if (i >= extent) return 2 * extent - 2 - i;
    return i;
  };
  Tensor<T> out(Shape{s.n, s.c, s.h + pad.top + pad.bottom, s.w + pad.left + pad.right});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < out.shape().h; ++h) {
        const int sy = reflect(h - pad.top, s.h);
        for (int w = 0; w < out.shape().w; ++w)
          out.at(n, c, h, w) = x.at(n, c, sy, reflect(w - pad.left, s.w));
      }
  if (track<T>({&x})) {
    out.set_requires_grad(true);
    Tensor<T> xc = x, oc = out;
    Tape<T>::current()->record([xc, oc, pad, reflect]() mutable {
      if (!oc.has_grad()) return;
      const Shape s = xc.shape();
      auto& gx = xc.ensure_grad();
      const auto& g = oc.grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int h = 0; h < oc.shape().h; ++h) {
            const int sy = reflect(h - pad.top, s.h);
            for (int w = 0; w < oc.shape().w; ++w)
              gx[xc.index(n, c, sy, reflect(w - pad.left, s.w))] += g[oc.index(n, c, h, w)];
          }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral normalization. The persistent left singular-vector estimate u is
// a non-trainable parameter; power-iteration updates run outside the tape,
// and the division by sigma is differentiable with u, v held constant.
// ---------------------------------------------------------------------------

template <typename T>
struct SpectralNormState {
  Tensor<T> u;  // shape (co, 1, 1, 1), unit norm
  int n_power_iterations = 1;
};

template <typename T>
SpectralNormState<T> make_spectral_state(int co, Rng& rng) {
  SpectralNormState<T> st;
  st.u = Tensor<T>(Shape{co, 1, 1, 1});
  T norm_sq = T(0);
  for (auto& v : st.u.values()) {
    v = T(rng.normal());
    norm_sq += v * v;
  }
  const T norm = std::sqrt(norm_sq);
  for (auto& v : st.u.values()) v /= norm > T(0) ? norm : T(1);
  return st;
}

namespace detail {

// y = M^T u (rows, cols) then normalized; returns false if the product is ~0.
template <typename T>
bool normalized_matvec(const std::vector<T>& m, std::int64_t rows, std::int64_t cols,
                       const std::vector<T>& x, bool transpose, std::vector<T>& out) {
  out.assign(std::size_t(transpose ? cols : rows), T(0));
  if (transpose) {
    for (std::int64_t r = 0; r < rows; ++r) {
      const T xv = x[std::size_t(r)];
      for (std::int64_t c = 0; c < cols; ++c) out[std::size_t(c)] += m[r * cols + c] * xv;
    }
  } else {
    for (std::int64_t r = 0; r < rows; ++r) {
      T acc = T(0);
      for (std::int64_t c = 0; c < cols; ++c) acc += m[r * cols + c] * x[std::size_t(c)];
      out[std::size_t(r)] = acc;
    }
  }
  T norm_sq = T(0);
  for (T v : out) norm_sq += v * v;
  const T norm = std::sqrt(norm_sq);
  if (norm < T(1e-12)) return false;
  for (auto& v : out) v /= norm;
  return true;
}

}  // namespace detail

// Returns weight / sigma where sigma estimates the top singular value of the
// weight reshaped to (co, ci*kh*kw). In training mode u advances by
// n_power_iterations steps (plus extra_iterations, used by convergence
// tests); frozen mode leaves u untouched so repeated calls are identical.
template <typename T>
Tensor<T> spectral_norm_apply(const Tensor<T>& weight, SpectralNormState<T>& state,
                              bool update_u = true, int extra_iterations = 0) {
  const Shape sw = weight.shape();
  const std::int64_t rows = sw.n;
  const std::int64_t cols = std::int64_t(sw.c) * sw.h * sw.w;
  if (state.u.shape() != Shape{int(rows), 1, 1, 1})
    fail("spectral_norm_apply: u length does not match weight rows");

  std::vector<T> u = state.u.values();
  std::vector<T> v;
  const int iters = update_u ? state.n_power_iterations + extra_iterations : 1;
  bool degenerate = false;
  for (int it = 0; it < iters; ++it) {
    if (!detail::normalized_matvec(weight.values(), rows, cols, u, true, v)) {
      degenerate = true;
      break;
    }
    if (update_u) {
      std::vector<T> u_next;
      if (!detail::normalized_matvec(weight.values(), rows, cols, v, false, u_next)) {
        degenerate = true;
        break;
      }
      u = std::move(u_next);
    }
  }
  if (update_u && !degenerate) state.u.values() = u;
  if (degenerate) {
    // Zero (or vanishing) weight matrix: sigma clamps to 1e-12 below and the
    // normalized weight is returned as-is scaled, i.e. zeros stay zeros.
    v.assign(std::size_t(cols), T(0));
  }

  Tensor<T> u_const = Tensor<T>::from_values(Shape{1, 1, 1, int(rows)}, u);
  Tensor<T> v_const = Tensor<T>::from_values(Shape{1, 1, int(cols), 1}, std::move(v));
  Tensor<T> w_mat = reshape(weight, Shape{1, 1, int(rows), int(cols)});
  Tensor<T> sigma = matmul_batched(u_const, matmul_batched(w_mat, v_const));
  sigma = clip(sigma, T(1e-12), std::numeric_limits<T>::max());
  return div(weight, sigma);
}

// ---------------------------------------------------------------------------
// Instance normalization: per-(sample, channel) standardization followed by
// a learned affine map. Built from primitive ops, so the backward pass is
// derived rather than hand-written.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                        T eps = T(1e-5)) {
  const Shape s = x.shape();
  if (std::int64_t(s.h) * s.w < 2) fail("instance_norm: needs at least 2 spatial elements");
  if (gain.shape() != Shape{1, s.c, 1, 1} || bias.shape() != Shape{1, s.c, 1, 1})
    fail("instance_norm: affine parameters must be (1, c, 1, 1)");
  Tensor<T> mu = mean_hw(x);
  Tensor<T> centered = sub(x, mu);
  Tensor<T> variance = mean_hw(square(centered));
  Tensor<T> denom = sqrt_t(scalar_add(variance, eps));
  return add(mul(div(centered, denom), gain), bias);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2)) {
  return leaky_relu_raw(x, slope);
}

// Piecewise-linear sigmoid clip(0.2 x + 0.5, 0, 1); saturates to exactly 0
// and 1 instead of approaching them asymptotically.
template <typename T>
Tensor<T> hard_sigmoid(const Tensor<T>& x) {
  return clip(scalar_add(scalar_mul(x, T(0.2)), T(0.5)), T(0), T(1));
}

// ---------------------------------------------------------------------------
// Dropout. The spatial variant zeroes whole (sample, channel) slices, the
// standard variant individual elements; survivors scale by 1/(1-rate).
// Eval mode is the identity.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> spatial_dropout(const Tensor<T>& x, T rate, const Mode& mode) {
  if (rate < T(0) || rate >= T(1)) fail("dropout rate must be in [0, 1)");
  if (!mode.training || rate == T(0)) return scalar_mul(x, T(1));
  const Shape s = x.shape();
  Tensor<T> mask(Shape{s.n, s.c, 1, 1});
  const T keep = T(1) / (T(1) - rate);
  for (auto& v : mask.values()) v = mode.rng->bernoulli(double(rate)) ? T(0) : keep;
  return mul(x, mask);
}

template <typename T>
Tensor<T> standard_dropout(const Tensor<T>& x, T rate, const Mode& mode) {
  if (rate < T(0) || rate >= T(1)) fail("dropout rate must be in [0, 1)");
  if (!mode.training || rate == T(0)) return scalar_mul(x, T(1));
  Tensor<T> mask(x.shape());
  const T keep = T(1) / (T(1) - rate);
  for (auto& v : mask.values()) v = mode.rng->bernoulli(double(rate)) ? T(0) : keep;
  return mul(x, mask);
}

// ---------------------------------------------------------------------------
// Gated self-attention. Query/key/value projections are 1x1 convs; the
// attention output enters through a residual path scaled by a learnable
// scalar gamma, so a zero gate leaves the input bit-identical.
// ---------------------------------------------------------------------------

template <typename T>
struct AttentionGate {
  Tensor<T> gamma;  // (1,1,1,1), initialized to 0
};

template <typename T>
struct AttentionWeights {
  Tensor<T> f_weight, f_bias;  // c -> c/8 (min 1)
  Tensor<T> g_weight, g_bias;  // c -> c/8 (min 1)
  Tensor<T> h_weight, h_bias;  // c -> c
};

template <typename T>
Tensor<T> gated_self_attention(const Tensor<T>& x, const AttentionWeights<T>& w,
                               const AttentionGate<T>& gate, std::int64_t max_hw) {
  const Shape s = x.shape();
  const std::int64_t hw = std::int64_t(s.h) * s.w;
  if (hw > max_hw)
    fail("gated_self_attention: spatial extent " + std::to_string(hw) +
         " exceeds configured cap " + std::to_string(max_hw));
  const int cr = w.f_weight.shape().n;

  Tensor<T> f = conv2d(x, w.f_weight, w.f_bias, 1);
  Tensor<T> g = conv2d(x, w.g_weight, w.g_bias, 1);
  Tensor<T> h = conv2d(x, w.h_weight, w.h_bias, 1);

  Tensor<T> fr = reshape(f, Shape{s.n, 1, cr, int(hw)});
  Tensor<T> gr = reshape(g, Shape{s.n, 1, cr, int(hw)});
  Tensor<T> hr = reshape(h, Shape{s.n, 1, s.c, int(hw)});

  // energy[q, k] = f(q) . g(k); each query row normalizes to 1
  Tensor<T> energy = matmul_batched(transpose_hw(fr), gr);
  Tensor<T> attention = softmax_rows(energy);
  Tensor<T> o = matmul_batched(hr, transpose_hw(attention));
  Tensor<T> o_map = reshape(o, s);
  return add(mul(gate.gamma, o_map), x);
}

// ---------------------------------------------------------------------------
// Composite conv blocks. One unit is reflection-pad -> spectral-norm conv ->
// instance norm -> leaky ReLU; the generator block applies two units, the
// discriminator block one. Plain downsampling/upsampling convs reuse the
// same struct with normalization and activation switched off.
// ---------------------------------------------------------------------------

template <typename T>
struct NormConv {
  Tensor<T> weight;  // (co, ci, k, k)
  Tensor<T> bias;    // (1, co, 1, 1)
  SpectralNormState<T> sn;
  Tensor<T> in_gain, in_bias;  // valid when use_instance_norm
  int stride = 1;
  bool use_instance_norm = true;
  bool use_activation = true;
  T slope = T(0.2);
  T in_eps = T(1e-5);
};

// Reflection padding that keeps out = ceil(in / stride) for this kernel.
inline PadSpec same_pad(int kernel, int stride, int in_h, int in_w) {
  auto axis = [&](int extent) {
    const int out = (extent + stride - 1) / stride;
    return std::max(0, (out - 1) * stride + kernel - extent);
  };
  const int th = axis(in_h), tw = axis(in_w);
  return PadSpec{th / 2, th - th / 2, tw / 2, tw - tw / 2};
}

template <typename T>
Tensor<T> norm_conv_forward(const Tensor<T>& x, NormConv<T>& layer, const Mode& mode) {
  const Shape s = x.shape();
  const int k = layer.weight.shape().h;
  Tensor<T> padded = reflection_pad(x, same_pad(k, layer.stride, s.h, s.w));
  Tensor<T> w = spectral_norm_apply(layer.weight, layer.sn, mode.training);
  Tensor<T> y = conv2d(padded, w, layer.bias, layer.stride);
  if (layer.use_instance_norm) y = instance_norm(y, layer.in_gain, layer.in_bias, layer.in_eps);
  if (layer.use_activation) y = leaky_relu(y, layer.slope);
  return y;
}

template <typename T>
Tensor<T> conv_block_gen(const Tensor<T>& x, NormConv<T>& first, NormConv<T>& second,
                         const Mode& mode) {
  return norm_conv_forward(norm_conv_forward(x, first, mode), second, mode);
}

template <typename T>
Tensor<T> conv_block_disc(const Tensor<T>& x, NormConv<T>& conv, const Mode& mode) {
  return norm_conv_forward(x, conv, mode);
}

}  // namespace vologan
