#pragma once

// Optimizers and schedules: NADAM for the generators, SGD with momentum for
// the discriminators, linear-warmup + cosine-decay learning rates, and the
// fan-based uniform initializer.

#include <cmath>

#include "vologan/rng.hpp"
#include "vologan/tensor.hpp"

namespace vologan {

struct OptimizerHyper {
  double beta1 = 0.5;
  double beta2 = 0.99;
  double momentum = 0.9;
  double eps = 1e-8;
};

// ---------------------------------------------------------------------------
// Learning-rate schedule: linear ramp over the warmup epochs reaching the
// target at the last warmup epoch, then cosine decay to zero.
// ---------------------------------------------------------------------------

struct ScheduleSpec {
  double target_lr = 2e-4;
  int warmup_epochs = 10;
  int total_epochs = 80;

  void validate() const {
    if (!(warmup_epochs > 0 && warmup_epochs < total_epochs))
      fail("schedule requires 0 < warmup < total epochs");
    if (target_lr <= 0) fail("target learning rate must be positive");
  }
};

inline double lr_at(const ScheduleSpec& spec, int epoch) {
  if (epoch < 0 || epoch >= spec.total_epochs)
    fail("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
         std::to_string(spec.total_epochs) + ")");
  if (epoch < spec.warmup_epochs) {
    // ratio first: the last warmup epoch yields exactly the target
    const double ramp = double(epoch + 1) / double(spec.warmup_epochs);
    return spec.target_lr * ramp;
  }
  const double progress =
      double(epoch - spec.warmup_epochs) / double(spec.total_epochs - spec.warmup_epochs);
  return spec.target_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

// ---------------------------------------------------------------------------
// Per-parameter slot state. Slots are created on first use in enumeration
// order and always match their parameter's shape.
// ---------------------------------------------------------------------------

template <typename T>
struct NadamState {
  std::vector<std::vector<T>> m, v;
  std::int64_t step = 0;
};

template <typename T>
struct SgdState {
  std::vector<std::vector<T>> velocity;
  std::int64_t step = 0;
};

namespace detail {

template <typename T>
const std::vector<T>& checked_grad(Tensor<T>& param, const std::string& name) {
  auto& g = param.ensure_grad();
  for (T v : g)
    if (!std::isfinite(double(v))) fail("non-finite gradient for parameter " + name);
  return g;
}

}  // namespace detail

// Nesterov-accelerated adaptive moments with bias correction:
//   m <- b1 m + (1-b1) g          v <- b2 v + (1-b2) g^2
//   w <- w - lr (b1 m/(1-b1^t) + (1-b1) g/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
template <typename T>
void nadam_step(std::vector<Tensor<T>>& params, const std::vector<std::string>& names,
                NadamState<T>& state, double lr, const OptimizerHyper& hyper) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(std::size_t(params[i].size()), T(0));
      state.v[i].assign(std::size_t(params[i].size()), T(0));
    }
  }
  if (state.m.size() != params.size()) fail("nadam_step: slot count mismatch");
  state.step += 1;
  const T b1 = T(hyper.beta1), b2 = T(hyper.beta2), eps = T(hyper.eps);
  const T bc1 = T(1) - T(std::pow(hyper.beta1, double(state.step)));
  const T bc2 = T(1) - T(std::pow(hyper.beta2, double(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = detail::checked_grad(params[i], i < names.size() ? names[i] : "");
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != g.size()) fail("nadam_step: slot shape mismatch");
    T* w = params[i].values().data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T m_hat = m[j] / bc1;
      const T g_hat = g[j] / bc1;
      const T v_hat = v[j] / bc2;
      w[j] -= T(lr) * (b1 * m_hat + (T(1) - b1) * g_hat) / (std::sqrt(v_hat) + eps);
    }
  }
}

// v <- momentum * v + g;  w <- w - lr * v
template <typename T>
void sgd_momentum_step(std::vector<Tensor<T>>& params, const std::vector<std::string>& names,
                       SgdState<T>& state, double lr, const OptimizerHyper& hyper) {
  if (state.velocity.empty()) {
    state.velocity.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      state.velocity[i].assign(std::size_t(params[i].size()), T(0));
  }
  if (state.velocity.size() != params.size()) fail("sgd_momentum_step: slot count mismatch");
  state.step += 1;
  const T mom = T(hyper.momentum);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = detail::checked_grad(params[i], i < names.size() ? names[i] : "");
    auto& v = state.velocity[i];
    if (v.size() != g.size()) fail("sgd_momentum_step: slot shape mismatch");
    T* w = params[i].values().data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      v[j] = mom * v[j] + g[j];
      w[j] -= T(lr) * v[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Initializers. The default draws from U(-b, b) with b = sqrt(6/(fan_in +
// fan_out)); the He-uniform alternative corrects for the leaky-ReLU slope.
// ---------------------------------------------------------------------------

enum class InitKind { GlorotUniform, HeUniform };

template <typename T>
Tensor<T> init_uniform(const Shape& shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  if (fan_in <= 0 || fan_out <= 0) fail("init_uniform: fan values must be positive");
  const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = T(rng.uniform_open() * 2.0 * bound - bound);
  return t;
}

template <typename T>
Tensor<T> init_he_uniform(const Shape& shape, std::int64_t fan_in, double leaky_slope, Rng& rng) {
  if (fan_in <= 0) fail("init_he_uniform: fan-in must be positive");
  const double bound = std::sqrt(6.0 / ((1.0 + leaky_slope * leaky_slope) * double(fan_in)));
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = T(rng.uniform_open() * 2.0 * bound - bound);
  return t;
}

// Conv weights use fan_in = ci*kh*kw and fan_out = co*kh*kw.
template <typename T>
Tensor<T> init_conv_weight(int co, int ci, int kh, int kw, InitKind kind, double leaky_slope,
                           Rng& rng) {
  const Shape shape{co, ci, kh, kw};
  const std::int64_t fan_in = std::int64_t(ci) * kh * kw;
  const std::int64_t fan_out = std::int64_t(co) * kh * kw;
  if (kind == InitKind::HeUniform) return init_he_uniform<T>(shape, fan_in, leaky_slope, rng);
  return init_uniform<T>(shape, fan_in, fan_out, rng);
}

}  // namespace vologan
