#pragma once

// Finite-difference gradient oracle. Runs the computation once under a tape
// to collect analytic gradients, then perturbs every entry of every listed
// parameter and compares against central differences. Meant to run with
// T = double; 32-bit central differences are too noisy to be an oracle.

#include <functional>
#include <limits>

#include "vologan/ops.hpp"

namespace vologan {

template <typename T>
struct GradCheckResult {
  T max_rel_error = T(0);
  std::string worst_param;
  std::int64_t worst_index = -1;
};

// f must be deterministic and scalar-valued; params are the tensors f reads.
template <typename T>
GradCheckResult<T> finite_diff_check(const std::function<Tensor<T>()>& f,
                                     const std::vector<Tensor<T>>& params,
                                     const std::vector<std::string>& names = {},
                                     T eps = T(1e-4)) {
  for (auto& p : params)
    if (!p.all_finite()) fail("finite_diff_check: parameter contains non-finite values");

  std::vector<std::vector<T>> analytic;
  {
    for (auto p : params) {
      p.clear_grad();
      p.set_requires_grad(true);
    }
    Tape<T> tape;
    Tensor<T> out = f();
    if (out.size() != 1) fail("finite_diff_check: f must return a scalar");
    if (!out.all_finite()) fail("finite_diff_check: f returned a non-finite value");
    tape.backward(out);
    for (auto& p : params) {
      auto pc = p;
      analytic.push_back(pc.ensure_grad());
      pc.clear_grad();
    }
  }

  auto eval = [&]() -> T {
    Tensor<T> out = f();  // no tape active: nothing recorded
    if (!out.all_finite()) fail("finite_diff_check: f returned a non-finite value");
    return out.values()[0];
  };

  GradCheckResult<T> result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto p = params[pi];
    for (std::int64_t i = 0; i < p.size(); ++i) {
      const T saved = p.values()[i];
      p.values()[i] = saved + eps;
      const T fp = eval();
      p.values()[i] = saved - eps;
      const T fm = eval();
      p.values()[i] = saved;
      const T central = (fp - fm) / (T(2) * eps);
      const T a = analytic[pi][i];
      // A central difference cannot resolve derivatives below its rounding
      // floor ~ u * |f| / eps; differences under that floor carry no signal
      // (they arise for parameters whose true gradient is exactly zero, e.g.
      // a conv bias absorbed by the instance norm that follows it).
      const T noise_floor = T(64) * std::numeric_limits<T>::epsilon() *
                            std::max(std::abs(fp), std::abs(fm)) / eps;
      const T diff = std::abs(a - central);
      if (diff <= noise_floor) continue;
      const T denom = std::max({std::abs(a), std::abs(central), T(1e-8)});
      const T rel = diff / denom;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = pi < names.size() ? names[pi] : ("param" + std::to_string(pi));
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace vologan
