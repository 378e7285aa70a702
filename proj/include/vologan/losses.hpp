#pragma once

// Loss terms: least-squares adversarial losses, the MAE->MSE switching pixel
// loss, whole-image SSIM and its cycle loss, channel-wise weighting, and the
// weighted totals for generator and discriminator. Everything returns scalar
// tensors built from differentiable ops.

#include <array>
#include <functional>

#include "vologan/ops.hpp"

namespace vologan {

struct SsimConstants {
  double c1 = 0.01 * 0.01;  // dynamic range is 1 after scaling
  double c2 = 0.03 * 0.03;
  double c3 = 0.5 * 0.03 * 0.03;
};

struct SsimExponents {
  double alpha = 1.0, beta = 1.0, gamma = 1.0;
};

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_ide = 0.5;
  double lambda_ssim = 1.0;
  // channel order r, g, b, d; depth gets triple weight to compensate for the
  // three color channels against one depth channel
  std::array<double, 4> lambda_channel{1.0, 1.0, 1.0, 3.0};
  int epoch_sw = 40;
  SsimConstants ssim_constants;
  SsimExponents ssim_exponents;

  void validate() const {
    if (lambda_cyc < 0 || lambda_ide < 0 || lambda_ssim < 0)
      fail("loss weights must be non-negative");
    for (double l : lambda_channel)
      if (l < 0) fail("channel weights must be non-negative");
    if (ssim_constants.c1 <= 0 || ssim_constants.c2 <= 0 || ssim_constants.c3 <= 0)
      fail("SSIM constants must be positive");
  }
};

// ---------------------------------------------------------------------------
// Adversarial losses (least-squares form)
// ---------------------------------------------------------------------------

// mean((d_real - 1)^2) + mean(d_fake^2)
template <typename T>
Tensor<T> adv_loss_discriminator(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  if (!(d_real.shape() == d_fake.shape()))
    fail("adv_loss_discriminator: head outputs differ, " + d_real.shape().str() + " vs " +
         d_fake.shape().str());
  return add(mean_all(square(scalar_add(d_real, T(-1)))), mean_all(square(d_fake)));
}

// mean((d_fake - 1)^2)
template <typename T>
Tensor<T> adv_loss_generator(const Tensor<T>& d_fake) {
  return mean_all(square(scalar_add(d_fake, T(-1))));
}

// ---------------------------------------------------------------------------
// Pixel loss: MAE up to and including epoch_sw, MSE afterwards.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> pixel_loss(const Tensor<T>& xp, const Tensor<T>& yp, const Tensor<T>& x,
                     const Tensor<T>& y, int epoch, int epoch_sw) {
  if (!(xp.shape() == x.shape()))
    fail("pixel_loss: shapes differ, " + xp.shape().str() + " vs " + x.shape().str());
  if (!(yp.shape() == y.shape()))
    fail("pixel_loss: shapes differ, " + yp.shape().str() + " vs " + y.shape().str());
  if (epoch <= epoch_sw)
    return add(mean_all(abs_t(sub(xp, x))), mean_all(abs_t(sub(yp, y))));
  return add(mean_all(square(sub(xp, x))), mean_all(square(sub(yp, y))));
}

// ---------------------------------------------------------------------------
// SSIM over whole-image statistics (population variance). The three factors
// compare means, variances and covariance; the constants keep denominators
// away from zero.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> ssim(const Tensor<T>& x, const Tensor<T>& y,
               const SsimConstants& k = SsimConstants{},
               const SsimExponents& e = SsimExponents{}) {
  if (!(x.shape() == y.shape()))
    fail("ssim: shapes differ, " + x.shape().str() + " vs " + y.shape().str());
  const T c1 = T(k.c1), c2 = T(k.c2), c3 = T(k.c3);

  Tensor<T> mu_x = mean_all(x);
  Tensor<T> mu_y = mean_all(y);
  Tensor<T> xc = sub(x, mu_x);
  Tensor<T> yc = sub(y, mu_y);
  Tensor<T> var_x = mean_all(square(xc));
  Tensor<T> var_y = mean_all(square(yc));
  Tensor<T> cov = mean_all(mul(xc, yc));
  Tensor<T> sd_x = sqrt_t(var_x);
  Tensor<T> sd_y = sqrt_t(var_y);

  Tensor<T> mean_term = div(scalar_add(scalar_mul(mul(mu_x, mu_y), T(2)), c1),
                            scalar_add(add(square(mu_x), square(mu_y)), c1));
  Tensor<T> variance_term = div(scalar_add(scalar_mul(mul(sd_x, sd_y), T(2)), c2),
                                scalar_add(add(var_x, var_y), c2));
  Tensor<T> covariance_term = div(scalar_add(cov, c3), scalar_add(mul(sd_x, sd_y), c3));

  mean_term = pow_scalar(mean_term, T(e.alpha));
  variance_term = pow_scalar(variance_term, T(e.beta));
  covariance_term = pow_scalar(covariance_term, T(e.gamma));
  return mul(mul(mean_term, variance_term), covariance_term);
}

// [1 - SSIM(s, cyc_s)] + [1 - SSIM(t, cyc_t)]
template <typename T>
Tensor<T> ssim_loss(const Tensor<T>& s, const Tensor<T>& t, const Tensor<T>& cyc_s,
                    const Tensor<T>& cyc_t, const SsimConstants& k = SsimConstants{},
                    const SsimExponents& e = SsimExponents{}) {
  Tensor<T> a = scalar_add(neg(ssim(s, cyc_s, k, e)), T(1));
  Tensor<T> b = scalar_add(neg(ssim(t, cyc_t, k, e)), T(1));
  return add(a, b);
}

// ---------------------------------------------------------------------------
// Channel-wise weighting: the loss is evaluated independently on each of the
// four RGB-D channels, scaled by its lambda and summed.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> channelwise(const std::function<Tensor<T>(int)>& per_channel_loss,
                      const std::array<double, 4>& lambda_channel) {
  Tensor<T> total;
  for (int ch = 0; ch < 4; ++ch) {
    Tensor<T> term = scalar_mul(per_channel_loss(ch), T(lambda_channel[ch]));
    total = total.valid() ? add(total, term) : term;
  }
  return total;
}

namespace detail {

inline void require_rgbd(const Shape& s, const char* who) {
  if (s.c != 4) fail(std::string(who) + ": expected 4 channels, got " + s.str());
}

}  // namespace detail

// Channel-wise loss with its reporting breakdown: unweighted per-channel
// values plus the weighted sums of the two pair halves (the per-generator
// view of the metric curves).
template <typename T>
struct ChannelwiseDetail {
  Tensor<T> total;                  // weighted channel sum
  std::array<T, 4> per_channel{};   // unweighted, both halves combined
  T first_half = 0, second_half = 0;  // weighted per-domain parts
};

template <typename T>
ChannelwiseDetail<T> channelwise_pixel_detail(const Tensor<T>& xp, const Tensor<T>& yp,
                                              const Tensor<T>& x, const Tensor<T>& y, int epoch,
                                              int epoch_sw,
                                              const std::array<double, 4>& lambda_channel) {
  detail::require_rgbd(xp.shape(), "channelwise_pixel");
  detail::require_rgbd(yp.shape(), "channelwise_pixel");
  ChannelwiseDetail<T> out;
  auto half = [&](const Tensor<T>& a, const Tensor<T>& b) {
    return epoch <= epoch_sw ? mean_all(abs_t(sub(a, b))) : mean_all(square(sub(a, b)));
  };
  for (int ch = 0; ch < 4; ++ch) {
    Tensor<T> hx = half(slice_channels(xp, ch, ch + 1), slice_channels(x, ch, ch + 1));
    Tensor<T> hy = half(slice_channels(yp, ch, ch + 1), slice_channels(y, ch, ch + 1));
    out.per_channel[std::size_t(ch)] = hx.values()[0] + hy.values()[0];
    out.first_half += T(lambda_channel[std::size_t(ch)]) * hx.values()[0];
    out.second_half += T(lambda_channel[std::size_t(ch)]) * hy.values()[0];
    Tensor<T> term = scalar_mul(add(hx, hy), T(lambda_channel[std::size_t(ch)]));
    out.total = out.total.valid() ? add(out.total, term) : term;
  }
  return out;
}

template <typename T>
Tensor<T> channelwise_pixel(const Tensor<T>& xp, const Tensor<T>& yp, const Tensor<T>& x,
                            const Tensor<T>& y, int epoch, int epoch_sw,
                            const std::array<double, 4>& lambda_channel) {
  return channelwise_pixel_detail(xp, yp, x, y, epoch, epoch_sw, lambda_channel).total;
}

template <typename T>
ChannelwiseDetail<T> channelwise_ssim_detail(const Tensor<T>& s, const Tensor<T>& t,
                                             const Tensor<T>& cyc_s, const Tensor<T>& cyc_t,
                                             const std::array<double, 4>& lambda_channel,
                                             const SsimConstants& k = SsimConstants{},
                                             const SsimExponents& e = SsimExponents{}) {
  detail::require_rgbd(s.shape(), "channelwise_ssim");
  detail::require_rgbd(t.shape(), "channelwise_ssim");
  ChannelwiseDetail<T> out;
  for (int ch = 0; ch < 4; ++ch) {
    Tensor<T> hs = scalar_add(neg(ssim(slice_channels(s, ch, ch + 1),
                                       slice_channels(cyc_s, ch, ch + 1), k, e)),
                              T(1));
    Tensor<T> ht = scalar_add(neg(ssim(slice_channels(t, ch, ch + 1),
                                       slice_channels(cyc_t, ch, ch + 1), k, e)),
                              T(1));
    out.per_channel[std::size_t(ch)] = hs.values()[0] + ht.values()[0];
    out.first_half += T(lambda_channel[std::size_t(ch)]) * hs.values()[0];
    out.second_half += T(lambda_channel[std::size_t(ch)]) * ht.values()[0];
    Tensor<T> term = scalar_mul(add(hs, ht), T(lambda_channel[std::size_t(ch)]));
    out.total = out.total.valid() ? add(out.total, term) : term;
  }
  return out;
}

template <typename T>
Tensor<T> channelwise_ssim(const Tensor<T>& s, const Tensor<T>& t, const Tensor<T>& cyc_s,
                           const Tensor<T>& cyc_t, const std::array<double, 4>& lambda_channel,
                           const SsimConstants& k = SsimConstants{},
                           const SsimExponents& e = SsimExponents{}) {
  return channelwise_ssim_detail(s, t, cyc_s, cyc_t, lambda_channel, k, e).total;
}

// ---------------------------------------------------------------------------
// Totals
// ---------------------------------------------------------------------------

template <typename T>
struct GeneratorLossParts {
  Tensor<T> adv, cyc, ide, ssim;  // cyc/ide/ssim already channel-weighted
};

template <typename T>
struct LossReport {
  T adv = 0, cyc = 0, ide = 0, ssim = 0, total = 0;
  std::array<T, 4> cyc_per_channel{}, ide_per_channel{}, ssim_per_channel{};
  Tensor<T> total_tensor;  // differentiable Eq-style weighted sum
};

// total = adv + lambda_cyc * cyc + lambda_ide * ide + lambda_ssim * ssim,
// summed left to right in that order.
template <typename T>
LossReport<T> total_generator_loss(const GeneratorLossParts<T>& parts, const LossWeights& w) {
  if (!parts.adv.valid() || !parts.cyc.valid() || !parts.ide.valid() || !parts.ssim.valid())
    fail("total_generator_loss: missing loss part");
  LossReport<T> report;
  report.total_tensor =
      add(add(add(parts.adv, scalar_mul(parts.cyc, T(w.lambda_cyc))),
              scalar_mul(parts.ide, T(w.lambda_ide))),
          scalar_mul(parts.ssim, T(w.lambda_ssim)));
  report.adv = parts.adv.values()[0];
  report.cyc = parts.cyc.values()[0];
  report.ide = parts.ide.values()[0];
  report.ssim = parts.ssim.values()[0];
  report.total = report.total_tensor.values()[0];
  return report;
}

// 2 * lowlevel + layout + content; the low-level head counts double to
// balance the two branch heads.
template <typename T>
Tensor<T> total_discriminator_loss(const Tensor<T>& lowlevel, const Tensor<T>& layout,
                                   const Tensor<T>& content) {
  return add(add(scalar_mul(lowlevel, T(2)), layout), content);
}

// Metrics CSV schema shared by the training loop.
inline const char* metrics_csv_header() {
  return "epoch,step,adv_g,cyc,ide,ssim,total_g,d_lowlevel,d_layout,d_content,total_d,lr_g,lr_d";
}

}  // namespace vologan
