#pragma once

#include "hgs/image.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace hgs {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// Losses compare the first min(3, channels) channels; any alpha channel is
// ignored and its gradient slot stays zero.
template <class S>
int compared_channels(const Image<S>& img) {
  return std::min(3, img.channels);
}

// Mean absolute error over RGB. Subgradient 0 at exact ties.
template <class S>
S l1_loss(const Image<S>& pred, const Image<S>& target, Image<S>* grad = nullptr) {
  require_same_shape(pred, target, "l1_loss");
  const int nc = compared_channels(pred);
  if (grad) *grad = Image<S>(pred.width, pred.height, pred.channels);
  const S norm = S(1) / (S(pred.width) * S(pred.height) * S(nc));
  S sum = S(0);
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      for (int c = 0; c < nc; ++c) {
        const S d = pred.at(x, y, c) - target.at(x, y, c);
        sum += std::abs(d);
        if (grad) grad->at(x, y, c) = (d > S(0) ? norm : (d < S(0) ? -norm : S(0)));
      }
    }
  }
  return sum * norm;
}

namespace detail {

template <class S>
std::array<S, kSsimWindow> ssim_window() {
  std::array<S, kSsimWindow> w;
  S sum = S(0);
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - (kSsimWindow - 1) / 2.0;
    w[i] = static_cast<S>(std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma)));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable "valid" correlation of one channel plane.
template <class S>
std::vector<S> valid_filter(const std::vector<S>& plane, int w, int h, int vw, int vh,
                            const std::array<S, kSsimWindow>& win) {
  std::vector<S> horiz(static_cast<size_t>(vw) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < vw; ++x) {
      S acc = S(0);
      for (int k = 0; k < kSsimWindow; ++k) acc += win[k] * plane[y * w + x + k];
      horiz[static_cast<size_t>(y) * vw + x] = acc;
    }
  std::vector<S> out(static_cast<size_t>(vw) * vh);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      S acc = S(0);
      for (int k = 0; k < kSsimWindow; ++k) acc += win[k] * horiz[(y + k) * vw + x];
      out[static_cast<size_t>(y) * vw + x] = acc;
    }
  return out;
}

// Scatter of a valid-grid map back to full resolution: full[p] = sum_k
// win2d[k] * map[p - k], zero outside the valid grid. Separable.
template <class S>
std::vector<S> scatter_full(const std::vector<S>& map, int vw, int vh, int w, int h,
                            const std::array<S, kSsimWindow>& win) {
  std::vector<S> horiz(static_cast<size_t>(w) * vh, S(0));
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < w; ++x) {
      S acc = S(0);
      for (int k = 0; k < kSsimWindow; ++k) {
        const int sx = x - k;
        if (sx >= 0 && sx < vw) acc += win[k] * map[y * vw + sx];
      }
      horiz[static_cast<size_t>(y) * w + x] = acc;
    }
  std::vector<S> out(static_cast<size_t>(w) * h, S(0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      S acc = S(0);
      for (int k = 0; k < kSsimWindow; ++k) {
        const int sy = y - k;
        if (sy >= 0 && sy < vh) acc += win[k] * horiz[sy * static_cast<size_t>(w) + x];
      }
      out[static_cast<size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace detail

// Mean SSIM over valid 11x11 windows, averaged over RGB channels. When
// `grad_of_loss` is given it receives d(1 - mean SSIM)/d pred.
template <class S>
S ssim(const Image<S>& pred, const Image<S>& target, Image<S>* grad_of_loss = nullptr) {
  require_same_shape(pred, target, "ssim");
  if (pred.width < kSsimWindow || pred.height < kSsimWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");

  const auto win = detail::ssim_window<S>();
  const int w = pred.width, h = pred.height;
  const int vw = w - kSsimWindow + 1, vh = h - kSsimWindow + 1;
  const int nc = compared_channels(pred);
  const S c1 = S(kSsimK1 * kSsimK1), c2 = S(kSsimK2 * kSsimK2);

  if (grad_of_loss) *grad_of_loss = Image<S>(w, h, pred.channels);
  const size_t nvalid = static_cast<size_t>(vw) * vh;
  const S inv_m = S(1) / (S(nvalid) * S(nc));

  S total = S(0);
  std::vector<S> x_plane(static_cast<size_t>(w) * h), y_plane(x_plane.size()),
      xx(x_plane.size()), yy(x_plane.size()), xy(x_plane.size());
  for (int c = 0; c < nc; ++c) {
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        const size_t i = static_cast<size_t>(py) * w + px;
        x_plane[i] = pred.at(px, py, c);
        y_plane[i] = target.at(px, py, c);
        xx[i] = x_plane[i] * x_plane[i];
        yy[i] = y_plane[i] * y_plane[i];
        xy[i] = x_plane[i] * y_plane[i];
      }
    const auto mu_x = detail::valid_filter(x_plane, w, h, vw, vh, win);
    const auto mu_y = detail::valid_filter(y_plane, w, h, vw, vh, win);
    const auto e_xx = detail::valid_filter(xx, w, h, vw, vh, win);
    const auto e_yy = detail::valid_filter(yy, w, h, vw, vh, win);
    const auto e_xy = detail::valid_filter(xy, w, h, vw, vh, win);

    std::vector<S> p_map, q_map, r_map;
    if (grad_of_loss) {
      p_map.resize(nvalid);
      q_map.resize(nvalid);
      r_map.resize(nvalid);
    }
    for (size_t i = 0; i < nvalid; ++i) {
      const S sx2 = e_xx[i] - mu_x[i] * mu_x[i];
      const S sy2 = e_yy[i] - mu_y[i] * mu_y[i];
      const S sxy = e_xy[i] - mu_x[i] * mu_y[i];
      const S a1 = S(2) * mu_x[i] * mu_y[i] + c1;
      const S a2 = S(2) * sxy + c2;
      const S b1 = mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1;
      const S b2 = sx2 + sy2 + c2;
      const S s_val = (a1 * a2) / (b1 * b2);
      total += s_val;
      if (grad_of_loss) {
        q_map[i] = S(2) * a1 / (b1 * b2);
        r_map[i] = S(-2) * s_val / b2;
        p_map[i] = S(2) * mu_y[i] * (a2 - a1) / (b1 * b2) +
                   S(2) * s_val * mu_x[i] * (S(1) / b2 - S(1) / b1);
      }
    }
    if (grad_of_loss) {
      const auto p_full = detail::scatter_full(p_map, vw, vh, w, h, win);
      const auto q_full = detail::scatter_full(q_map, vw, vh, w, h, win);
      const auto r_full = detail::scatter_full(r_map, vw, vh, w, h, win);
      for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) {
          const size_t i = static_cast<size_t>(py) * w + px;
          grad_of_loss->at(px, py, c) =
              -inv_m * (p_full[i] + q_full[i] * y_plane[i] + r_full[i] * x_plane[i]);
        }
    }
  }
  return total * inv_m;
}

// 1 - mean SSIM, the perceptual substitute loss.
template <class S>
S ssim_loss(const Image<S>& pred, const Image<S>& target, Image<S>* grad = nullptr) {
  return S(1) - ssim(pred, target, grad);
}

// PSNR in dB for unit dynamic range; +infinity for identical images.
template <class S>
double psnr(const Image<S>& pred, const Image<S>& target) {
  require_same_shape(pred, target, "psnr");
  const int nc = compared_channels(pred);
  double mse = 0;
  for (int y = 0; y < pred.height; ++y)
    for (int x = 0; x < pred.width; ++x)
      for (int c = 0; c < nc; ++c) {
        const double d = double(pred.at(x, y, c)) - double(target.at(x, y, c));
        mse += d * d;
      }
  mse /= double(pred.width) * pred.height * nc;
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

// 0.5 * mean(mu^2 + sigma^2 - log sigma^2 - 1), the diagonal-Gaussian KL.
template <class S>
S kl_loss(std::span<const S> mean, std::span<const S> log_variance,
          std::span<S> d_mean = {}, std::span<S> d_log_variance = {}) {
  if (mean.size() != log_variance.size())
    throw std::invalid_argument("kl_loss: tensor shapes differ");
  if (mean.empty()) throw std::invalid_argument("kl_loss: empty tensors");
  const S norm = S(1) / S(mean.size());
  S sum = S(0);
  for (size_t i = 0; i < mean.size(); ++i) {
    if (!std::isfinite(mean[i]) || !std::isfinite(log_variance[i]))
      throw std::domain_error("kl_loss: non-finite input");
    const S var = std::exp(log_variance[i]);
    sum += mean[i] * mean[i] + var - log_variance[i] - S(1);
    if (!d_mean.empty()) d_mean[i] = mean[i] * norm;
    if (!d_log_variance.empty()) d_log_variance[i] = S(0.5) * (var - S(1)) * norm;
  }
  return S(0.5) * sum * norm;
}

}  // namespace hgs
