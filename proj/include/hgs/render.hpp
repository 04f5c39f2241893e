#pragma once

#include "hgs/camera.hpp"
#include "hgs/gaussians.hpp"
#include "hgs/geometry.hpp"
#include "hgs/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

namespace hgs {

inline constexpr int kTileSize = 16;
inline constexpr double kCovRegularization = 0.3;  // pixels^2, added to cov2d
inline constexpr double kAlphaClamp = 0.999;
inline constexpr double kAlphaSkip = 1.0 / 255.0;
inline constexpr double kTransmittanceStop = 1e-4;
// Bounding radius in sigmas. At 3.5 sigma the per-pixel alpha is already
// below the 1/255 skip threshold for any opacity <= 1, so the bounding box
// never truncates a visible contribution.
inline constexpr double kCullSigma = 3.5;

// World-space gaussians as consumed by the renderer.
template <class S>
struct GaussianScene {
  std::vector<Vec3<S>> positions;
  std::vector<Mat3<S>> covariances;
  std::vector<Vec3<S>> colors;
  std::vector<S> opacities;

  int count() const { return static_cast<int>(positions.size()); }
};

template <class S>
GaussianScene<S> to_scene(const PosedGaussians& g) {
  GaussianScene<S> scene;
  scene.positions.reserve(g.count());
  scene.covariances.reserve(g.count());
  scene.colors.reserve(g.count());
  scene.opacities.reserve(g.count());
  for (int i = 0; i < g.count(); ++i) {
    scene.positions.push_back(g.positions[i].cast<S>());
    const Mat3<S> r = g.rot_linear[i].cast<S>();
    scene.covariances.push_back(covariance_from<S>(g.scales[i].cast<S>(), r));
    scene.colors.push_back(g.colors[i].cast<S>());
    scene.opacities.push_back(static_cast<S>(g.opacities[i]));
  }
  return scene;
}

template <class S>
struct Splat {
  Vec2<S> mean2d;
  S cov_xx, cov_xy, cov_yy;  // symmetric 2x2, regularized
  S depth;                   // camera-space z
  Vec3<S> color;
  S opacity;
  int32_t source;  // index into the projected scene
};

template <class S>
struct SplatFrame {
  std::vector<Splat<S>> splats;
  int width = 0;
  int height = 0;
};

template <class S>
struct SplatGrad {
  Vec2<S> d_mean2d = Vec2<S>::Zero();
  S d_cov_xx = S(0), d_cov_xy = S(0), d_cov_yy = S(0);
  Vec3<S> d_color = Vec3<S>::Zero();
  S d_opacity = S(0);
};

template <class S>
struct SceneGrad {
  std::vector<Vec3<S>> d_positions;
  std::vector<Mat3<S>> d_covariances;
  std::vector<Vec3<S>> d_colors;
  std::vector<S> d_opacities;

  explicit SceneGrad(int n)
      : d_positions(n, Vec3<S>::Zero()), d_covariances(n, Mat3<S>::Zero()),
        d_colors(n, Vec3<S>::Zero()), d_opacities(n, S(0)) {}
};

struct RasterStats {
  int skipped_singular = 0;
};

// EWA projection: camera-space mean t = R mu + tt, cov2d = J W Sigma W^T J^T
// with J the pinhole Jacobian at t. Gaussians with t.z outside (near, far)
// are culled, not errors.
template <class S>
SplatFrame<S> project_gaussians(const GaussianScene<S>& scene, const Camera& cam) {
  cam.validate();
  const Mat3<S> r = cam.rotation.cast<S>();
  const Vec3<S> tt = cam.translation.cast<S>();
  const S fx = S(cam.fx), fy = S(cam.fy);

  SplatFrame<S> frame;
  frame.width = cam.width;
  frame.height = cam.height;
  for (int i = 0; i < scene.count(); ++i) {
    const Vec3<S> t = r * scene.positions[i] + tt;
    if (!(t.z() > S(cam.near) && t.z() < S(cam.far))) continue;

    Splat<S> s;
    s.mean2d = Vec2<S>(fx * t.x() / t.z() + S(cam.cx), fy * t.y() / t.z() + S(cam.cy));
    Eigen::Matrix<S, 2, 3> j;
    j << fx / t.z(), S(0), -fx * t.x() / (t.z() * t.z()),
         S(0), fy / t.z(), -fy * t.y() / (t.z() * t.z());
    const Eigen::Matrix<S, 2, 3> m = j * r;
    const Mat2<S> c2 = m * scene.covariances[i] * m.transpose();
    s.cov_xx = c2(0, 0) + S(kCovRegularization);
    s.cov_xy = c2(0, 1);
    s.cov_yy = c2(1, 1) + S(kCovRegularization);
    s.depth = t.z();
    s.color = scene.colors[i];
    s.opacity = scene.opacities[i];
    s.source = i;
    frame.splats.push_back(s);
  }
  return frame;
}

// Pullback of per-splat gradients through the projection. Gradients of culled
// gaussians are zero. The cov2d gradient triplet refers to the stored
// (xx, xy, yy) components.
template <class S>
SceneGrad<S> project_backward(const GaussianScene<S>& scene, const Camera& cam,
                              const SplatFrame<S>& frame,
                              const std::vector<SplatGrad<S>>& grads) {
  if (grads.size() != frame.splats.size())
    throw std::invalid_argument("project_backward: gradient count mismatch");
  const Mat3<S> r = cam.rotation.cast<S>();
  const Vec3<S> tt = cam.translation.cast<S>();
  const S fx = S(cam.fx), fy = S(cam.fy);

  SceneGrad<S> out(scene.count());
  for (size_t k = 0; k < frame.splats.size(); ++k) {
    const int i = frame.splats[k].source;
    const SplatGrad<S>& g = grads[k];

    const Vec3<S> t = r * scene.positions[i] + tt;
    const S tz = t.z(), tz2 = tz * tz;
    Eigen::Matrix<S, 2, 3> j;
    j << fx / tz, S(0), -fx * t.x() / tz2,
         S(0), fy / tz, -fy * t.y() / tz2;
    const Eigen::Matrix<S, 2, 3> m = j * r;

    // cov2d chain: stored (xx, xy, yy) reads entries (0,0), (0,1), (1,1).
    Mat2<S> g2 = Mat2<S>::Zero();
    g2(0, 0) = g.d_cov_xx;
    g2(0, 1) = g.d_cov_xy;
    g2(1, 1) = g.d_cov_yy;
    out.d_covariances[i] += m.transpose() * g2 * m;

    const Eigen::Matrix<S, 2, 3> dm = (g2 + g2.transpose()) * m * scene.covariances[i];
    const Eigen::Matrix<S, 2, 3> dj = dm * r.transpose();

    Vec3<S> dt = Vec3<S>::Zero();
    // mean2d chain
    dt.x() += g.d_mean2d.x() * fx / tz;
    dt.y() += g.d_mean2d.y() * fy / tz;
    dt.z() += -g.d_mean2d.x() * fx * t.x() / tz2 - g.d_mean2d.y() * fy * t.y() / tz2;
    // J-entry chain
    dt.x() += dj(0, 2) * (-fx / tz2);
    dt.y() += dj(1, 2) * (-fy / tz2);
    dt.z() += dj(0, 0) * (-fx / tz2) + dj(1, 1) * (-fy / tz2) +
              dj(0, 2) * (S(2) * fx * t.x() / (tz2 * tz)) +
              dj(1, 2) * (S(2) * fy * t.y() / (tz2 * tz));

    out.d_positions[i] += r.transpose() * dt;
    out.d_colors[i] += g.d_color;
    out.d_opacities[i] += g.d_opacity;
  }
  return out;
}

namespace detail {

template <class S>
struct TileIndex {
  int tiles_x = 0, tiles_y = 0;
  std::vector<int> order;                  // splat indices sorted by (depth, source)
  std::vector<std::vector<int>> per_tile;  // positions into `order`, ascending

  TileIndex(const SplatFrame<S>& frame, RasterStats* stats) {
    tiles_x = (frame.width + kTileSize - 1) / kTileSize;
    tiles_y = (frame.height + kTileSize - 1) / kTileSize;
    per_tile.resize(static_cast<size_t>(tiles_x) * tiles_y);

    order.resize(frame.splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const auto& sa = frame.splats[a];
      const auto& sb = frame.splats[b];
      return sa.depth != sb.depth ? sa.depth < sb.depth : sa.source < sb.source;
    });

    for (size_t pos = 0; pos < order.size(); ++pos) {
      const Splat<S>& s = frame.splats[order[pos]];
      const S det = s.cov_xx * s.cov_yy - s.cov_xy * s.cov_xy;
      if (!(det > S(1e-12)) || !std::isfinite(det)) {
        if (stats) ++stats->skipped_singular;
        continue;
      }
      const S half_trace = (s.cov_xx + s.cov_yy) / S(2);
      const S apex = std::sqrt(std::max(S(0), half_trace * half_trace - det));
      const S radius = S(kCullSigma) * std::sqrt(half_trace + apex);
      const int x0 = std::clamp(static_cast<int>((s.mean2d.x() - radius) / kTileSize), 0, tiles_x - 1);
      const int x1 = std::clamp(static_cast<int>((s.mean2d.x() + radius) / kTileSize), 0, tiles_x - 1);
      const int y0 = std::clamp(static_cast<int>((s.mean2d.y() - radius) / kTileSize), 0, tiles_y - 1);
      const int y1 = std::clamp(static_cast<int>((s.mean2d.y() + radius) / kTileSize), 0, tiles_y - 1);
      if (s.mean2d.x() + radius < S(0) || s.mean2d.x() - radius > S(frame.width) ||
          s.mean2d.y() + radius < S(0) || s.mean2d.y() - radius > S(frame.height))
        continue;
      for (int ty = y0; ty <= y1; ++ty)
        for (int tx = x0; tx <= x1; ++tx)
          per_tile[static_cast<size_t>(ty) * tiles_x + tx].push_back(static_cast<int>(pos));
    }
  }
};

// Inverse covariance triplet (Q00, Q01, Q11) of a stored splat.
template <class S>
inline void conic_of(const Splat<S>& s, S& q00, S& q01, S& q11) {
  const S det = s.cov_xx * s.cov_yy - s.cov_xy * s.cov_xy;
  q00 = s.cov_yy / det;
  q01 = -s.cov_xy / det;
  q11 = s.cov_xx / det;
}

template <class Fn>
void parallel_tiles(int tile_count, int threads, Fn&& fn) {
  if (threads <= 1 || tile_count <= 1) {
    for (int t = 0; t < tile_count; ++t) fn(t);
    return;
  }
  std::vector<std::thread> pool;
  const int n = std::min(threads, tile_count);
  for (int w = 0; w < n; ++w) {
    pool.emplace_back([=]() {
      for (int t = w; t < tile_count; t += n) fn(t);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Front-to-back alpha compositing over a global depth sort (ties broken by
// source index). Output has 4 channels: RGB plus alpha = 1 - transmittance.
template <class S>
Image<S> rasterize(const SplatFrame<S>& frame, const Vec3<S>& background,
                   RasterStats* stats = nullptr, int threads = 1) {
  Image<S> image(frame.width, frame.height, 4);
  detail::TileIndex<S> tiles(frame, stats);

  detail::parallel_tiles(tiles.tiles_x * tiles.tiles_y, threads, [&](int tile) {
    const int tx = tile % tiles.tiles_x, ty = tile / tiles.tiles_x;
    const auto& list = tiles.per_tile[tile];
    const int x1 = std::min(frame.width, (tx + 1) * kTileSize);
    const int y1 = std::min(frame.height, (ty + 1) * kTileSize);
    for (int py = ty * kTileSize; py < y1; ++py) {
      for (int px = tx * kTileSize; px < x1; ++px) {
        const S pxc = S(px) + S(0.5), pyc = S(py) + S(0.5);
        Vec3<S> rgb = Vec3<S>::Zero();
        S transmittance = S(1);
        for (int pos : list) {
          const Splat<S>& s = frame.splats[tiles.order[pos]];
          S q00, q01, q11;
          detail::conic_of(s, q00, q01, q11);
          const S dx = pxc - s.mean2d.x(), dy = pyc - s.mean2d.y();
          const S power = S(-0.5) * (q00 * dx * dx + q11 * dy * dy) - q01 * dx * dy;
          if (power > S(0)) continue;
          const S alpha = std::min(S(kAlphaClamp), s.opacity * std::exp(power));
          if (alpha < S(kAlphaSkip)) continue;
          rgb += (transmittance * alpha) * s.color;
          transmittance *= S(1) - alpha;
          if (transmittance < S(kTransmittanceStop)) break;
        }
        rgb += transmittance * background;
        image.at(px, py, 0) = rgb.x();
        image.at(px, py, 1) = rgb.y();
        image.at(px, py, 2) = rgb.z();
        image.at(px, py, 3) = S(1) - transmittance;
      }
    }
  });
  return image;
}

// Analytic gradients of the compositing sum wrt per-splat mean2d, cov2d,
// color and opacity. `upstream` must be ImageBuffer-shaped (4 channels; the
// fourth carries the alpha-channel gradient). Gradients are zero through the
// alpha clamp and skip thresholds. Deterministic for a fixed tiling: each
// tile accumulates locally and tiles merge in fixed order.
template <class S>
std::vector<SplatGrad<S>> rasterize_backward(const SplatFrame<S>& frame,
                                             const Vec3<S>& background,
                                             const Image<S>& upstream,
                                             int threads = 1) {
  if (upstream.width != frame.width || upstream.height != frame.height ||
      upstream.channels != 4)
    throw std::invalid_argument("rasterize_backward: upstream gradient shape mismatch");

  detail::TileIndex<S> tiles(frame, nullptr);
  const int tile_count = tiles.tiles_x * tiles.tiles_y;

  struct LocalGrad {
    std::vector<SplatGrad<S>> by_list_pos;  // parallel to the tile's splat list
  };
  std::vector<LocalGrad> local(tile_count);

  struct Hit {
    int list_pos;
    S alpha;
    S transmittance;  // in front of this splat
    bool clamped;
  };

  detail::parallel_tiles(tile_count, threads, [&](int tile) {
    const auto& list = tiles.per_tile[tile];
    auto& grads = local[tile].by_list_pos;
    grads.assign(list.size(), SplatGrad<S>());
    if (list.empty()) return;

    const int tx = tile % tiles.tiles_x, ty = tile / tiles.tiles_x;
    const int x1 = std::min(frame.width, (tx + 1) * kTileSize);
    const int y1 = std::min(frame.height, (ty + 1) * kTileSize);
    std::vector<Hit> hits;
    hits.reserve(list.size());

    for (int py = ty * kTileSize; py < y1; ++py) {
      for (int px = tx * kTileSize; px < x1; ++px) {
        const S pxc = S(px) + S(0.5), pyc = S(py) + S(0.5);
        // Replay the forward pass for this pixel.
        hits.clear();
        S transmittance = S(1);
        for (size_t li = 0; li < list.size(); ++li) {
          const Splat<S>& s = frame.splats[tiles.order[list[li]]];
          S q00, q01, q11;
          detail::conic_of(s, q00, q01, q11);
          const S dx = pxc - s.mean2d.x(), dy = pyc - s.mean2d.y();
          const S power = S(-0.5) * (q00 * dx * dx + q11 * dy * dy) - q01 * dx * dy;
          if (power > S(0)) continue;
          const S raw_alpha = s.opacity * std::exp(power);
          const bool clamped = raw_alpha > S(kAlphaClamp);
          const S alpha = clamped ? S(kAlphaClamp) : raw_alpha;
          if (alpha < S(kAlphaSkip)) continue;
          hits.push_back({static_cast<int>(li), alpha, transmittance, clamped});
          transmittance *= S(1) - alpha;
          if (transmittance < S(kTransmittanceStop)) break;
        }

        const Vec3<S> g_rgb(upstream.at(px, py, 0), upstream.at(px, py, 1),
                            upstream.at(px, py, 2));
        const S g_alpha = upstream.at(px, py, 3);
        const S t_end = transmittance;

        // Walk back to front, accumulating the tail sum S_i.
        Vec3<S> tail = t_end * background;
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
          const Splat<S>& s = frame.splats[tiles.order[list[it->list_pos]]];
          SplatGrad<S>& g = grads[it->list_pos];

          const Vec3<S> d_color = (it->alpha * it->transmittance) * g_rgb;
          g.d_color += d_color;

          const S one_minus = S(1) - it->alpha;
          const S d_alpha = g_rgb.dot(it->transmittance * s.color - tail / one_minus) +
                            g_alpha * (t_end / one_minus);
          tail += (it->alpha * it->transmittance) * s.color;
          if (it->clamped) continue;  // zero gradient through the active clamp

          // alpha = opacity * exp(power)
          S q00, q01, q11;
          detail::conic_of(s, q00, q01, q11);
          const S dx = pxc - s.mean2d.x(), dy = pyc - s.mean2d.y();
          const S power = S(-0.5) * (q00 * dx * dx + q11 * dy * dy) - q01 * dx * dy;
          g.d_opacity += d_alpha * std::exp(power);
          const S d_power = d_alpha * it->alpha;
          // d(power)/d(mean2d) = +Q d with d = pixel - mean
          g.d_mean2d.x() += d_power * (q00 * dx + q01 * dy);
          g.d_mean2d.y() += d_power * (q01 * dx + q11 * dy);
          // d(power)/d(conic triplet), accumulated in the cov slots and
          // converted to covariance space once per splat after the pixel loops.
          g.d_cov_xx += d_power * (S(-0.5) * dx * dx);
          g.d_cov_xy += d_power * (-dx * dy);
          g.d_cov_yy += d_power * (S(-0.5) * dy * dy);
        }
      }
    }
  });

  // Merge tiles in fixed order, still in conic space.
  std::vector<SplatGrad<S>> merged(frame.splats.size());
  for (int tile = 0; tile < tile_count; ++tile) {
    const auto& list = tiles.per_tile[tile];
    for (size_t li = 0; li < list.size(); ++li) {
      SplatGrad<S>& dst = merged[tiles.order[list[li]]];
      const SplatGrad<S>& src = local[tile].by_list_pos[li];
      dst.d_mean2d += src.d_mean2d;
      dst.d_cov_xx += src.d_cov_xx;
      dst.d_cov_xy += src.d_cov_xy;
      dst.d_cov_yy += src.d_cov_yy;
      dst.d_color += src.d_color;
      dst.d_opacity += src.d_opacity;
    }
  }

  // Convert conic-triplet gradients to covariance-triplet gradients via
  // dL/dC = -Q (dL/dQ) Q with the symmetric split of the off-diagonal slot.
  for (size_t k = 0; k < merged.size(); ++k) {
    const Splat<S>& s = frame.splats[k];
    SplatGrad<S>& g = merged[k];
    if (g.d_cov_xx == S(0) && g.d_cov_xy == S(0) && g.d_cov_yy == S(0)) continue;
    S q00, q01, q11;
    detail::conic_of(s, q00, q01, q11);
    Mat2<S> q_mat, gq;
    q_mat << q00, q01, q01, q11;
    gq << g.d_cov_xx, g.d_cov_xy / S(2), g.d_cov_xy / S(2), g.d_cov_yy;
    const Mat2<S> gc = -q_mat * gq * q_mat;
    g.d_cov_xx = gc(0, 0);
    g.d_cov_xy = S(2) * gc(0, 1);
    g.d_cov_yy = gc(1, 1);
  }
  return merged;
}

}  // namespace hgs
