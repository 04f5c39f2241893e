#pragma once

#include "hgs/body.hpp"
#include "hgs/camera.hpp"
#include "hgs/gaussians.hpp"
#include "hgs/image.hpp"
#include "hgs/optim.hpp"
#include "hgs/render.hpp"

#include <functional>
#include <span>
#include <vector>

namespace hgs {

// Differentiable path from raw UV channels to a renderable world-space
// scene: decode activations, optional LBS blend, covariance build. The
// per-gaussian LBS transforms are constants of the chain.
template <class S>
class RenderChain {
 public:
  RenderChain(std::vector<Vec3<S>> base_positions, std::vector<S> base_scales)
      : base_positions_(std::move(base_positions)), base_scales_(std::move(base_scales)) {}

  void set_lbs(std::vector<Mat3<S>> linear, std::vector<Vec3<S>> offset) {
    lbs_linear_ = std::move(linear);
    lbs_offset_ = std::move(offset);
  }

  int count() const { return static_cast<int>(base_positions_.size()); }
  bool has_lbs() const { return !lbs_linear_.empty(); }

  struct Forward {
    GaussianScene<S> scene;
    std::vector<TexelGaussian<S>> decoded;
    std::vector<Mat3<S>> rot_linear;  // R' entering the covariance
  };

  // `raw` is gaussian-major, kUvChannelCount values per gaussian.
  Forward forward(std::span<const S> raw) const {
    Forward f;
    const int n = count();
    f.decoded.resize(n);
    f.rot_linear.resize(n);
    f.scene.positions.resize(n);
    f.scene.covariances.resize(n);
    f.scene.colors.resize(n);
    f.scene.opacities.resize(n);
    for (int g = 0; g < n; ++g) {
      const TexelGaussian<S> t =
          decode_texel<S>(raw.data() + g * kUvChannelCount, base_positions_[g],
                          base_scales_[g]);
      f.decoded[g] = t;
      const Mat3<S> r_base = quat_to_matrix(t.rotation);
      if (has_lbs()) {
        f.rot_linear[g] = lbs_linear_[g] * r_base;
        f.scene.positions[g] = lbs_linear_[g] * t.position + lbs_offset_[g];
      } else {
        f.rot_linear[g] = r_base;
        f.scene.positions[g] = t.position;
      }
      f.scene.covariances[g] = covariance_from<S>(t.scale, f.rot_linear[g]);
      f.scene.colors[g] = t.color;
      f.scene.opacities[g] = t.opacity;
    }
    return f;
  }

  // Accumulates dL/d raw into `d_raw` (same layout as `raw`).
  void backward(std::span<const S> raw, const Forward& f, const SceneGrad<S>& g,
                std::span<S> d_raw) const {
    const int n = count();
    for (int i = 0; i < n; ++i) {
      Vec3<S> d_scale;
      Mat3<S> d_rot_linear;
      covariance_backward<S>(f.decoded[i].scale, f.rot_linear[i], g.d_covariances[i],
                             d_scale, d_rot_linear);

      TexelGaussianGrad<S> tg;
      tg.d_scale = d_scale;
      tg.d_opacity = g.d_opacities[i];
      tg.d_color = g.d_colors[i];
      Mat3<S> d_r_base;
      if (has_lbs()) {
        tg.d_position = lbs_linear_[i].transpose() * g.d_positions[i];
        d_r_base = lbs_linear_[i].transpose() * d_rot_linear;
      } else {
        tg.d_position = g.d_positions[i];
        d_r_base = d_rot_linear;
      }
      tg.d_rotation = quat_to_matrix_pullback(f.decoded[i].rotation, d_r_base);

      S local[kUvChannelCount];
      decode_texel_backward<S>(raw.data() + i * kUvChannelCount, f.decoded[i], tg, local);
      for (int c = 0; c < kUvChannelCount; ++c)
        d_raw[i * kUvChannelCount + c] += local[c];
    }
  }

 private:
  std::vector<Vec3<S>> base_positions_;
  std::vector<S> base_scales_;
  std::vector<Mat3<S>> lbs_linear_;
  std::vector<Vec3<S>> lbs_offset_;
};

// Chain constants from a bound UV map; LBS from the template's decoded skin
// weights under `transforms` (omit for the canonical pose).
template <class S>
RenderChain<S> make_render_chain(const UvAttributeMap& map, const SkinnedTemplate& tmpl,
                                 const JointTransforms* transforms = nullptr) {
  const int n = map.gaussian_count();
  std::vector<Vec3<S>> base_pos(n);
  std::vector<S> base_scale(n);
  for (int g = 0; g < n; ++g) {
    const TexelBasis basis = texel_basis(tmpl, map.bindings[g], map.width);
    base_pos[g] = basis.position.template cast<S>();
    base_scale[g] = static_cast<S>(basis.scale);
  }
  RenderChain<S> chain(std::move(base_pos), std::move(base_scale));
  if (transforms) {
    std::vector<Mat3<S>> lin(n);
    std::vector<Vec3<S>> off(n);
    for (int g = 0; g < n; ++g) {
      const Eigen::Vector3i& face = tmpl.faces[map.bindings[g].face];
      const JointWeights w =
          blend_skin_weights(tmpl.skin_weights[face[0]], tmpl.skin_weights[face[1]],
                             tmpl.skin_weights[face[2]], map.bindings[g].bary);
      const Mat4d blended = blended_transform(w, *transforms);
      lin[g] = blended.topLeftCorner<3, 3>().cast<S>();
      off[g] = blended.topRightCorner<3, 1>().cast<S>();
    }
    chain.set_lbs(std::move(lin), std::move(off));
  }
  return chain;
}

struct FitConfig {
  int iterations = 2000;
  double learning_rate = 0.03;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.0;
  double lambda_ssim = 0.2;
  double lambda_kl = 1e-6;  // applies only when latent statistics are fitted
  std::vector<int> input_views;  // empty: all provided views
  std::vector<int> eval_views;
  uint64_t seed = 0;
  int views_per_iter = 2;
  int uv_width = 64;
  int uv_height = 64;
  double max_grad_norm = 0.0;  // 0 disables clipping
  int threads = 1;

  void validate() const;
};

struct FitReport {
  std::vector<double> loss_curve;
  std::vector<int> eval_views;
  std::vector<double> eval_psnr;
  std::vector<double> eval_ssim;
  double wall_seconds = 0;
  bool diverged = false;
  int iterations_run = 0;
  int rejected_steps = 0;
};

using FitProgress = std::function<void(int iteration, double loss, double psnr)>;

// Multi-view fit of a UV attribute map against target renders. Raw channels
// start at zero unless `initial` is given. Per iteration a seeded random
// subset of the input views drives an L1 + lambda_ssim * (1 - SSIM) objective
// through the renderer's analytic backward, stepped with AdamW.
std::pair<UvAttributeMap, FitReport> fit_subject(
    const SkinnedTemplate& tmpl,
    const std::vector<std::pair<Camera, ImageBuffer>>& targets, const FitConfig& config,
    const UvAttributeMap* initial = nullptr, const FitProgress& progress = nullptr);

}  // namespace hgs
