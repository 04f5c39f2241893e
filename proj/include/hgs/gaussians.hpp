#pragma once

#include "hgs/body.hpp"
#include "hgs/geometry.hpp"

#include <cstdint>
#include <vector>

namespace hgs {

// Raw channel planes of a UV attribute map, in file order.
enum UvChannel : int {
  kUvPosX = 0, kUvPosY, kUvPosZ,
  kUvScaleX, kUvScaleY, kUvScaleZ,
  kUvRotX, kUvRotY, kUvRotZ,
  kUvOpacity,
  kUvColorR, kUvColorG, kUvColorB,
};
inline constexpr int kUvChannelCount = 13;

struct TexelBinding {
  int32_t face = 0;
  Vec3f bary = Vec3f::Zero();
};

// Texel grid of raw Gaussian attributes bound to template surface points.
// Gaussian k corresponds to the k-th valid texel in row-major scan order.
struct UvAttributeMap {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> valid;         // width*height, row-major
  std::vector<float> planes;          // kUvChannelCount planes of width*height
  std::vector<int32_t> texel_index;   // per gaussian: y*width + x
  std::vector<TexelBinding> bindings; // per gaussian

  int gaussian_count() const { return static_cast<int>(texel_index.size()); }

  float& channel(int plane, int texel) {
    return planes[static_cast<size_t>(plane) * width * height + texel];
  }
  float channel(int plane, int texel) const {
    return planes[static_cast<size_t>(plane) * width * height + texel];
  }

  void validate(const SkinnedTemplate& tmpl) const;
};

// Rasterizes the template's UV atlas onto a w x h texel grid: texels whose
// center falls inside a UV triangle become valid and get a surface binding.
// Raw channels start at zero.
UvAttributeMap build_uv_map(const SkinnedTemplate& tmpl, int width, int height);

// Recomputed per-texel decode bases: surface point and isotropic scale prior.
struct TexelBasis {
  Vec3d position;
  double scale;  // texel footprint in meters, clamped to [1e-4, 0.05]
};
TexelBasis texel_basis(const SkinnedTemplate& tmpl, const TexelBinding& binding,
                       int map_width);

struct CanonicalGaussians {
  std::vector<Vec3d> positions;
  std::vector<Vec3d> scales;
  std::vector<Quat<double>> rotations;
  std::vector<double> opacities;
  std::vector<Vec3d> colors;
  std::vector<JointWeights> skin_weights;

  int count() const { return static_cast<int>(positions.size()); }
};

struct PosedGaussians {
  std::vector<Vec3d> positions;
  std::vector<Vec3d> scales;
  std::vector<Quat<double>> rotations;  // polar rotation factor of R'
  std::vector<double> opacities;
  std::vector<Vec3d> colors;
  std::vector<Mat3d> rot_linear;  // R' = T_lin R, used for covariance

  int count() const { return static_cast<int>(positions.size()); }
};

CanonicalGaussians decode_uv(const UvAttributeMap& map, const SkinnedTemplate& tmpl);

PosedGaussians pose_gaussians(const CanonicalGaussians& g, const JointTransforms& transforms);

// Sigma = R diag(s)^2 R^T for a unit quaternion; throws std::domain_error on
// non-positive scales.
Mat3d covariance(const Vec3d& scale, const Quat<double>& rotation);

// ---------------------------------------------------------------------------
// Templated cores shared by the production path and the f64 gradient checks.

template <class S>
Mat3<S> covariance_from(const Vec3<S>& scale, const Mat3<S>& r) {
  return r * scale.cwiseProduct(scale).asDiagonal() * r.transpose();
}

// Pullback through covariance_from; `g` is dL/dSigma accumulated entrywise.
template <class S>
void covariance_backward(const Vec3<S>& scale, const Mat3<S>& r, const Mat3<S>& g,
                         Vec3<S>& d_scale, Mat3<S>& d_r) {
  const Mat3<S> sym = g + g.transpose();
  d_r = sym * r * scale.cwiseProduct(scale).asDiagonal();
  const Mat3<S> rtgr = r.transpose() * g * r;
  for (int k = 0; k < 3; ++k) d_scale(k) = S(2) * scale(k) * rtgr(k, k);
}

// Raw texel channels -> activated Gaussian attributes.
template <class S>
struct TexelGaussian {
  Vec3<S> position;
  Vec3<S> scale;
  Quat<S> rotation;
  S opacity;
  Vec3<S> color;
};

template <class S>
TexelGaussian<S> decode_texel(const S raw[kUvChannelCount], const Vec3<S>& base_position,
                              S base_scale) {
  TexelGaussian<S> out;
  out.position = base_position + Vec3<S>(raw[kUvPosX], raw[kUvPosY], raw[kUvPosZ]);
  out.scale = base_scale * Vec3<S>(std::exp(raw[kUvScaleX]), std::exp(raw[kUvScaleY]),
                                   std::exp(raw[kUvScaleZ]));
  out.rotation = axis_angle_to_quat(Vec3<S>(raw[kUvRotX], raw[kUvRotY], raw[kUvRotZ]));
  out.opacity = sigmoid(raw[kUvOpacity]);
  out.color = Vec3<S>(sigmoid(raw[kUvColorR]), sigmoid(raw[kUvColorG]),
                      sigmoid(raw[kUvColorB]));
  return out;
}

template <class S>
struct TexelGaussianGrad {
  Vec3<S> d_position = Vec3<S>::Zero();
  Vec3<S> d_scale = Vec3<S>::Zero();
  Vec4<S> d_rotation = Vec4<S>::Zero();  // wrt quaternion (w, x, y, z)
  S d_opacity = S(0);
  Vec3<S> d_color = Vec3<S>::Zero();
};

template <class S>
void decode_texel_backward(const S raw[kUvChannelCount], const TexelGaussian<S>& fwd,
                           const TexelGaussianGrad<S>& g, S d_raw[kUvChannelCount]) {
  for (int k = 0; k < 3; ++k) {
    d_raw[kUvPosX + k] = g.d_position(k);
    d_raw[kUvScaleX + k] = g.d_scale(k) * fwd.scale(k);
    const S c = fwd.color(k);
    d_raw[kUvColorR + k] = g.d_color(k) * c * (S(1) - c);
  }
  const Eigen::Matrix<S, 4, 3> jq =
      axis_angle_to_quat_jacobian(Vec3<S>(raw[kUvRotX], raw[kUvRotY], raw[kUvRotZ]));
  const Vec3<S> d_rot = jq.transpose() * g.d_rotation;
  for (int k = 0; k < 3; ++k) d_raw[kUvRotX + k] = d_rot(k);
  d_raw[kUvOpacity] = g.d_opacity * fwd.opacity * (S(1) - fwd.opacity);
}

// Blends at most 12 vertex influences barycentrically, keeps the 4 largest
// and renormalizes.
JointWeights blend_skin_weights(const JointWeights& w0, const JointWeights& w1,
                                const JointWeights& w2, const Vec3f& bary);

}  // namespace hgs
