#include "hgs/gaussians.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hgs {

void UvAttributeMap::validate(const SkinnedTemplate& tmpl) const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("uv map: empty grid");
  if (valid.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("uv map: mask size mismatch");
  if (planes.size() != static_cast<size_t>(kUvChannelCount) * width * height)
    throw std::invalid_argument("uv map: plane size mismatch");
  if (texel_index.size() != bindings.size())
    throw std::invalid_argument("uv map: binding/texel arrays disagree");
  if (bindings.empty()) throw std::invalid_argument("uv map: no valid texels");
  for (const TexelBinding& b : bindings) {
    if (b.face < 0 || b.face >= tmpl.face_count())
      throw std::out_of_range("uv map: binding face index out of range");
    const float sum = b.bary.sum();
    if (b.bary.minCoeff() < -1e-6f || std::abs(sum - 1.f) > 1e-5f)
      throw std::invalid_argument("uv map: invalid barycentric coordinates");
  }
}

UvAttributeMap build_uv_map(const SkinnedTemplate& tmpl, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("build_uv_map: empty grid");
  UvAttributeMap map;
  map.width = width;
  map.height = height;
  map.valid.assign(static_cast<size_t>(width) * height, 0);
  map.planes.assign(static_cast<size_t>(kUvChannelCount) * width * height, 0.f);

  // Conservative per-face texel rasterization; first face claiming a texel wins.
  std::vector<int32_t> face_of(static_cast<size_t>(width) * height, -1);
  std::vector<Vec3f> bary_of(static_cast<size_t>(width) * height);
  for (int f = 0; f < tmpl.face_count(); ++f) {
    const auto& uv = tmpl.uv_coords[f];
    const double ax = uv[0].x() * width, ay = uv[0].y() * height;
    const double bx = uv[1].x() * width, by = uv[1].y() * height;
    const double cx = uv[2].x() * width, cy = uv[2].y() * height;
    const double det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay);
    if (std::abs(det) < 1e-12) continue;  // degenerate chart triangle

    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({ax, bx, cx}) - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({ax, bx, cx}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({ay, by, cy}) - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({ay, by, cy}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const size_t t = static_cast<size_t>(y) * width + x;
        if (face_of[t] >= 0) continue;
        const double px = x + 0.5, py = y + 0.5;
        const double w1 = ((px - ax) * (cy - ay) - (cx - ax) * (py - ay)) / det;
        const double w2 = ((bx - ax) * (py - ay) - (px - ax) * (by - ay)) / det;
        const double w0 = 1.0 - w1 - w2;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        face_of[t] = f;
        bary_of[t] = Vec3f(static_cast<float>(w0), static_cast<float>(w1),
                           static_cast<float>(w2));
      }
    }
  }

  for (size_t t = 0; t < face_of.size(); ++t) {
    if (face_of[t] < 0) continue;
    map.valid[t] = 1;
    map.texel_index.push_back(static_cast<int32_t>(t));
    map.bindings.push_back({face_of[t], bary_of[t]});
  }
  if (map.bindings.empty())
    throw std::invalid_argument("build_uv_map: no texel fell inside the uv atlas");
  return map;
}

TexelBasis texel_basis(const SkinnedTemplate& tmpl, const TexelBinding& binding,
                       int map_width) {
  if (binding.face < 0 || binding.face >= tmpl.face_count())
    throw std::out_of_range("texel_basis: face index out of range");
  const Eigen::Vector3i& face = tmpl.faces[binding.face];
  const Vec3d p0 = tmpl.vertices[face[0]].cast<double>();
  const Vec3d p1 = tmpl.vertices[face[1]].cast<double>();
  const Vec3d p2 = tmpl.vertices[face[2]].cast<double>();

  TexelBasis basis;
  basis.position = binding.bary.x() * p0 + binding.bary.y() * p1 + binding.bary.z() * p2;

  const auto& uv = tmpl.uv_coords[binding.face];
  const double area_world = 0.5 * (p1 - p0).cross(p2 - p0).norm();
  const Eigen::Vector2d e1 = (uv[1] - uv[0]).cast<double>();
  const Eigen::Vector2d e2 = (uv[2] - uv[0]).cast<double>();
  const double area_uv = 0.5 * std::abs(e1.x() * e2.y() - e1.y() * e2.x());
  double footprint = 0.0;
  if (area_uv > 1e-16) footprint = std::sqrt(area_world / area_uv) / map_width;
  basis.scale = std::clamp(footprint, 1e-4, 0.05);
  return basis;
}

JointWeights blend_skin_weights(const JointWeights& w0, const JointWeights& w1,
                                const JointWeights& w2, const Vec3f& bary) {
  struct Entry {
    int32_t joint;
    float weight;
  };
  Entry merged[12];
  int n = 0;
  auto accumulate = [&](const JointWeights& w, float b) {
    for (int i = 0; i < w.count; ++i) {
      const float contribution = b * w.weights[i];
      if (contribution == 0.f) continue;
      bool found = false;
      for (int k = 0; k < n; ++k) {
        if (merged[k].joint == w.joints[i]) {
          merged[k].weight += contribution;
          found = true;
          break;
        }
      }
      if (!found) merged[n++] = {w.joints[i], contribution};
    }
  };
  accumulate(w0, bary.x());
  accumulate(w1, bary.y());
  accumulate(w2, bary.z());

  std::sort(merged, merged + n, [](const Entry& a, const Entry& b) {
    return a.weight != b.weight ? a.weight > b.weight : a.joint < b.joint;
  });
  JointWeights out;
  for (int i = 0; i < std::min(n, 4); ++i) out.add(merged[i].joint, merged[i].weight);
  out.normalize();
  return out;
}

CanonicalGaussians decode_uv(const UvAttributeMap& map, const SkinnedTemplate& tmpl) {
  map.validate(tmpl);
  const int n = map.gaussian_count();

  CanonicalGaussians g;
  g.positions.resize(n);
  g.scales.resize(n);
  g.rotations.resize(n);
  g.opacities.resize(n);
  g.colors.resize(n);
  g.skin_weights.resize(n);

  for (int k = 0; k < n; ++k) {
    const TexelBinding& binding = map.bindings[k];
    const TexelBasis basis = texel_basis(tmpl, binding, map.width);

    double raw[kUvChannelCount];
    for (int c = 0; c < kUvChannelCount; ++c) raw[c] = map.channel(c, map.texel_index[k]);
    const TexelGaussian<double> t = decode_texel<double>(raw, basis.position, basis.scale);
    g.positions[k] = t.position;
    g.scales[k] = t.scale;
    g.rotations[k] = t.rotation;
    g.opacities[k] = t.opacity;
    g.colors[k] = t.color;

    const Eigen::Vector3i& face = tmpl.faces[binding.face];
    g.skin_weights[k] =
        blend_skin_weights(tmpl.skin_weights[face[0]], tmpl.skin_weights[face[1]],
                           tmpl.skin_weights[face[2]], binding.bary);
  }
  return g;
}

PosedGaussians pose_gaussians(const CanonicalGaussians& g, const JointTransforms& transforms) {
  PosedGaussians out;
  const int n = g.count();
  out.positions.resize(n);
  out.scales = g.scales;
  out.rotations.resize(n);
  out.opacities = g.opacities;
  out.colors = g.colors;
  out.rot_linear.resize(n);

  for (int k = 0; k < n; ++k) {
    const Mat4d blended = blended_transform(g.skin_weights[k], transforms);
    const Mat3d lin = blended.topLeftCorner<3, 3>();
    out.positions[k] = lin * g.positions[k] + blended.topRightCorner<3, 1>();

    const Mat3d r_prime = lin * quat_to_matrix(g.rotations[k]);
    out.rot_linear[k] = r_prime;
    out.rotations[k] = Quat<double>(polar_rotation(r_prime));
  }
  return out;
}

Mat3d covariance(const Vec3d& scale, const Quat<double>& rotation) {
  if (scale.minCoeff() <= 0.0)
    throw std::domain_error("covariance: scales must be strictly positive");
  return covariance_from<double>(scale, quat_to_matrix(rotation));
}

}  // namespace hgs
