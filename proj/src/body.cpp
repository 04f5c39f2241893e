#include "hgs/body.hpp"

#include <cmath>
#include <stdexcept>

namespace hgs {

void SkinnedTemplate::validate() const {
  int roots = 0;
  for (size_t j = 0; j < joints.size(); ++j) {
    if (joints[j].parent < 0) {
      ++roots;
    } else if (joints[j].parent >= static_cast<int>(j)) {
      throw std::invalid_argument("template: joints are not topologically sorted");
    }
  }
  if (roots != 1) throw std::invalid_argument("template: expected exactly one root joint");

  for (size_t v = 0; v < skin_weights.size(); ++v) {
    const auto& w = skin_weights[v];
    float sum = 0.f;
    for (int i = 0; i < w.count; ++i) {
      if (w.weights[i] < 0.f) throw std::invalid_argument("template: negative skin weight");
      if (w.joints[i] < 0 || w.joints[i] >= joint_count())
        throw std::invalid_argument("template: skin weight joint out of range");
      sum += w.weights[i];
    }
    if (std::abs(sum - 1.f) > 1e-6f)
      throw std::invalid_argument("template: skin weights do not sum to 1");
  }
  if (skin_weights.size() != vertices.size())
    throw std::invalid_argument("template: one weight list per vertex required");
  if (uv_coords.size() != faces.size())
    throw std::invalid_argument("template: one uv triple per face required");

  for (size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (faces[f][k] < 0 || faces[f][k] >= vertex_count())
        throw std::invalid_argument("template: face index out of range");
      const Vec2f& uv = uv_coords[f][k];
      if (uv.x() < 0.f || uv.x() > 1.f || uv.y() < 0.f || uv.y() > 1.f)
        throw std::invalid_argument("template: uv coordinate outside [0,1]");
    }
  }
}

namespace {

// Rigid transform rotating by R about `center`, then translating by t.
Mat4d rotation_about(const Mat3d& r, const Eigen::Vector3d& center,
                     const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
  Mat4d m = Mat4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = center - r * center + t;
  return m;
}

}  // namespace

JointTransforms forward_kinematics(const SkinnedTemplate& tmpl, const Pose& pose) {
  const int n = tmpl.joint_count();
  if (static_cast<int>(pose.joint_rotations.size()) != n)
    throw std::invalid_argument("forward_kinematics: pose joint count mismatch");

  JointTransforms out;
  out.world_from_canonical.resize(n);
  for (int j = 0; j < n; ++j) {
    const Joint& joint = tmpl.joints[j];
    const Mat3d local_rot = axis_angle_to_matrix<double>(pose.joint_rotations[j]);
    if (joint.parent < 0) {
      const Mat3d root_rot =
          axis_angle_to_matrix<double>(pose.root_rotation) * local_rot;
      out.world_from_canonical[j] =
          rotation_about(root_rot, joint.rest_position, pose.root_translation);
    } else {
      out.world_from_canonical[j] =
          out.world_from_canonical[joint.parent] *
          rotation_about(local_rot, joint.rest_position);
    }
  }
  return out;
}

std::vector<Vec3d> skin_points(std::span<const Vec3d> points,
                               std::span<const JointWeights> weights,
                               const JointTransforms& transforms) {
  if (points.size() != weights.size())
    throw std::invalid_argument("skin_points: one weight list per point required");

  std::vector<Vec3d> out(points.size());
  for (size_t p = 0; p < points.size(); ++p) {
    const JointWeights& w = weights[p];
    Vec3d acc = Vec3d::Zero();
    double wsum = 0.0;
    for (int i = 0; i < w.count; ++i) {
      if (w.joints[i] < 0 || w.joints[i] >= transforms.count())
        throw std::out_of_range("skin_points: weight references unknown joint");
      const Mat4d& b = transforms.world_from_canonical[w.joints[i]];
      acc += static_cast<double>(w.weights[i]) *
             (b.topLeftCorner<3, 3>() * points[p] + b.topRightCorner<3, 1>());
      wsum += w.weights[i];
    }
    if (wsum <= 0.0) throw std::domain_error("skin_points: weights sum to zero");
    // Dividing by the (nominally 1) weight sum keeps the rest pose an exact
    // fixed point despite f32 weight round-off.
    out[p] = acc / wsum;
  }
  return out;
}

Mat4d blended_transform(const JointWeights& weights,
                        const JointTransforms& transforms,
                        bool orthonormalize) {
  if (weights.count == 0)
    throw std::domain_error("blended_transform: empty weight list");

  Mat4d t = Mat4d::Zero();
  double wsum = 0.0;
  for (int i = 0; i < weights.count; ++i) {
    if (weights.joints[i] < 0 || weights.joints[i] >= transforms.count())
      throw std::out_of_range("blended_transform: weight references unknown joint");
    t += static_cast<double>(weights.weights[i]) *
         transforms.world_from_canonical[weights.joints[i]];
    wsum += weights.weights[i];
  }
  if (wsum <= 0.0) throw std::domain_error("blended_transform: weights sum to zero");
  t /= wsum;
  if (orthonormalize) t.topLeftCorner<3, 3>() = polar_rotation(t.topLeftCorner<3, 3>());
  return t;
}

}  // namespace hgs
