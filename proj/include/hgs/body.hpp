#pragma once

#include "hgs/geometry.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hgs {

// Sparse per-point joint influence, at most four entries.
struct JointWeights {
  std::array<int32_t, 4> joints{{0, 0, 0, 0}};
  std::array<float, 4> weights{{0.f, 0.f, 0.f, 0.f}};
  int count = 0;

  void add(int32_t joint, float weight) {
    joints[count] = joint;
    weights[count] = weight;
    ++count;
  }
  float sum() const {
    float s = 0.f;
    for (int i = 0; i < count; ++i) s += weights[i];
    return s;
  }
  void normalize() {
    const float s = sum();
    if (s > 0.f)
      for (int i = 0; i < count; ++i) weights[i] /= s;
  }
};

struct Joint {
  Eigen::Vector3d rest_position = Eigen::Vector3d::Zero();
  int parent = -1;  // -1 for the root
};

// Rest-pose mesh with a joint hierarchy, skinning weights and a UV atlas.
// Joints are topologically sorted: parent index of joint j is < j.
struct SkinnedTemplate {
  std::string name;
  std::vector<Vec3f> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::vector<std::array<Vec2f, 3>> uv_coords;  // per face corner, in [0,1]^2
  std::vector<Joint> joints;
  std::vector<JointWeights> skin_weights;  // per vertex

  int joint_count() const { return static_cast<int>(joints.size()); }
  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

struct Pose {
  Eigen::Vector3d root_translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d root_rotation = Eigen::Vector3d::Zero();  // axis-angle
  std::vector<Eigen::Vector3d> joint_rotations;             // axis-angle, per joint

  static Pose rest(int joint_count) {
    Pose p;
    p.joint_rotations.assign(joint_count, Eigen::Vector3d::Zero());
    return p;
  }
};

// Per-joint rigid transforms B_i taking canonical space to posed space.
struct JointTransforms {
  std::vector<Mat4d> world_from_canonical;

  int count() const { return static_cast<int>(world_from_canonical.size()); }
  static JointTransforms identity(int joint_count) {
    JointTransforms t;
    t.world_from_canonical.assign(joint_count, Mat4d::Identity());
    return t;
  }
};

// Each joint rotates about its own rest position, so the rest pose maps to
// the identity transform; the root additionally translates.
JointTransforms forward_kinematics(const SkinnedTemplate& tmpl, const Pose& pose);

std::vector<Vec3d> skin_points(std::span<const Vec3d> points,
                               std::span<const JointWeights> weights,
                               const JointTransforms& transforms);

// T = sum_i w_i B_i. The result is not re-orthonormalized; pass
// orthonormalize=true to replace the linear block by its polar rotation.
Mat4d blended_transform(const JointWeights& weights,
                        const JointTransforms& transforms,
                        bool orthonormalize = false);

}  // namespace hgs
