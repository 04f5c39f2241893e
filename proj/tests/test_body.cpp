#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgs/body.hpp"
#include "hgs/procedural.hpp"
#include "hgs/random.hpp"

#include <cstring>

using namespace hgs;

namespace {

// Two-joint chain along +y with one vertex per joint region.
SkinnedTemplate two_joint_chain() {
  SkinnedTemplate t;
  t.name = "chain";
  t.joints = {{Eigen::Vector3d(0, 0, 0), -1}, {Eigen::Vector3d(0, 1, 0), 0}};
  t.vertices = {Vec3f(0, 0.2f, 0), Vec3f(0, 1.2f, 0), Vec3f(0.5f, 0.5f, 0)};
  t.faces = {Eigen::Vector3i(0, 1, 2)};
  t.uv_coords = {{Vec2f(0.1f, 0.1f), Vec2f(0.9f, 0.1f), Vec2f(0.5f, 0.9f)}};
  JointWeights w0, w1, w2;
  w0.add(0, 1.f);
  w1.add(1, 1.f);
  w2.add(0, 0.5f);
  w2.add(1, 0.5f);
  t.skin_weights = {w0, w1, w2};
  t.validate();
  return t;
}

Mat4d rigid(const Mat3d& r, const Eigen::Vector3d& t) {
  Mat4d m = Mat4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

}  // namespace

TEST_CASE("identity pose gives identity transforms") {
  const SkinnedTemplate t = two_joint_chain();
  const JointTransforms b = forward_kinematics(t, Pose::rest(t.joint_count()));
  REQUIRE(b.count() == 2);
  for (const Mat4d& m : b.world_from_canonical)
    CHECK((m - Mat4d::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("root rotation of pi about +z rotates the child through the root") {
  const SkinnedTemplate t = two_joint_chain();
  Pose pose = Pose::rest(2);
  pose.root_rotation = Eigen::Vector3d(0, 0, M_PI);
  const JointTransforms b = forward_kinematics(t, pose);

  // Oracle: hand-composed rigid transform T(j0) R T(-j0) with j0 = origin.
  const Mat3d r = axis_angle_to_matrix<double>(pose.root_rotation);
  const Mat4d expected = rigid(r, Eigen::Vector3d::Zero());
  CHECK((b.world_from_canonical[0] - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((b.world_from_canonical[1] - expected).cwiseAbs().maxCoeff() < 1e-15);

  const Eigen::Vector3d child = t.joints[1].rest_position;
  const Eigen::Vector3d posed = b.world_from_canonical[1].topLeftCorner<3, 3>() * child +
                                b.world_from_canonical[1].topRightCorner<3, 1>();
  CHECK((posed - Eigen::Vector3d(0, -1, 0)).norm() < 1e-12);
}

TEST_CASE("child joint rotates about its own rest position") {
  const SkinnedTemplate t = two_joint_chain();
  Pose pose = Pose::rest(2);
  pose.joint_rotations[1] = Eigen::Vector3d(0, 0, M_PI / 2);
  const JointTransforms b = forward_kinematics(t, pose);

  // Matrix-product oracle: B1 = B0 * (T(j1) Rz T(-j1)), B0 = I.
  const Mat3d rz = axis_angle_to_matrix<double>(pose.joint_rotations[1]);
  const Eigen::Vector3d j1 = t.joints[1].rest_position;
  Mat4d expected = rigid(rz, j1 - rz * j1);
  CHECK((b.world_from_canonical[1] - expected).cwiseAbs().maxCoeff() < 1e-15);
  // The joint's own rest position is a fixed point.
  const Eigen::Vector3d posed = rz * j1 + (j1 - rz * j1);
  CHECK((posed - j1).norm() < 1e-15);
}

TEST_CASE("single joint pure root translation") {
  SkinnedTemplate t;
  t.joints = {{Eigen::Vector3d(0, 0, 0), -1}};
  t.vertices = {Vec3f(1, 2, 3)};
  t.faces = {Eigen::Vector3i(0, 0, 0)};
  t.uv_coords = {{Vec2f(0, 0), Vec2f(1, 0), Vec2f(0, 1)}};
  JointWeights w;
  w.add(0, 1.f);
  t.skin_weights = {w};

  Pose pose = Pose::rest(1);
  pose.root_translation = Eigen::Vector3d(0, 0, 1);
  const JointTransforms b = forward_kinematics(t, pose);
  Mat4d expected = Mat4d::Identity();
  expected(2, 3) = 1.0;
  CHECK((b.world_from_canonical[0] - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward kinematics rejects joint-count mismatch") {
  const SkinnedTemplate t = two_joint_chain();
  Pose pose = Pose::rest(3);
  CHECK_THROWS_AS(forward_kinematics(t, pose), std::invalid_argument);
}

TEST_CASE("skin_points identity and single-joint cases") {
  const JointTransforms id = JointTransforms::identity(2);
  const std::vector<Vec3d> pts = {Vec3d(0.1, 0.2, 0.3), Vec3d(-1, 2, 0.5)};
  JointWeights w0, w1;
  w0.add(0, 0.25f);
  w0.add(1, 0.75f);
  w1.add(1, 1.f);
  const std::vector<JointWeights> ws = {w0, w1};

  const auto out = skin_points(pts, ws, id);
  CHECK((out[0] - pts[0]).norm() == 0.0);
  CHECK((out[1] - pts[1]).norm() == 0.0);

  JointTransforms moved = id;
  moved.world_from_canonical[1](0, 3) = 2.0;
  const auto out2 = skin_points(pts, ws, moved);
  CHECK((out2[1] - (pts[1] + Vec3d(2, 0, 0))).norm() == 0.0);  // weight 1.0 on joint 1
}

TEST_CASE("skin_points blends two translations linearly") {
  JointTransforms t = JointTransforms::identity(2);
  const Vec3d t0(1, 0, 0), t1(0, 2, 4);
  t.world_from_canonical[0].topRightCorner<3, 1>() = t0;
  t.world_from_canonical[1].topRightCorner<3, 1>() = t1;
  JointWeights w;
  w.add(0, 0.5f);
  w.add(1, 0.5f);
  const std::vector<Vec3d> pts = {Vec3d(3, -1, 2)};
  const std::vector<JointWeights> ws = {w};
  const auto out = skin_points(pts, ws, t);
  CHECK((out[0] - (pts[0] + (t0 + t1) / 2)).norm() < 1e-15);
}

TEST_CASE("skin_points rejects out-of-range joints") {
  const JointTransforms id = JointTransforms::identity(1);
  JointWeights w;
  w.add(3, 1.f);
  const std::vector<Vec3d> pts = {Vec3d::Zero()};
  const std::vector<JointWeights> ws = {w};
  CHECK_THROWS_AS(skin_points(pts, ws, id), std::out_of_range);
}

TEST_CASE("blended_transform cases") {
  JointTransforms t = JointTransforms::identity(2);
  t.world_from_canonical[0] =
      rigid(axis_angle_to_matrix<double>(Eigen::Vector3d(0, 0, M_PI / 2)), Vec3d(1, 2, 3));
  t.world_from_canonical[1] =
      rigid(axis_angle_to_matrix<double>(Eigen::Vector3d(0, 0, -M_PI / 2)), Vec3d(0, 0, 0));

  JointWeights single;
  single.add(0, 1.f);
  CHECK((blended_transform(single, t) - t.world_from_canonical[0]).cwiseAbs().maxCoeff() ==
        0.0);

  JointWeights same;
  same.add(0, 0.5f);
  same.add(0, 0.5f);
  CHECK((blended_transform(same, t) - t.world_from_canonical[0]).cwiseAbs().maxCoeff() <
        1e-15);

  // Averaging +-90 degree z-rotations collapses the linear block.
  JointWeights both;
  both.add(0, 0.5f);
  both.add(1, 0.5f);
  const Mat4d blended = blended_transform(both, t);
  const Mat4d average =
      0.5 * t.world_from_canonical[0] + 0.5 * t.world_from_canonical[1];
  CHECK((blended - average).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(blended.topLeftCorner<3, 3>().determinant() < 1.0 - 1e-6);

  // Optional polar cleanup restores a rotation.
  const Mat4d cleaned = blended_transform(both, t, true);
  CHECK(is_rotation(cleaned.topLeftCorner<3, 3>()));

  JointWeights empty;
  CHECK_THROWS_AS(blended_transform(empty, t), std::domain_error);
}

TEST_CASE("rigidity: root-only poses move all vertices rigidly") {
  const SkinnedTemplate t = make_test_humanoid();
  Rng rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    Pose pose = Pose::rest(t.joint_count());
    pose.root_rotation =
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.8;
    pose.root_translation = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    const JointTransforms b = forward_kinematics(t, pose);

    std::vector<Vec3d> pts(t.vertex_count());
    for (int i = 0; i < t.vertex_count(); ++i) pts[i] = t.vertices[i].cast<double>();
    const auto skinned = skin_points(pts, t.skin_weights, b);

    const Mat3d r = axis_angle_to_matrix<double>(pose.root_rotation);
    const Eigen::Vector3d j0 = t.joints[0].rest_position;
    double max_err = 0;
    for (int i = 0; i < t.vertex_count(); ++i) {
      const Vec3d expected = r * (pts[i] - j0) + j0 + pose.root_translation;
      max_err = std::max(max_err, (skinned[i] - expected).norm());
    }
    CHECK(max_err < 1e-9);
  }
}

TEST_CASE("partition of unity: common transform factors out of the blend") {
  Rng rng(11);
  Mat4d g = Mat4d::Identity();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) g(r, c) = rng.normal();
  JointTransforms t;
  t.world_from_canonical = {g, g, g};

  JointWeights w;
  w.add(0, 0.2f);
  w.add(1, 0.5f);
  w.add(2, 0.3f);
  const std::vector<Vec3d> pts = {Vec3d(0.3, -0.4, 1.7)};
  const std::vector<JointWeights> ws = {w};
  const auto out = skin_points(pts, ws, t);
  const Vec3d expected = g.topLeftCorner<3, 3>() * pts[0] + g.topRightCorner<3, 1>();
  CHECK((out[0] - expected).norm() < 1e-12);
}

TEST_CASE("forward kinematics is deterministic") {
  const SkinnedTemplate t = make_test_humanoid();
  Pose pose = Pose::rest(t.joint_count());
  for (int j = 0; j < t.joint_count(); ++j)
    pose.joint_rotations[j] = Eigen::Vector3d(0.1 * j, -0.05 * j, 0.02 * j);
  const JointTransforms a = forward_kinematics(t, pose);
  const JointTransforms b = forward_kinematics(t, pose);
  for (int j = 0; j < t.joint_count(); ++j)
    CHECK(std::memcmp(a.world_from_canonical[j].data(), b.world_from_canonical[j].data(),
                      sizeof(double) * 16) == 0);
}

TEST_CASE("template validation rejects broken invariants") {
  SkinnedTemplate t = two_joint_chain();
  SUBCASE("unsorted joints") {
    t.joints[0].parent = 1;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("weights not normalized") {
    t.skin_weights[0].weights[0] = 0.7f;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("face index out of range") {
    t.faces[0][1] = 99;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("uv outside unit square") {
    t.uv_coords[0][0].x() = 1.5f;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
}

TEST_CASE("procedural humanoid is a valid closed template") {
  const SkinnedTemplate t = make_test_humanoid();
  CHECK(t.joint_count() == 13);
  CHECK(t.vertex_count() > 1200);
  CHECK(t.vertex_count() < 4000);
  CHECK(t.face_count() > 2000);

  // Outward orientation: positive signed volume per capsule-ish mesh.
  double volume = 0;
  for (const auto& f : t.faces) {
    const Vec3d a = t.vertices[f[0]].cast<double>();
    const Vec3d b = t.vertices[f[1]].cast<double>();
    const Vec3d c = t.vertices[f[2]].cast<double>();
    volume += a.dot(b.cross(c)) / 6.0;
  }
  CHECK(volume > 0.0);

  for (const auto& w : t.skin_weights) {
    CHECK(w.count >= 1);
    CHECK(w.count <= 2);
  }
}
