#include "hgs/procedural.hpp"

#include <algorithm>
#include <cmath>

namespace hgs {

namespace {

struct CapsuleSpec {
  Eigen::Vector3d a, b;  // axis endpoints (bone line)
  double radius;
  int joint_a, joint_b;     // influences at the two ends (may be equal)
  double ramp_lo, ramp_hi;  // axial window over which weight shifts a -> b
};

double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

class HumanoidBuilder {
 public:
  explicit HumanoidBuilder(int segments) : seg_(segments) {}

  void add_capsule(const CapsuleSpec& c, int chart) {
    const Eigen::Vector3d axis = c.b - c.a;
    const double len = axis.norm();
    const Eigen::Vector3d w = axis / len;
    Eigen::Vector3d u = std::abs(w.y()) < 0.9 ? Eigen::Vector3d::UnitY().cross(w).normalized()
                                              : Eigen::Vector3d::UnitX().cross(w).normalized();
    const Eigen::Vector3d v = w.cross(u);  // {u, v, w} right-handed

    const int cap_rings = 3;
    const int cyl_rings = std::max<int>(3, static_cast<int>(std::ceil(len / 0.04)));
    const double half_pi = M_PI / 2.0;
    const double gen_len = c.radius * M_PI + len;  // generatrix arc length

    // Ring centers/vectors along the generatrix, from bottom pole to top pole.
    struct Ring {
      Eigen::Vector3d center;
      double ring_radius;
      double vparam;
    };
    std::vector<Ring> rings;
    for (int i = 1; i <= cap_rings; ++i) {
      const double phi = half_pi * i / cap_rings;
      rings.push_back({c.a - c.radius * std::cos(phi) * w, c.radius * std::sin(phi),
                       c.radius * phi / gen_len});
    }
    for (int j = 1; j < cyl_rings; ++j) {
      const double f = static_cast<double>(j) / cyl_rings;
      rings.push_back({c.a + f * len * w, c.radius,
                       (c.radius * half_pi + f * len) / gen_len});
    }
    for (int i = 0; i < cap_rings; ++i) {
      const double psi = half_pi * (1.0 - static_cast<double>(i) / cap_rings);
      rings.push_back({c.b + c.radius * std::cos(psi) * w, c.radius * std::sin(psi),
                       (c.radius * (half_pi + (half_pi - psi)) + len) / gen_len});
    }

    const int pole_a = add_vertex(c.a - c.radius * w, c);
    std::vector<std::vector<int>> ring_idx(rings.size());
    for (size_t r = 0; r < rings.size(); ++r) {
      for (int k = 0; k < seg_; ++k) {
        const double theta = 2.0 * M_PI * k / seg_;
        const Eigen::Vector3d p =
            rings[r].center + rings[r].ring_radius * (std::cos(theta) * u + std::sin(theta) * v);
        ring_idx[r].push_back(add_vertex(p, c));
      }
    }
    const int pole_b = add_vertex(c.b + c.radius * w, c);

    // Bottom fan (outward normals point along -w near the pole).
    for (int k = 0; k < seg_; ++k)
      add_face(chart, pole_a, ring_idx[0][(k + 1) % seg_], ring_idx[0][k],
               {uv(k + 0.5, 0.0), uv(k + 1, rings[0].vparam), uv(k, rings[0].vparam)});
    // Side quads.
    for (size_t r = 0; r + 1 < rings.size(); ++r) {
      for (int k = 0; k < seg_; ++k) {
        const int a0 = ring_idx[r][k], a1 = ring_idx[r][(k + 1) % seg_];
        const int b0 = ring_idx[r + 1][k], b1 = ring_idx[r + 1][(k + 1) % seg_];
        const double v0 = rings[r].vparam, v1 = rings[r + 1].vparam;
        add_face(chart, a0, a1, b1, {uv(k, v0), uv(k + 1, v0), uv(k + 1, v1)});
        add_face(chart, a0, b1, b0, {uv(k, v0), uv(k + 1, v1), uv(k, v1)});
      }
    }
    // Top fan.
    const auto& last = ring_idx.back();
    const double vlast = rings.back().vparam;
    for (int k = 0; k < seg_; ++k)
      add_face(chart, pole_b, last[k], last[(k + 1) % seg_],
               {uv(k + 0.5, 1.0), uv(k, vlast), uv(k + 1, vlast)});
  }

  SkinnedTemplate finish(std::vector<Joint> joints) {
    tmpl_.joints = std::move(joints);
    tmpl_.name = "test-humanoid";
    tmpl_.validate();
    return std::move(tmpl_);
  }

 private:
  int add_vertex(const Eigen::Vector3d& p, const CapsuleSpec& c) {
    tmpl_.vertices.push_back(p.cast<float>());
    const Eigen::Vector3d axis = c.b - c.a;
    const double t = std::clamp((p - c.a).dot(axis) / axis.squaredNorm(), 0.0, 1.0);
    JointWeights w;
    if (c.joint_a == c.joint_b) {
      w.add(c.joint_a, 1.f);
    } else {
      const double wb = smoothstep01((t - c.ramp_lo) / (c.ramp_hi - c.ramp_lo));
      if (wb <= 0.0) {
        w.add(c.joint_a, 1.f);
      } else if (wb >= 1.0) {
        w.add(c.joint_b, 1.f);
      } else {
        w.add(c.joint_a, static_cast<float>(1.0 - wb));
        w.add(c.joint_b, static_cast<float>(wb));
      }
    }
    w.normalize();
    tmpl_.skin_weights.push_back(w);
    return static_cast<int>(tmpl_.vertices.size()) - 1;
  }

  // Chart-local uv; `k` may equal seg_ (or be fractional at poles) so the
  // cylinder seam duplicates coordinates, not vertices.
  Vec2f uv(double k, double vparam) const {
    return Vec2f(static_cast<float>(k / seg_), static_cast<float>(vparam));
  }

  void add_face(int chart, int i0, int i1, int i2, std::array<Vec2f, 3> local_uv) {
    tmpl_.faces.emplace_back(i0, i1, i2);
    const float pad = 0.06f;
    const int cx = chart % 4, cy = chart / 4;
    std::array<Vec2f, 3> atlas;
    for (int k = 0; k < 3; ++k) {
      atlas[k].x() = (cx + pad + local_uv[k].x() * (1.f - 2.f * pad)) / 4.f;
      atlas[k].y() = (cy + pad + local_uv[k].y() * (1.f - 2.f * pad)) / 4.f;
    }
    tmpl_.uv_coords.push_back(atlas);
  }

  int seg_;
  SkinnedTemplate tmpl_;
};

}  // namespace

SkinnedTemplate make_test_humanoid(int segments) {
  const Eigen::Vector3d pelvis(0, 0.95, 0), spine(0, 1.15, 0), chest(0, 1.35, 0),
      neck(0, 1.50, 0), head(0, 1.58, 0), head_top(0, 1.72, 0);
  const Eigen::Vector3d l_shoulder(0.20, 1.42, 0), l_elbow(0.46, 1.42, 0),
      l_hand(0.72, 1.42, 0);
  const Eigen::Vector3d r_shoulder(-0.20, 1.42, 0), r_elbow(-0.46, 1.42, 0),
      r_hand(-0.72, 1.42, 0);
  const Eigen::Vector3d l_hip(0.10, 0.90, 0), l_knee(0.10, 0.50, 0), l_foot(0.10, 0.06, 0);
  const Eigen::Vector3d r_hip(-0.10, 0.90, 0), r_knee(-0.10, 0.50, 0), r_foot(-0.10, 0.06, 0);

  std::vector<Joint> joints = {
      {pelvis, -1},     // 0
      {spine, 0},       // 1
      {chest, 1},       // 2
      {neck, 2},        // 3
      {head, 3},        // 4
      {l_shoulder, 2},  // 5
      {l_elbow, 5},     // 6
      {r_shoulder, 2},  // 7
      {r_elbow, 7},     // 8
      {l_hip, 0},       // 9
      {l_knee, 9},      // 10
      {r_hip, 0},       // 11
      {r_knee, 11},     // 12
  };

  const std::vector<CapsuleSpec> capsules = {
      {pelvis, spine, 0.14, 0, 1, 0.5, 1.0},
      {spine, chest, 0.13, 1, 2, 0.5, 1.0},
      {chest, neck, 0.11, 2, 3, 0.5, 1.0},
      {neck, head_top, 0.085, 3, 4, 0.05, 0.35},
      {l_shoulder, l_elbow, 0.050, 5, 6, 0.6, 1.0},
      {l_elbow, l_hand, 0.042, 6, 6, 0, 1},
      {r_shoulder, r_elbow, 0.050, 7, 8, 0.6, 1.0},
      {r_elbow, r_hand, 0.042, 8, 8, 0, 1},
      {l_hip, l_knee, 0.075, 9, 10, 0.6, 1.0},
      {l_knee, l_foot, 0.060, 10, 10, 0, 1},
      {r_hip, r_knee, 0.075, 11, 12, 0.6, 1.0},
      {r_knee, r_foot, 0.060, 12, 12, 0, 1},
  };

  HumanoidBuilder builder(segments);
  for (size_t i = 0; i < capsules.size(); ++i)
    builder.add_capsule(capsules[i], static_cast<int>(i));
  return builder.finish(std::move(joints));
}

}  // namespace hgs
