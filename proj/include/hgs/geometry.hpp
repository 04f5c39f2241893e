#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>

namespace hgs {

template <class S> using Vec2 = Eigen::Matrix<S, 2, 1>;
template <class S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <class S> using Vec4 = Eigen::Matrix<S, 4, 1>;
template <class S> using Mat2 = Eigen::Matrix<S, 2, 2>;
template <class S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <class S> using Mat4 = Eigen::Matrix<S, 4, 4>;
template <class S> using Quat = Eigen::Quaternion<S>;

using Vec2f = Vec2<float>;
using Vec3f = Vec3<float>;
using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Mat4d = Mat4<double>;

// Threshold below which axis-angle maps use their series expansion.
inline constexpr double kSmallAngle = 1e-8;

template <class S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x))
                   : std::exp(x) / (S(1) + std::exp(x));
}

template <class S>
S logit(S p) {
  return std::log(p / (S(1) - p));
}

// Rotation about `angle_axis` with magnitude = rotation angle in radians.
// Below kSmallAngle the second-order expansion of sin(t/2)/t and cos(t/2)
// is used so the map stays smooth through zero.
template <class S>
Quat<S> axis_angle_to_quat(const Vec3<S>& angle_axis) {
  const S t2 = angle_axis.squaredNorm();
  S w, k;
  if (t2 < S(kSmallAngle * kSmallAngle)) {
    w = S(1) - t2 / S(8);
    k = S(0.5) - t2 / S(48);
  } else {
    const S theta = std::sqrt(t2);
    w = std::cos(theta / S(2));
    k = std::sin(theta / S(2)) / theta;
  }
  return Quat<S>(w, k * angle_axis.x(), k * angle_axis.y(), k * angle_axis.z());
}

// Jacobian of axis_angle_to_quat, rows ordered (w, x, y, z).
template <class S>
Eigen::Matrix<S, 4, 3> axis_angle_to_quat_jacobian(const Vec3<S>& angle_axis) {
  const S t2 = angle_axis.squaredNorm();
  S k, g;  // q_v = k r ; g = k'(theta)/theta
  if (t2 < S(kSmallAngle * kSmallAngle)) {
    k = S(0.5) - t2 / S(48);
    g = S(-1) / S(24) + t2 / S(960);
  } else {
    const S theta = std::sqrt(t2);
    const S w = std::cos(theta / S(2));
    k = std::sin(theta / S(2)) / theta;
    g = (S(0.5) * w - k) / t2;
  }
  Eigen::Matrix<S, 4, 3> jac;
  jac.row(0) = (S(-0.5) * k) * angle_axis.transpose();
  jac.template bottomRows<3>() =
      k * Mat3<S>::Identity() + g * (angle_axis * angle_axis.transpose());
  return jac;
}

// Rotation matrix of a unit quaternion (w, x, y, z).
template <class S>
Mat3<S> quat_to_matrix(const Quat<S>& q) {
  const S w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3<S> r;
  r << S(1) - S(2) * (y * y + z * z), S(2) * (x * y - w * z), S(2) * (x * z + w * y),
       S(2) * (x * y + w * z), S(1) - S(2) * (x * x + z * z), S(2) * (y * z - w * x),
       S(2) * (x * z - w * y), S(2) * (y * z + w * x), S(1) - S(2) * (x * x + y * y);
  return r;
}

template <class S>
Mat3<S> axis_angle_to_matrix(const Vec3<S>& angle_axis) {
  return quat_to_matrix(axis_angle_to_quat(angle_axis));
}

// Pullback of a loss gradient through quat_to_matrix: given dL/dR and the
// quaternion at which R was evaluated, returns dL/d(w,x,y,z) of the literal
// unit-quaternion formula.
template <class S>
Vec4<S> quat_to_matrix_pullback(const Quat<S>& q, const Mat3<S>& g) {
  const S w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Vec4<S> d;
  d(0) = S(2) * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) -
                 y * g(2, 0) + x * g(2, 1));
  d(1) = S(2) * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - S(2) * x * g(1, 1) -
                 w * g(1, 2) + z * g(2, 0) + w * g(2, 1) - S(2) * x * g(2, 2));
  d(2) = S(2) * (-S(2) * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) +
                 z * g(1, 2) - w * g(2, 0) + z * g(2, 1) - S(2) * y * g(2, 2));
  d(3) = S(2) * (-S(2) * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                 S(2) * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  return d;
}

// Rotation factor of the polar decomposition M = R P (P symmetric psd).
inline Mat3d polar_rotation(const Mat3d& m) {
  Eigen::JacobiSVD<Mat3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3d flip = Mat3d::Identity();
    flip(2, 2) = -1;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

inline bool is_rotation(const Mat3d& r, double tol = 1e-9) {
  return (r * r.transpose() - Mat3d::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(r.determinant() - 1.0) < tol;
}

}  // namespace hgs
