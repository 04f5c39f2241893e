#pragma once

#include "hgs/geometry.hpp"
#include "hgs/image.hpp"

namespace hgs {

// Pinhole camera, OpenCV convention: x right, y down, z forward; world-to-
// camera extrinsics. Pixel (ix, iy) has its center at (ix + 0.5, iy + 0.5).
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Mat3d rotation = Mat3d::Identity();          // world-to-camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double near = 0.1, far = 100.0;

  Eigen::Vector3d position() const { return -rotation.transpose() * translation; }

  void validate() const;

  static Camera look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double fx, double fy, int width,
                        int height, double near = 0.1, double far = 100.0);
};

// Per-pixel Pluecker ray coordinates: unit direction d through the pixel
// center and moment o x d for camera origin o, as a 6-channel image (d, m).
ImageBuffer plucker_embedding(const Camera& camera);

}  // namespace hgs
