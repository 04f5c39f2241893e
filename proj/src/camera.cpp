#include "hgs/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace hgs {

void Camera::validate() const {
  if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: empty image plane");
  if (!(0 < near && near < far)) throw std::invalid_argument("camera: need 0 < near < far");
  if (!is_rotation(rotation))
    throw std::invalid_argument("camera: extrinsic rotation is not orthonormal");
}

Camera look_at_impl(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                    Eigen::Vector3d up) {
  Camera cam;
  const Eigen::Vector3d forward = (target - position).normalized();
  if (std::abs(forward.dot(up.normalized())) > 0.999) up = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d x_cam = forward.cross(up).normalized();
  const Eigen::Vector3d y_cam = forward.cross(x_cam);  // points image-down
  cam.rotation.row(0) = x_cam;
  cam.rotation.row(1) = y_cam;
  cam.rotation.row(2) = forward;
  cam.translation = -cam.rotation * position;
  return cam;
}

Camera Camera::look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double fx, double fy, int width,
                       int height, double near, double far) {
  Camera cam = look_at_impl(position, target, up);
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  cam.near = near;
  cam.far = far;
  cam.validate();
  return cam;
}

ImageBuffer plucker_embedding(const Camera& camera) {
  camera.validate();
  ImageBuffer out(camera.width, camera.height, 6);
  const Mat3d r_t = camera.rotation.transpose();
  const Eigen::Vector3d origin = camera.position();
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Eigen::Vector3d dir_cam((x + 0.5 - camera.cx) / camera.fx,
                                    (y + 0.5 - camera.cy) / camera.fy, 1.0);
      const Eigen::Vector3d d = (r_t * dir_cam).normalized();
      const Eigen::Vector3d m = origin.cross(d);
      for (int k = 0; k < 3; ++k) {
        out.at(x, y, k) = static_cast<float>(d(k));
        out.at(x, y, 3 + k) = static_cast<float>(m(k));
      }
    }
  }
  return out;
}

}  // namespace hgs
