#include "meshalign/camera.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <fmt/format.h>

namespace meshalign {

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_degrees,
                       int width, int height, double near, double far) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  const double half = 0.5 * fov_y_degrees * std::numbers::pi / 180.0;
  cam.fy = 0.5 * height / std::tan(half);
  cam.fx = cam.fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  cam.near = near;
  cam.far = far;
  cam.validate();
  return cam;
}

Eigen::Matrix4d Camera::projection() const {
  Eigen::Matrix4d k = Eigen::Matrix4d::Zero();
  k(0, 0) = fx;
  k(0, 2) = cx;
  k(1, 1) = fy;
  k(1, 2) = cy;
  k(2, 2) = (far + near) / (far - near);
  k(2, 3) = -2.0 * far * near / (far - near);
  k(3, 2) = 1.0;
  Eigen::Matrix4d view = Eigen::Matrix4d::Identity();
  view.topLeftCorner<3, 3>() = rotation;
  view.topRightCorner<3, 1>() = translation;
  return k * view;
}

void Camera::validate() const {
  if (width <= 0 || height <= 0) {
    throw ConfigError(fmt::format("camera image size must be positive, got {}x{}", width, height));
  }
  if (!(near > 0.0) || !(far > near)) {
    throw ConfigError(fmt::format("camera needs 0 < near < far, got near={} far={}", near, far));
  }
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw ConfigError("camera focal lengths must be positive and principal point finite");
  }
  if (!rotation.allFinite() || !translation.allFinite() || std::abs(rotation.determinant()) < 1e-9) {
    throw ConfigError("camera rotation must be finite and invertible");
  }
}

} // namespace meshalign
