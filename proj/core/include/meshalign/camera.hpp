#pragma once

#include <Eigen/Core>

#include "meshalign/mesh.hpp"

namespace meshalign {

/// Pinhole camera. World points map to camera space by p_c = R p + t with
/// x right, y down and z forward; pixel (i, j) has its center at
/// (i + 0.5, j + 0.5) and covers rows top to bottom.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 1;
  int height = 1;
  double near = 0.01;
  double far = 100.0;

  /// Camera at `eye` looking at `target`; `fov_y_degrees` is the full
  /// vertical field of view, principal point at the image center.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_degrees,
                        int width, int height, double near = 0.01, double far = 100.0);

  [[nodiscard]] Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  [[nodiscard]] Vec3 center() const { return -rotation.transpose() * translation; }

  /// Pixel coordinates of a camera-space point with positive z.
  [[nodiscard]] Vec2 project_camera(const Vec3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
  [[nodiscard]] Vec2 project(const Vec3& world) const { return project_camera(to_camera(world)); }

  /// Camera-space ray direction through a pixel position, normalized to z = 1.
  [[nodiscard]] Vec3 ray(double px, double py) const {
    return {(px - cx) / fx, (py - cy) / fy, 1.0};
  }

  /// 4x4 matrix taking homogeneous world points to clip space: x/w and y/w
  /// are pixel coordinates, z/w spans [-1, 1] over [near, far], w is depth.
  [[nodiscard]] Eigen::Matrix4d projection() const;

  /// Throws ConfigError when the camera is unusable.
  void validate() const;
};

} // namespace meshalign
