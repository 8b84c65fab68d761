/**
 * Copyright 2026 The possense Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>

#include <Eigen/Core>

namespace possense {

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  /// The upper-triangular matrix A.
  Eigen::Matrix3d matrix() const;
  void validate() const;
};

/// Five-term radial/tangential model applied to normalized image coordinates.
struct Distortion {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  bool is_zero() const { return k1 == 0.0 && k2 == 0.0 && k3 == 0.0 && p1 == 0.0 && p2 == 0.0; }
  void validate() const;

  /// Ideal normalized point -> distorted normalized point.
  Eigen::Vector2d apply(const Eigen::Vector2d& xy) const;
  /// d(distorted)/d(ideal), 2x2.
  Eigen::Matrix2d jacobian(const Eigen::Vector2d& xy) const;
  /// d(distorted)/d(k1,k2,k3,p1,p2), 2x5.
  Eigen::Matrix<double, 2, 5> coefficient_jacobian(const Eigen::Vector2d& xy) const;
};

/// Rodrigues rotation matrix for an axis-angle vector (radians).
Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& axis_angle);

/// Inverse of rotation_from_axis_angle; angle in [0, pi]. Input must be a rotation.
Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d& rotation);

/// dR/d(axis_angle_i), i = 0..2.
std::array<Eigen::Matrix3d, 3> rotation_derivatives(const Eigen::Vector3d& axis_angle);

/// Re-centers an axis-angle vector with |theta| > pi onto the equivalent
/// vector of angle 2*pi - |theta| about the opposite axis.
Eigen::Vector3d wrap_axis_angle(const Eigen::Vector3d& axis_angle);

/// World-to-camera transform X_cam = R * X_world + t (meters).
class Pose {
 public:
  Pose();
  Pose(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& translation);
  static Pose from_rotation(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);
  /// Camera at `center` looking at `target`, image "up" towards world +Z.
  static Pose look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target);

  const Eigen::Vector3d& axis_angle() const { return axis_angle_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  const Eigen::Matrix3d& rotation() const { return rotation_; }
  /// Camera center in world coordinates, -R^T t.
  Eigen::Vector3d center() const { return -rotation_.transpose() * translation_; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation_ * world + translation_; }

 private:
  Eigen::Vector3d axis_angle_;
  Eigen::Vector3d translation_;
  Eigen::Matrix3d rotation_;
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

struct CameraModel {
  Intrinsics intrinsics;
  Distortion distortion;
  Pose pose;
  ImageSize image_size;

  /// Checks intrinsics, distortion and that the camera center is above Z = 0.
  void validate() const;
};

/// Minimum camera-frame depth for projection.
inline constexpr double kMinDepth = 1e-9;

/// World point (m) -> pixel. Throws NumericError for points at or behind the
/// camera plane.
Eigen::Vector2d project(const CameraModel& camera, const Eigen::Vector3d& world);

/// Normalized point (camera-frame x/z, y/z) -> pixel, distortion included.
Eigen::Vector2d normalized_to_pixel(const CameraModel& camera, const Eigen::Vector2d& xy);

/// Number of parameters in the full projection Jacobian: 3 rotation, 3
/// translation, fx, fy, cx, cy, k1, k2, k3, p1, p2.
inline constexpr int kProjectionParams = 15;

struct ProjectionWithJacobian {
  Eigen::Vector2d pixel;
  Eigen::Matrix<double, 2, kProjectionParams> jacobian;
};

/// Projection plus its analytic Jacobian with respect to pose, intrinsics
/// (skew held fixed) and distortion.
ProjectionWithJacobian project_with_jacobian(const CameraModel& camera, const Eigen::Vector3d& world);

struct UndistortResult {
  Eigen::Vector2d normalized;
  int iterations = 0;
  bool converged = false;
  /// |distort(normalized) - observed| in normalized units.
  double residual = 0.0;
};

inline constexpr double kUndistortTolerance = 1e-8;
inline constexpr int kUndistortMaxIterations = 20;

/// Inverts the distortion model for a pixel. Never throws for finite input;
/// non-convergence is reported through `converged` with the best iterate.
UndistortResult undistort_pixel(const CameraModel& camera, const Eigen::Vector2d& pixel);

/// Viewing ray through a pixel, world frame, unit length, from the camera center.
Eigen::Vector3d pixel_ray(const CameraModel& camera, const Eigen::Vector2d& pixel);

/// Intersection of a pixel's viewing ray with the ground plane Z = 0. Throws
/// NumericError when the ray is parallel to or points away from the plane,
/// or when undistortion did not converge.
Eigen::Vector3d back_project_to_ground(const CameraModel& camera, const Eigen::Vector2d& pixel);

}  // namespace possense
