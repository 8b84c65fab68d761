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

#include "possense/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "possense/error.hpp"

namespace possense {
namespace {

Eigen::Matrix3d skew_symmetric(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

Eigen::Matrix3d Intrinsics::matrix() const {
  Eigen::Matrix3d a;
  a << fx, skew, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return a;
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !finite(fx) || !finite(fy)) {
    throw DataError("intrinsics: focal lengths must be positive and finite");
  }
  if (!finite(cx) || !finite(cy) || !finite(skew)) throw DataError("intrinsics: principal point must be finite");
}

void Distortion::validate() const {
  if (!finite(k1) || !finite(k2) || !finite(k3) || !finite(p1) || !finite(p2)) {
    throw DataError("distortion: coefficients must be finite");
  }
}

Eigen::Vector2d Distortion::apply(const Eigen::Vector2d& xy) const {
  const double x = xy.x();
  const double y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
          y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
}

Eigen::Matrix2d Distortion::jacobian(const Eigen::Vector2d& xy) const {
  const double x = xy.x();
  const double y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  const double dradial = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);  // d radial / d r2
  Eigen::Matrix2d j;
  j(0, 0) = radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x;
  j(0, 1) = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y;
  j(1, 0) = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y;
  j(1, 1) = radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x;
  return j;
}

Eigen::Matrix<double, 2, 5> Distortion::coefficient_jacobian(const Eigen::Vector2d& xy) const {
  const double x = xy.x();
  const double y = xy.y();
  const double r2 = x * x + y * y;
  Eigen::Matrix<double, 2, 5> j;
  j << x * r2, x * r2 * r2, x * r2 * r2 * r2, 2.0 * x * y, r2 + 2.0 * x * x,
       y * r2, y * r2 * r2, y * r2 * r2 * r2, r2 + 2.0 * y * y, 2.0 * x * y;
  return j;
}

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& axis_angle) {
  const double theta = axis_angle.norm();
  const Eigen::Matrix3d k = skew_symmetric(axis_angle);
  if (theta < 1e-12) return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));  // 2 sin(theta) n
  const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < std::numbers::pi / 2) {
    const double sin_theta = std::sin(theta);
    const double scale = sin_theta < 1e-12 ? 0.5 : 0.5 * theta / sin_theta;
    return scale * vee;
  }
  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part (1 - cos) n n^T.
  const Eigen::Matrix3d s = 0.5 * (r + r.transpose()) - cos_theta * Eigen::Matrix3d::Identity();
  int col = 0;
  s.diagonal().maxCoeff(&col);
  Eigen::Vector3d n = s.col(col).normalized();
  if (n.dot(vee) < 0.0) n = -n;
  return theta * n;
}

std::array<Eigen::Matrix3d, 3> rotation_derivatives(const Eigen::Vector3d& v) {
  std::array<Eigen::Matrix3d, 3> d;
  const double theta2 = v.squaredNorm();
  if (theta2 < 1e-16) {
    for (int i = 0; i < 3; ++i) d[i] = skew_symmetric(Eigen::Vector3d::Unit(i));
    return d;
  }
  // Gallego & Yezzi closed form:
  // dR/dv_i = (v_i [v]x + [v x ((I - R) e_i)]x) R / |v|^2
  const Eigen::Matrix3d r = rotation_from_axis_angle(v);
  const Eigen::Matrix3d vx = skew_symmetric(v);
  const Eigen::Matrix3d i_minus_r = Eigen::Matrix3d::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d w = v.cross(i_minus_r.col(i));
    d[i] = (v[i] * vx + skew_symmetric(w)) * r / theta2;
  }
  return d;
}

Eigen::Vector3d wrap_axis_angle(const Eigen::Vector3d& v) {
  const double theta = v.norm();
  if (theta <= std::numbers::pi) return v;
  const double wrapped = std::fmod(theta, 2.0 * std::numbers::pi);
  Eigen::Vector3d out = v * (wrapped / theta);
  if (wrapped > std::numbers::pi) out *= 1.0 - 2.0 * std::numbers::pi / wrapped;
  return out;
}

Pose::Pose()
    : axis_angle_(Eigen::Vector3d::Zero()),
      translation_(Eigen::Vector3d::Zero()),
      rotation_(Eigen::Matrix3d::Identity()) {}

Pose::Pose(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& translation)
    : axis_angle_(axis_angle), translation_(translation), rotation_(rotation_from_axis_angle(axis_angle)) {}

Pose Pose::from_rotation(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  return Pose(axis_angle_from_rotation(rotation), translation);
}

Pose Pose::look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - center).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::abs(forward.dot(up)) > 1.0 - 1e-12) up = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  const Eigen::Vector3d aa = axis_angle_from_rotation(r);
  const Eigen::Matrix3d exact = rotation_from_axis_angle(aa);
  return Pose(aa, -exact * center);
}

void CameraModel::validate() const {
  intrinsics.validate();
  distortion.validate();
  if (!pose.translation().allFinite() || !pose.axis_angle().allFinite()) {
    throw DataError("camera pose must be finite");
  }
  if (!(pose.center().z() > 0.0)) {
    throw DataError("camera center must lie above the ground plane (Z > 0)");
  }
}

Eigen::Vector2d normalized_to_pixel(const CameraModel& camera, const Eigen::Vector2d& xy) {
  const Eigen::Vector2d d = camera.distortion.apply(xy);
  const Intrinsics& k = camera.intrinsics;
  return {k.fx * d.x() + k.skew * d.y() + k.cx, k.fy * d.y() + k.cy};
}

Eigen::Vector2d project(const CameraModel& camera, const Eigen::Vector3d& world) {
  const Eigen::Vector3d pc = camera.pose.to_camera(world);
  if (!(pc.z() > kMinDepth)) {
    throw NumericError("project: point is at or behind the camera plane (depth " + std::to_string(pc.z()) + " m)");
  }
  return normalized_to_pixel(camera, pc.head<2>() / pc.z());
}

ProjectionWithJacobian project_with_jacobian(const CameraModel& camera, const Eigen::Vector3d& world) {
  const Eigen::Vector3d pc = camera.pose.to_camera(world);
  if (!(pc.z() > kMinDepth)) {
    throw NumericError("project: point is at or behind the camera plane");
  }
  const double inv_z = 1.0 / pc.z();
  const Eigen::Vector2d xy = pc.head<2>() * inv_z;
  const Distortion& dist = camera.distortion;
  const Intrinsics& k = camera.intrinsics;
  const Eigen::Vector2d xd = dist.apply(xy);

  ProjectionWithJacobian out;
  out.pixel = {k.fx * xd.x() + k.skew * xd.y() + k.cx, k.fy * xd.y() + k.cy};

  Eigen::Matrix2d k2;
  k2 << k.fx, k.skew, 0.0, k.fy;
  Eigen::Matrix<double, 2, 3> persp;
  persp << inv_z, 0.0, -xy.x() * inv_z,
           0.0, inv_z, -xy.y() * inv_z;
  const Eigen::Matrix<double, 2, 3> d_pixel_d_pc = k2 * dist.jacobian(xy) * persp;

  const auto d_r = rotation_derivatives(camera.pose.axis_angle());
  for (int i = 0; i < 3; ++i) out.jacobian.col(i) = d_pixel_d_pc * (d_r[i] * world);
  out.jacobian.block<2, 3>(0, 3) = d_pixel_d_pc;
  out.jacobian.col(6) << xd.x(), 0.0;
  out.jacobian.col(7) << 0.0, xd.y();
  out.jacobian.col(8) << 1.0, 0.0;
  out.jacobian.col(9) << 0.0, 1.0;
  out.jacobian.block<2, 5>(0, 10) = k2 * dist.coefficient_jacobian(xy);
  return out;
}

UndistortResult undistort_pixel(const CameraModel& camera, const Eigen::Vector2d& pixel) {
  const Intrinsics& k = camera.intrinsics;
  const double yd = (pixel.y() - k.cy) / k.fy;
  const double xd = (pixel.x() - k.cx - k.skew * yd) / k.fx;
  const Eigen::Vector2d observed(xd, yd);

  UndistortResult out;
  out.normalized = observed;
  if (camera.distortion.is_zero()) {
    out.converged = true;
    return out;
  }
  const Distortion& dist = camera.distortion;
  Eigen::Vector2d x = observed;
  Eigen::Vector2d best = x;
  double best_residual = (dist.apply(x) - observed).norm();
  const double floor = 1e-15 * (1.0 + observed.norm());
  for (int it = 0; it < kUndistortMaxIterations && best_residual > floor; ++it) {
    const Eigen::Vector2d f = dist.apply(x) - observed;
    const Eigen::Matrix2d j = dist.jacobian(x);
    const double det = j.determinant();
    Eigen::Vector2d next;
    if (std::abs(det) > 1e-12) {
      next = x - j.inverse() * f;
    } else {
      // Plain fixed-point step when the Newton system is singular.
      const double r2 = x.squaredNorm();
      const double radial = 1.0 + r2 * (dist.k1 + r2 * (dist.k2 + r2 * dist.k3));
      const Eigen::Vector2d tangential = dist.apply(x) - radial * x;
      next = (observed - tangential) / radial;
    }
    ++out.iterations;
    if (!next.allFinite()) break;
    x = next;
    const double r = (dist.apply(x) - observed).norm();
    if (r < best_residual) {
      best_residual = r;
      best = x;
    } else if (best_residual < kUndistortTolerance) {
      break;  // converged and no longer improving
    }
  }
  out.normalized = best;
  out.residual = best_residual;
  out.converged = best_residual < kUndistortTolerance;
  return out;
}

Eigen::Vector3d pixel_ray(const CameraModel& camera, const Eigen::Vector2d& pixel) {
  const UndistortResult u = undistort_pixel(camera, pixel);
  if (!u.converged) {
    throw NumericError("undistortion did not converge for pixel (" + std::to_string(pixel.x()) + ", " +
                       std::to_string(pixel.y()) + "), residual " + std::to_string(u.residual));
  }
  return (camera.pose.rotation().transpose() * Eigen::Vector3d(u.normalized.x(), u.normalized.y(), 1.0))
      .normalized();
}

Eigen::Vector3d back_project_to_ground(const CameraModel& camera, const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d c = camera.pose.center();
  if (!(c.z() > 0.0)) throw NumericError("back_project_to_ground: camera is not above the ground plane");
  const Eigen::Vector3d d = pixel_ray(camera, pixel);
  if (!(d.z() < -1e-12)) {
    throw NumericError("back_project_to_ground: ray through pixel (" + std::to_string(pixel.x()) + ", " +
                       std::to_string(pixel.y()) + ") does not reach the ground (horizon or sky)");
  }
  const double lambda = -c.z() / d.z();
  Eigen::Vector3d g = c + lambda * d;
  g.z() = 0.0;
  return g;
}

}  // namespace possense
