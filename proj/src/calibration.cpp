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

#include "possense/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "possense/error.hpp"

namespace possense {
namespace {

/// Similarity moving points to zero centroid and mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * mean.x(),
       0.0, s, -s * mean.y(),
       0.0, 0.0, 1.0;
  return t;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

/// Decomposes H ~ [r1 r2 t] (plane to normalized camera coordinates) into a
/// plane-frame pose with the plane in front of the camera.
std::pair<Eigen::Matrix3d, Eigen::Vector3d> decompose_plane_homography(const Eigen::Matrix3d& h) {
  const double n1 = h.col(0).norm();
  const double n2 = h.col(1).norm();
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw NumericError("degenerate homography");
  double lambda = 2.0 / (n1 + n2);
  if (h(2, 2) < 0.0) lambda = -lambda;  // plane origin must be in front of the camera
  Eigen::Matrix3d q;
  q.col(0) = lambda * h.col(0);
  q.col(1) = lambda * h.col(1);
  q.col(2) = q.col(0).cross(q.col(1));
  return {nearest_rotation(q), lambda * h.col(2)};
}

struct PlaneFrame {
  Eigen::Vector3d origin;
  Eigen::Matrix3d basis;  // columns: in-plane u, in-plane v, normal; det = +1
  Eigen::Vector3d singular_values;
};

PlaneFrame fit_plane(std::span<const Correspondence> pts) {
  PlaneFrame f;
  f.origin = Eigen::Vector3d::Zero();
  for (const auto& c : pts) f.origin += c.world;
  f.origin /= static_cast<double>(pts.size());
  Eigen::MatrixXd centered(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) centered.row(static_cast<Eigen::Index>(i)) = (pts[i].world - f.origin).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  f.basis = svd.matrixV();
  if (f.basis.determinant() < 0.0) f.basis.col(2) *= -1.0;
  f.singular_values = svd.singularValues();
  return f;
}

Pose pose_from_plane(std::span<const Correspondence> pts, std::span<const Eigen::Vector2d> normalized,
                     const PlaneFrame& frame) {
  std::vector<Eigen::Vector2d> plane(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::Vector3d d = pts[i].world - frame.origin;
    plane[i] = {frame.basis.col(0).dot(d), frame.basis.col(1).dot(d)};
  }
  const Eigen::Matrix3d h = estimate_homography(plane, normalized);
  const auto [r_plane, t_plane] = decompose_plane_homography(h);
  const Eigen::Matrix3d r = r_plane * frame.basis.transpose();
  return Pose::from_rotation(r, t_plane - r * frame.origin);
}

Pose pose_from_dlt(std::span<const Correspondence> pts, std::span<const Eigen::Vector2d> normalized) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& c : pts) mean += c.world;
  mean /= static_cast<double>(n);
  double dist = 0.0;
  for (const auto& c : pts) dist += (c.world - mean).norm();
  const double s = std::sqrt(3.0) * static_cast<double>(n) / dist;

  Eigen::MatrixXd a(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector4d x;
    x << s * (pts[i].world - mean), 1.0;
    const double u = normalized[i].x();
    const double v = normalized[i].y();
    a.row(2 * i) << x.transpose(), Eigen::RowVector4d::Zero(), -u * x.transpose();
    a.row(2 * i + 1) << Eigen::RowVector4d::Zero(), x.transpose(), -v * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> pn;
  pn << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(), p.segment<4>(8).transpose();
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() *= s;
  t.topRightCorner<3, 1>() = -s * mean;
  Eigen::Matrix<double, 3, 4> proj = pn * t;
  if (proj.leftCols<3>().determinant() < 0.0) proj = -proj;
  Eigen::JacobiSVD<Eigen::Matrix3d> msvd(proj.leftCols<3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = msvd.singularValues().mean();
  const Eigen::Matrix3d r = msvd.matrixU() * msvd.matrixV().transpose();
  return Pose::from_rotation(r, proj.col(3) / scale);
}

int points_in_front(const Pose& pose, std::span<const Correspondence> pts) {
  int n = 0;
  for (const auto& c : pts) n += pose.to_camera(c.world).z() > 0.0 ? 1 : 0;
  return n;
}

}  // namespace

Eigen::Matrix3d estimate_homography(std::span<const Eigen::Vector2d> plane, std::span<const Eigen::Vector2d> image) {
  if (plane.size() != image.size() || plane.size() < 4) {
    throw DataError("estimate_homography: need at least 4 point pairs");
  }
  const Eigen::Matrix3d tp = normalizing_transform(plane);
  const Eigen::Matrix3d ti = normalizing_transform(image);
  const auto n = static_cast<Eigen::Index>(plane.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p = tp * plane[i].homogeneous();
    const Eigen::Vector3d q = ti * image[i].homogeneous();
    a.row(2 * i) << -p.x(), -p.y(), -1.0, 0.0, 0.0, 0.0, q.x() * p.x(), q.x() * p.y(), q.x();
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -p.x(), -p.y(), -1.0, q.y() * p.x(), q.y() * p.y(), q.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() >= 8 && sv[7] < 1e-10 * sv[0]) {
    throw NumericError("estimate_homography: point configuration is degenerate (collinear points)");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  Eigen::Matrix3d out = ti.inverse() * hn * tp;
  if (std::abs(out(2, 2)) > 1e-12 * out.norm()) {
    out /= out(2, 2);
  } else {
    out /= out.norm();
  }
  return out;
}

ExtrinsicResult solve_extrinsics(const Intrinsics& intrinsics, const Distortion& distortion,
                                 std::span<const Correspondence> correspondences, const LmOptions& options) {
  if (correspondences.size() < 4) {
    throw DataError("solve_extrinsics: need at least 4 correspondences, got " +
                    std::to_string(correspondences.size()));
  }
  intrinsics.validate();
  distortion.validate();
  for (const auto& c : correspondences) {
    if (!c.world.allFinite() || !c.pixel.allFinite()) throw DataError("solve_extrinsics: non-finite correspondence");
  }
  const PlaneFrame frame = fit_plane(correspondences);
  const Eigen::Vector3d& sv = frame.singular_values;
  if (!(sv[1] > 1e-9 * std::max(sv[0], 1e-12))) {
    throw NumericError("solve_extrinsics: degenerate configuration (world points are collinear or coincident)");
  }

  CameraModel camera;
  camera.intrinsics = intrinsics;
  camera.distortion = distortion;
  std::vector<Eigen::Vector2d> normalized(correspondences.size());
  for (std::size_t i = 0; i < correspondences.size(); ++i) {
    const UndistortResult u = undistort_pixel(camera, correspondences[i].pixel);
    if (!u.converged) throw NumericError("solve_extrinsics: could not undistort reference pixel " + std::to_string(i));
    normalized[i] = u.normalized;
  }

  const bool coplanar = sv[2] < 1e-9 * sv[0];
  Pose init = (coplanar || correspondences.size() < 6) ? pose_from_plane(correspondences, normalized, frame)
                                                       : pose_from_dlt(correspondences, normalized);
  if (points_in_front(init, correspondences) * 2 < static_cast<int>(correspondences.size())) {
    throw NumericError("solve_extrinsics: linear initialization placed the points behind the camera");
  }

  const auto n = static_cast<Eigen::Index>(correspondences.size());
  auto make_camera = [&](const Eigen::VectorXd& p) {
    CameraModel c = camera;
    c.pose = Pose(p.head<3>(), p.tail<3>());
    return c;
  };
  ResidualFn residual = [&](const Eigen::VectorXd& p) {
    const CameraModel c = make_camera(p);
    Eigen::VectorXd r(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector3d pc = c.pose.to_camera(correspondences[i].world);
      if (!(pc.z() > kMinDepth)) return Eigen::VectorXd::Constant(2 * n, std::numeric_limits<double>::quiet_NaN()).eval();
      r.segment<2>(2 * i) = normalized_to_pixel(c, pc.head<2>() / pc.z()) - correspondences[i].pixel;
    }
    return r;
  };
  JacobianFn jac = [&](const Eigen::VectorXd& p) {
    const CameraModel c = make_camera(p);
    Eigen::MatrixXd j(2 * n, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
      j.middleRows<2>(2 * i) = project_with_jacobian(c, correspondences[i].world).jacobian.leftCols<6>();
    }
    return j;
  };

  LmOptions opts = options;
  if (!opts.normalize) {
    opts.normalize = [](Eigen::VectorXd& p) { p.head<3>() = wrap_axis_angle(p.head<3>()); };
  }
  Eigen::VectorXd p0(6);
  p0 << init.axis_angle(), init.translation();
  const LmResult lm = levenberg_marquardt(residual, jac, p0, opts);
  if (!lm.converged()) {
    throw NumericError("solve_extrinsics: Levenberg-Marquardt did not converge (" + std::string(to_string(lm.status)) +
                       ")");
  }

  ExtrinsicResult out;
  out.pose = Pose(lm.params.head<3>(), lm.params.tail<3>());
  out.cost = lm.final_cost;
  out.rms_px = std::sqrt(lm.final_cost / static_cast<double>(n));
  out.status = lm.status;
  out.iterations = lm.iterations;
  return out;
}

namespace {

Eigen::Matrix<double, 1, 6> zhang_v(const Eigen::Matrix3d& h, int i, int j) {
  Eigen::Matrix<double, 1, 6> v;
  v << h(0, i) * h(0, j), h(0, i) * h(1, j) + h(1, i) * h(0, j), h(1, i) * h(1, j),
      h(2, i) * h(0, j) + h(0, i) * h(2, j), h(2, i) * h(1, j) + h(1, i) * h(2, j), h(2, i) * h(2, j);
  return v;
}

}  // namespace

IntrinsicResult calibrate_intrinsics_planar(std::span<const PlanarView> views, const LmOptions& options) {
  if (views.size() < 3) {
    throw DataError("calibrate_intrinsics_planar: need at least 3 views, got " + std::to_string(views.size()));
  }
  std::vector<Eigen::Vector2d> all_pixels;
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].size() < 4) {
      throw DataError("calibrate_intrinsics_planar: view " + std::to_string(v) + " has fewer than 4 points");
    }
    for (const auto& c : views[v]) {
      if (std::abs(c.world.z()) > 1e-9) {
        throw DataError("calibrate_intrinsics_planar: target points must lie on Z = 0 (view " + std::to_string(v) + ")");
      }
      all_pixels.push_back(c.pixel);
    }
  }

  // Homographies in a conditioned pixel frame; A is mapped back at the end.
  const Eigen::Matrix3d cond = normalizing_transform(all_pixels);
  std::vector<Eigen::Matrix3d> homographies;
  Eigen::MatrixXd vmat(2 * static_cast<Eigen::Index>(views.size()) + 1, 6);
  for (std::size_t v = 0; v < views.size(); ++v) {
    std::vector<Eigen::Vector2d> plane;
    std::vector<Eigen::Vector2d> image;
    for (const auto& c : views[v]) {
      plane.push_back(c.world.head<2>());
      image.push_back((cond * c.pixel.homogeneous()).hnormalized());
    }
    Eigen::Matrix3d h = estimate_homography(plane, image);
    h /= h.norm();
    homographies.push_back(h);
    const auto row = 2 * static_cast<Eigen::Index>(v);
    vmat.row(row) = zhang_v(h, 0, 1);
    vmat.row(row + 1) = zhang_v(h, 0, 0) - zhang_v(h, 1, 1);
  }
  // Zero-skew constraint B12 = 0.
  vmat.bottomRows<1>() << 0.0, 1.0, 0.0, 0.0, 0.0, 0.0;
  for (Eigen::Index r = 0; r < vmat.rows(); ++r) {
    const double nrm = vmat.row(r).norm();
    if (nrm > 0.0) vmat.row(r) /= nrm;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vmat, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv[4] < 1e-9 * sv[0]) {
    throw NumericError("calibrate_intrinsics_planar: degenerate view set (target orientations too similar)");
  }
  Eigen::VectorXd b = svd.matrixV().col(5);
  if (b[0] < 0.0) b = -b;
  const double b11 = b[0], b12 = b[1], b22 = b[2], b13 = b[3], b23 = b[4], b33 = b[5];
  const double den = b11 * b22 - b12 * b12;
  if (!(den > 0.0) || !(b11 > 0.0)) {
    throw NumericError("calibrate_intrinsics_planar: degenerate view set (no positive-definite conic)");
  }
  const double v0 = (b12 * b13 - b11 * b23) / den;
  const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
  if (!(lambda / b11 > 0.0)) {
    throw NumericError("calibrate_intrinsics_planar: degenerate view set (imaginary focal length)");
  }
  const double alpha = std::sqrt(lambda / b11);
  const double beta = std::sqrt(lambda * b11 / den);
  const double gamma = -b12 * alpha * alpha * beta / lambda;
  const double u0 = gamma * v0 / beta - b13 * alpha * alpha / lambda;

  Eigen::Matrix3d a_cond;
  a_cond << alpha, 0.0, u0, 0.0, beta, v0, 0.0, 0.0, 1.0;
  const Eigen::Matrix3d a_cond_inv = a_cond.inverse();
  const Eigen::Matrix3d a_pix = cond.inverse() * a_cond;

  IntrinsicResult out;
  out.intrinsics = {a_pix(0, 0), a_pix(1, 1), a_pix(0, 2), a_pix(1, 2), 0.0};
  std::vector<Pose> poses;
  for (const auto& h : homographies) {
    const auto [r, t] = decompose_plane_homography(a_cond_inv * h);
    poses.push_back(Pose::from_rotation(r, t));
  }

  // Joint refinement: [fx fy cx cy k1 k2 k3 p1 p2 | (axis-angle, t) per view].
  const auto nv = static_cast<Eigen::Index>(views.size());
  Eigen::Index n_res = 0;
  for (const auto& v : views) n_res += 2 * static_cast<Eigen::Index>(v.size());
  const Eigen::Index n_par = 9 + 6 * nv;
  auto camera_for = [](const Eigen::VectorXd& p, Eigen::Index view) {
    CameraModel c;
    c.intrinsics = {p[0], p[1], p[2], p[3], 0.0};
    c.distortion = {p[4], p[5], p[6], p[7], p[8]};
    c.pose = Pose(p.segment<3>(9 + 6 * view), p.segment<3>(12 + 6 * view));
    return c;
  };
  ResidualFn residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n_res);
    Eigen::Index row = 0;
    for (Eigen::Index v = 0; v < nv; ++v) {
      const CameraModel c = camera_for(p, v);
      for (const auto& corr : views[static_cast<std::size_t>(v)]) {
        const Eigen::Vector3d pc = c.pose.to_camera(corr.world);
        if (!(pc.z() > kMinDepth)) return Eigen::VectorXd::Constant(n_res, std::numeric_limits<double>::quiet_NaN()).eval();
        r.segment<2>(row) = normalized_to_pixel(c, pc.head<2>() / pc.z()) - corr.pixel;
        row += 2;
      }
    }
    return r;
  };
  JacobianFn jac = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n_res, n_par);
    Eigen::Index row = 0;
    for (Eigen::Index v = 0; v < nv; ++v) {
      const CameraModel c = camera_for(p, v);
      for (const auto& corr : views[static_cast<std::size_t>(v)]) {
        const auto pj = project_with_jacobian(c, corr.world);
        j.block<2, 9>(row, 0) = pj.jacobian.block<2, 9>(0, 6);
        j.block<2, 6>(row, 9 + 6 * v) = pj.jacobian.leftCols<6>();
        row += 2;
      }
    }
    return j;
  };
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(n_par);
  p0.head<4>() << out.intrinsics.fx, out.intrinsics.fy, out.intrinsics.cx, out.intrinsics.cy;
  for (Eigen::Index v = 0; v < nv; ++v) {
    p0.segment<3>(9 + 6 * v) = poses[static_cast<std::size_t>(v)].axis_angle();
    p0.segment<3>(12 + 6 * v) = poses[static_cast<std::size_t>(v)].translation();
  }
  LmOptions opts = options;
  if (!opts.normalize) {
    opts.normalize = [nv](Eigen::VectorXd& p) {
      for (Eigen::Index v = 0; v < nv; ++v) p.segment<3>(9 + 6 * v) = wrap_axis_angle(p.segment<3>(9 + 6 * v));
    };
  }
  const LmResult lm = levenberg_marquardt(residual, jac, p0, opts);
  if (!lm.converged()) {
    throw NumericError("calibrate_intrinsics_planar: Levenberg-Marquardt did not converge (" +
                       std::string(to_string(lm.status)) + ")");
  }
  const Eigen::VectorXd& p = lm.params;
  out.intrinsics = {p[0], p[1], p[2], p[3], 0.0};
  out.distortion = {p[4], p[5], p[6], p[7], p[8]};
  out.view_poses.clear();
  for (Eigen::Index v = 0; v < nv; ++v) out.view_poses.emplace_back(p.segment<3>(9 + 6 * v), p.segment<3>(12 + 6 * v));
  out.rms_px = std::sqrt(lm.final_cost / static_cast<double>(n_res / 2));
  out.status = lm.status;
  out.iterations = lm.iterations;
  return out;
}

MappingError ground_mapping_error(const CameraModel& camera, std::span<const Correspondence> references) {
  if (references.empty()) throw DataError("ground_mapping_error: no reference points");
  MappingError out;
  double sum = 0.0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const auto& ref = references[i];
    if (std::abs(ref.world.z()) > 1e-9) {
      throw DataError("ground_mapping_error: reference " + std::to_string(i) + " is not on the ground plane");
    }
    const Eigen::Vector3d g = back_project_to_ground(camera, ref.pixel);
    const double e = (g.head<2>() - ref.world.head<2>()).norm();
    out.per_point.push_back(e);
    sum += e;
    out.max_m = std::max(out.max_m, e);
  }
  out.mean_m = sum / static_cast<double>(references.size());
  return out;
}

}  // namespace possense
