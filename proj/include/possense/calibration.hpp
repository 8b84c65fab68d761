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

#include <span>
#include <vector>

#include <Eigen/Core>

#include "possense/camera.hpp"
#include "possense/levenberg_marquardt.hpp"

namespace possense {

/// A surveyed world point (m) and where it appears in the image (px).
struct Correspondence {
  Eigen::Vector3d world;
  Eigen::Vector2d pixel;
};

/// Normalized DLT homography mapping plane points (X, Y) to image points,
/// scaled so H(2,2) = 1 when possible. Needs >= 4 points, no 3 collinear in
/// aggregate (throws NumericError for a rank-deficient system).
Eigen::Matrix3d estimate_homography(std::span<const Eigen::Vector2d> plane,
                                    std::span<const Eigen::Vector2d> image);

struct ExtrinsicResult {
  Pose pose;
  /// Root-mean-square reprojection error in px.
  double rms_px = 0.0;
  /// Sum of squared reprojection residuals in px^2.
  double cost = 0.0;
  LmStatus status = LmStatus::max_iterations;
  int iterations = 0;
};

/// Pose from >= 4 non-collinear correspondences: linear initialization
/// (homography decomposition for coplanar points, DLT otherwise) refined by
/// Levenberg-Marquardt on pixel residuals. Throws DataError for fewer than 4
/// points, NumericError for degenerate configurations or non-convergence.
ExtrinsicResult solve_extrinsics(const Intrinsics& intrinsics, const Distortion& distortion,
                                 std::span<const Correspondence> correspondences,
                                 const LmOptions& options = {});

/// One view of a planar target: world points on Z = 0 and their pixels.
using PlanarView = std::vector<Correspondence>;

struct IntrinsicResult {
  Intrinsics intrinsics;
  Distortion distortion;
  std::vector<Pose> view_poses;
  double rms_px = 0.0;
  LmStatus status = LmStatus::max_iterations;
  int iterations = 0;
};

/// Closed-form intrinsics from per-view homographies, then joint refinement of
/// intrinsics (zero skew), distortion and every view's pose. Needs >= 3 views
/// with >= 4 points each and distinct orientations.
IntrinsicResult calibrate_intrinsics_planar(std::span<const PlanarView> views, const LmOptions& options = {});

struct MappingError {
  double mean_m = 0.0;
  double max_m = 0.0;
  /// Euclidean ground-plane distance per reference, in input order.
  std::vector<double> per_point;
};

/// Back-projects each reference pixel onto Z = 0 and measures the distance to
/// its surveyed position. Throws DataError for references off the ground
/// plane, NumericError when a pixel has no ground intersection.
MappingError ground_mapping_error(const CameraModel& camera, std::span<const Correspondence> references);

}  // namespace possense
