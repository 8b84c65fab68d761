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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "possense/annotation.hpp"
#include "possense/calibration.hpp"
#include "possense/camera.hpp"
#include "possense/mapping.hpp"
#include "possense/rng.hpp"

namespace possense {

struct Waypoint {
  double t = 0.0;
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
};

/// An upright cuboid walking a piecewise-linear path. The path point is the
/// agent's ground contact (middle of the footprint edge nearest the camera),
/// which is what behavioral mapping is expected to recover.
struct Agent {
  int id = 0;
  int class_id = 0;
  double height = 1.75;
  double w = 0.5;
  double l = 0.6;
  /// Sorted by time; the agent exists on [front().t, back().t].
  std::vector<Waypoint> path;

  std::optional<Eigen::Vector2d> position(double t) const;
};

struct NoiseModel {
  /// Per-vertex Gaussian noise on detected polygons, px.
  double pixel_sigma = 0.0;
  double miss_rate = 0.0;
  /// Probability of reporting another class of the same super-category.
  double confusion_rate = 0.0;
  double score_min = 0.5;
  double score_max = 1.0;
};

struct SimCamera {
  std::string name;
  CameraModel model;
};

struct Scenario {
  std::vector<SimCamera> cameras;
  MapExtent extent;
  std::vector<Agent> agents;
  NoiseModel noise;
  double duration_s = 10.0;
  double fps = 10.0;
  std::uint64_t seed = 0;

  int frame_count() const;
  /// Checks rates, timing, cameras and that every path stays inside the extent.
  void validate() const;
};

struct SimOutput {
  /// One image per (frame, camera); image extra carries "timestamp" and "scene".
  Dataset ground_truth;
  std::vector<Annotation> detections;
  /// One entry per visible agent per frame and camera, in ground-truth
  /// annotation order (truth[i] belongs to ground_truth.annotations[i]).
  std::vector<GroundObservation> truth;
  /// For each detection, the index of its truth entry.
  std::vector<std::size_t> detection_truth;
  std::vector<double> truth_heights;
};

/// Projects every agent in every frame: visible agents (all 8 corners in front
/// of the camera and inside the image) become ground-truth polygons (convex
/// hull of the corners) and, after noise, detections. The cuboid's length axis
/// follows the rendering camera's horizontal viewing direction. Deterministic
/// in the seed for any `jobs`.
SimOutput render_detections(const Scenario& scenario, const Taxonomy& taxonomy, int jobs = 1);

/// Cuboid corners in world coordinates (bottom four first).
std::vector<Eigen::Vector3d> agent_corners(const Agent& agent, const Eigen::Vector2d& contact,
                                           const Eigen::Vector2d& forward);

/// Horizontal unit vector of the camera's optical axis.
Eigen::Vector2d viewing_direction(const CameraModel& camera);

/// Oblique plaza camera: 1108x832 px, f = 1000 px, mild barrel distortion,
/// mounted at `height_m` above (0, 0) looking 15 m ahead along +Y.
CameraModel cullen_rig(double height_m = 6.0);

/// Greenway camera looking down a 4.5 m x 32 m path from behind its start.
CameraModel dequindre_rig();
MapExtent dequindre_extent();

/// `n` surveyed ground points visible in `camera` (>= 40 px from the border),
/// within `max_range_m` of the camera foot.
std::vector<Correspondence> reference_points(const CameraModel& camera, int n, CounterRng& rng,
                                             double max_range_m = 30.0);

/// Boundary feature that attracts dwelling users (e.g. steps along an edge).
struct Attractor {
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  /// Dwellers stay within this distance of the segment.
  double radius_m = 1.0;
};

struct EdgeScenarioOptions {
  int dwellers = 30;
  int through = 30;
  double duration_s = 60.0;
  double fps = 1.0;
  double walk_speed = 1.3;
  std::uint64_t seed = 0;
};

/// Dwellers wander within `radius_m` of the attractor for the whole run;
/// through-traffic walks straight along the extent's length axis at a
/// uniformly random lateral offset, entering at uniformly random times
/// (including before t = 0) so occupancy is stationary and uniform. With no
/// attractor only through-traffic is generated. Camera-free: cameras are left
/// empty for the caller to add.
Scenario edge_scenario(const MapExtent& extent, const std::optional<Attractor>& attractor,
                       const EdgeScenarioOptions& options, const Taxonomy& taxonomy);

/// Camera-free ground truth: one observation per agent per frame at its path
/// point, stamped with the frame time. Source is "truth".
std::vector<GroundObservation> ground_truth_stream(const Scenario& scenario);

/// Four cyclists crossing the Dequindre extent plus `pedestrians` walkers.
Scenario pass_through_scenario(const Taxonomy& taxonomy, std::uint64_t seed, int pedestrians = 6);

/// A static scene: `n` agents standing still for one frame, spread over the
/// camera's view. Used for localization and height checks.
Scenario static_crowd(const CameraModel& camera, const MapExtent& extent, int n, int class_id, double height,
                      std::uint64_t seed);

Scenario parse_scenario(std::string_view json_text, const Taxonomy& taxonomy);
std::string write_scenario(const Scenario& scenario, const Taxonomy& taxonomy);

}  // namespace possense
