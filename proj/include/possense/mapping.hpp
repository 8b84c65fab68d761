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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "possense/annotation.hpp"
#include "possense/camera.hpp"
#include "possense/taxonomy.hpp"

namespace possense {

/// Rectangle on the ground plane: origin corner, width along the rotated X
/// axis, length along the rotated Y axis.
struct MapExtent {
  Eigen::Vector2d origin_xy = Eigen::Vector2d::Zero();
  double width_m = 0.0;
  double length_m = 0.0;
  double rotation_rad = 0.0;

  Eigen::Vector2d to_local(const Eigen::Vector2d& world) const;
  Eigen::Vector2d to_world(const Eigen::Vector2d& local) const;
  /// Closed containment; 1e-9 m slack absorbs rotation round-off.
  bool contains(const Eigen::Vector2d& world) const;
  void validate() const;
  bool operator==(const MapExtent&) const = default;
};

struct ClassPrior {
  int class_id = 0;
  double footprint_w = 0.5;
  double footprint_l = 0.6;
};

/// Footprint priors per class. Classes without an entry use the pedestrian prior.
class PriorTable {
 public:
  /// Pedestrian 0.50 x 0.60 m, cyclist 0.50 x 1.60 m.
  static PriorTable defaults(const Taxonomy& taxonomy);
  void set(const ClassPrior& prior);
  ClassPrior at(int class_id) const;

 private:
  std::map<int, ClassPrior> priors_;
  ClassPrior fallback_;
};

struct GroundObservation {
  int class_id = 0;
  Eigen::Vector2d world_xy = Eigen::Vector2d::Zero();
  /// Seconds since the stream epoch.
  double timestamp = 0.0;
  std::int64_t source_image_id = 0;
  double score = 1.0;
  /// Stream (camera) name; decimation and ordering are per source.
  std::string source;
};

struct Box3D {
  Eigen::Vector2d center_xy = Eigen::Vector2d::Zero();
  /// Azimuth of the camera-to-object ray. Not observable from one mask, so
  /// always flagged low confidence.
  double yaw = 0.0;
  bool yaw_low_confidence = true;
  double w = 0.0;
  double l = 0.0;
  double h = 0.0;
  /// True when the solved height fell outside [0.3, 3.0] m and was clamped.
  bool height_clamped = false;
};

inline constexpr double kMinBoxHeight = 0.3;
inline constexpr double kMaxBoxHeight = 3.0;

/// Ground-contact pixel: midpoint of the bounding box of the vertices in the
/// lowest 5% of the polygon's row span. Without a polygon, the bbox
/// bottom-center. Throws DataError when neither is present.
Eigen::Vector2d footpoint(const Annotation& detection);

/// Top pixel: column midpoint of the top 5% vertex band, on the topmost
/// polygon row (bbox top-center fallback).
Eigen::Vector2d toppoint(const Annotation& detection);

/// Back-projects the footpoint and remaps the class.
GroundObservation locate(const Annotation& detection, const CameraModel& camera, const Treatment& treatment,
                         double timestamp = 0.0, std::string_view source = {});

/// Prior-sized box standing on the footpoint. The height comes from the ray
/// through the top pixel, intersected with the vertical edge the top pixel
/// belongs to: the far face when the camera looks down on the object top,
/// otherwise the near face. Throws NumericError when the footpoint ray or
/// the top ray is within 1e-3 rad of vertical.
Box3D estimate_box3d(const Annotation& detection, const CameraModel& camera, const ClassPrior& prior);

struct MappingFailure {
  std::int64_t detection_id = 0;
  std::string reason;
};

struct FrameMapping {
  std::vector<GroundObservation> observations;
  /// Located people outside the extent.
  int out_of_extent = 0;
  /// Detections dropped because their (remapped) class is not people.
  int non_people = 0;
  std::vector<MappingFailure> failures;
  double runtime_s = 0.0;
};

/// Locates the people detections of one frame, keeping those inside `roi`.
/// Per-detection geometry failures are recorded, never thrown.
FrameMapping map_frame(std::span<const Annotation> detections, const CameraModel& camera, const Treatment& treatment,
                       const Taxonomy& taxonomy, const MapExtent& roi, double timestamp = 0.0,
                       std::string_view source = {});

MapExtent parse_extent(std::string_view json_text);
std::string write_extent(const MapExtent& extent);

/// Observation stream as CSV: ts,image_id,class,X,Y,score,source (class by name).
std::string write_observations_csv(std::span<const GroundObservation> obs, const Taxonomy& taxonomy);
std::vector<GroundObservation> parse_observations_csv(std::string_view text, const Taxonomy& taxonomy);
/// Same fields, one JSON object per line.
std::string write_observations_jsonl(std::span<const GroundObservation> obs, const Taxonomy& taxonomy);
std::vector<GroundObservation> parse_observations_jsonl(std::string_view text, const Taxonomy& taxonomy);

}  // namespace possense
