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

#include <string>
#include <string_view>
#include <vector>

#include "possense/calibration.hpp"
#include "possense/camera.hpp"

namespace possense {

/// Camera file: {image_size, intrinsics{fx,fy,cx,cy,skew},
/// distortion{k1,k2,k3,p1,p2}, pose{axis_angle[3], t[3]}, units:"m-px"}.
/// `pose` may be absent (intrinsics-only file, identity pose).
CameraModel parse_camera(std::string_view text, bool require_pose = true);
std::string write_camera(const CameraModel& camera);

/// CSV with header X,Y,Z,u,v (extra columns ignored).
std::vector<Correspondence> parse_correspondences(std::string_view text);
std::string write_correspondences(std::span<const Correspondence> refs);

}  // namespace possense
