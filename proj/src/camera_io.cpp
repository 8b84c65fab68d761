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

#include "possense/camera_io.hpp"

#include <nlohmann/json.hpp>

#include "possense/csv.hpp"
#include "possense/error.hpp"

namespace possense {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Eigen::Vector3d vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw DataError(std::string("camera file: ") + what + " must have 3 entries");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

CameraModel parse_camera(std::string_view text, bool require_pose) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("camera file: malformed JSON: ") + e.what());
  }
  CameraModel c;
  try {
    if (j.contains("units") && j["units"] != "m-px") {
      throw DataError("camera file: units must be \"m-px\", got " + j["units"].dump());
    }
    const json& size = j.at("image_size");
    if (size.is_array()) {
      c.image_size = {size.at(0).get<int>(), size.at(1).get<int>()};
    } else {
      c.image_size = {size.at("width").get<int>(), size.at("height").get<int>()};
    }
    const json& in = j.at("intrinsics");
    c.intrinsics = {in.at("fx").get<double>(), in.at("fy").get<double>(), in.at("cx").get<double>(),
                    in.at("cy").get<double>(), in.value("skew", 0.0)};
    if (j.contains("distortion")) {
      const json& d = j["distortion"];
      c.distortion = {d.value("k1", 0.0), d.value("k2", 0.0), d.value("k3", 0.0), d.value("p1", 0.0),
                      d.value("p2", 0.0)};
    }
    if (j.contains("pose")) {
      c.pose = Pose(vec3(j["pose"].at("axis_angle"), "pose.axis_angle"), vec3(j["pose"].at("t"), "pose.t"));
    } else if (require_pose) {
      throw DataError("camera file: missing pose");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("camera file: schema violation: ") + e.what());
  }
  if (c.image_size.width <= 0 || c.image_size.height <= 0) throw DataError("camera file: image_size must be positive");
  c.intrinsics.validate();
  c.distortion.validate();
  if (require_pose) c.validate();
  return c;
}

std::string write_camera(const CameraModel& c) {
  ordered_json j;
  j["image_size"] = {{"width", c.image_size.width}, {"height", c.image_size.height}};
  j["intrinsics"] = {{"fx", c.intrinsics.fx}, {"fy", c.intrinsics.fy}, {"cx", c.intrinsics.cx},
                     {"cy", c.intrinsics.cy}, {"skew", c.intrinsics.skew}};
  j["distortion"] = {{"k1", c.distortion.k1}, {"k2", c.distortion.k2}, {"k3", c.distortion.k3},
                     {"p1", c.distortion.p1}, {"p2", c.distortion.p2}};
  const auto& w = c.pose.axis_angle();
  const auto& t = c.pose.translation();
  j["pose"] = {{"axis_angle", {w.x(), w.y(), w.z()}}, {"t", {t.x(), t.y(), t.z()}}};
  j["units"] = "m-px";
  return j.dump(2) + "\n";
}

std::vector<Correspondence> parse_correspondences(std::string_view text) {
  const csv::Table t = csv::parse(text, "correspondences");
  const std::size_t cols[] = {t.column("X", "correspondences"), t.column("Y", "correspondences"),
                              t.column("Z", "correspondences"), t.column("u", "correspondences"),
                              t.column("v", "correspondences")};
  std::vector<Correspondence> out;
  for (const auto& [line, row] : t.rows) {
    double v[5];
    for (int k = 0; k < 5; ++k) v[k] = csv::to_double(row[cols[k]], "correspondences", line);
    out.push_back({{v[0], v[1], v[2]}, {v[3], v[4]}});
  }
  return out;
}

std::string write_correspondences(std::span<const Correspondence> refs) {
  std::string out = "X,Y,Z,u,v\n";
  for (const auto& r : refs) {
    out += csv::format_double(r.world.x()) + "," + csv::format_double(r.world.y()) + "," +
           csv::format_double(r.world.z()) + "," + csv::format_double(r.pixel.x()) + "," +
           csv::format_double(r.pixel.y()) + "\n";
  }
  return out;
}

}  // namespace possense
