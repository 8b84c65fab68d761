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

#include "possense/mapping.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "possense/csv.hpp"
#include "possense/error.hpp"

namespace possense {

using nlohmann::json;

Eigen::Vector2d MapExtent::to_local(const Eigen::Vector2d& world) const {
  const double c = std::cos(rotation_rad);
  const double s = std::sin(rotation_rad);
  const Eigen::Vector2d d = world - origin_xy;
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

Eigen::Vector2d MapExtent::to_world(const Eigen::Vector2d& local) const {
  const double c = std::cos(rotation_rad);
  const double s = std::sin(rotation_rad);
  return origin_xy + Eigen::Vector2d(c * local.x() - s * local.y(), s * local.x() + c * local.y());
}

bool MapExtent::contains(const Eigen::Vector2d& world) const {
  constexpr double slack = 1e-9;
  const Eigen::Vector2d p = to_local(world);
  return p.x() >= -slack && p.x() <= width_m + slack && p.y() >= -slack && p.y() <= length_m + slack;
}

void MapExtent::validate() const {
  if (!origin_xy.allFinite() || !std::isfinite(rotation_rad)) throw ConfigError("map extent: non-finite origin or rotation");
  if (!(width_m > 0.0) || !(length_m > 0.0)) throw ConfigError("map extent: width_m and length_m must be positive");
}

PriorTable PriorTable::defaults(const Taxonomy& taxonomy) {
  PriorTable t;
  if (const ClassDef* ped = taxonomy.find("pedestrian")) {
    t.fallback_ = {ped->id, 0.5, 0.6};
    t.set(t.fallback_);
  }
  if (const ClassDef* cyc = taxonomy.find("cyclist")) t.set({cyc->id, 0.5, 1.6});
  return t;
}

void PriorTable::set(const ClassPrior& prior) {
  if (!(prior.footprint_w > 0.0) || !(prior.footprint_l > 0.0)) {
    throw ConfigError("class prior for class " + std::to_string(prior.class_id) + " must have positive dimensions");
  }
  priors_[prior.class_id] = prior;
}

ClassPrior PriorTable::at(int class_id) const {
  const auto it = priors_.find(class_id);
  if (it != priors_.end()) return it->second;
  ClassPrior p = fallback_;
  p.class_id = class_id;
  return p;
}

namespace {

/// Midpoint of the vertices within 5% of the row span from one extreme.
Eigen::Vector2d band_midpoint(const PolygonSet& polys, bool bottom) {
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  for (const auto& poly : polys) {
    for (const auto& p : poly) {
      vmin = std::min(vmin, p.y());
      vmax = std::max(vmax, p.y());
    }
  }
  const double band = 0.05 * (vmax - vmin);
  double umin = std::numeric_limits<double>::infinity();
  double umax = -umin;
  double bmin = umin;
  double bmax = -umin;
  for (const auto& poly : polys) {
    for (const auto& p : poly) {
      const bool in = bottom ? p.y() >= vmax - band : p.y() <= vmin + band;
      if (!in) continue;
      umin = std::min(umin, p.x());
      umax = std::max(umax, p.x());
      bmin = std::min(bmin, p.y());
      bmax = std::max(bmax, p.y());
    }
  }
  return {0.5 * (umin + umax), 0.5 * (bmin + bmax)};
}

bool has_vertices(const PolygonSet& polys) {
  return std::any_of(polys.begin(), polys.end(), [](const Polygon& p) { return !p.empty(); });
}

bool has_bbox(const Annotation& a) { return a.bbox.w > 0.0 && a.bbox.h > 0.0; }

constexpr double kMinRayAngle = 1e-3;

}  // namespace

Eigen::Vector2d footpoint(const Annotation& d) {
  if (has_vertices(d.segmentation)) return band_midpoint(d.segmentation, true);
  if (has_bbox(d)) return {d.bbox.x + 0.5 * d.bbox.w, d.bbox.bottom()};
  throw DataError("detection " + std::to_string(d.id) + " has neither polygon nor bbox");
}

Eigen::Vector2d toppoint(const Annotation& d) {
  if (has_vertices(d.segmentation)) {
    // The band's row midpoint would mix in the near top edge of distant
    // objects; the height constraint uses the topmost row itself.
    Eigen::Vector2d p = band_midpoint(d.segmentation, false);
    for (const auto& poly : d.segmentation) {
      for (const auto& v : poly) p.y() = std::min(p.y(), v.y());
    }
    return p;
  }
  if (has_bbox(d)) return {d.bbox.x + 0.5 * d.bbox.w, d.bbox.y};
  throw DataError("detection " + std::to_string(d.id) + " has neither polygon nor bbox");
}

GroundObservation locate(const Annotation& d, const CameraModel& camera, const Treatment& treatment,
                         double timestamp, std::string_view source) {
  GroundObservation o;
  o.class_id = treatment(d.category_id);
  o.world_xy = back_project_to_ground(camera, footpoint(d)).head<2>();
  o.timestamp = timestamp;
  o.source_image_id = d.image_id;
  o.score = d.score.value_or(1.0);
  o.source = std::string(source);
  return o;
}

Box3D estimate_box3d(const Annotation& d, const CameraModel& camera, const ClassPrior& prior) {
  const Eigen::Vector3d c = camera.pose.center();
  const Eigen::Vector2d foot_px = footpoint(d);
  const Eigen::Vector3d foot_ray = pixel_ray(camera, foot_px);
  if (std::sqrt(foot_ray.x() * foot_ray.x() + foot_ray.y() * foot_ray.y()) < std::sin(kMinRayAngle)) {
    throw NumericError("detection " + std::to_string(d.id) + ": footpoint ray is vertical, yaw and height undefined");
  }
  const Eigen::Vector3d g = back_project_to_ground(camera, foot_px);

  Box3D box;
  box.w = prior.footprint_w;
  box.l = prior.footprint_l;
  const Eigen::Vector2d dir = (g.head<2>() - c.head<2>()).normalized();
  box.yaw = std::atan2(dir.y(), dir.x());
  box.center_xy = g.head<2>() + 0.5 * box.l * dir;

  const Eigen::Vector3d top_ray = pixel_ray(camera, toppoint(d));
  const double horizontal = std::sqrt(top_ray.x() * top_ray.x() + top_ray.y() * top_ray.y());
  if (horizontal < std::sin(kMinRayAngle)) {
    throw NumericError("detection " + std::to_string(d.id) + ": top-pixel ray is nearly vertical");
  }
  // Height of the point on the vertical line through `axis` closest to the top ray.
  auto height_at = [&](const Eigen::Vector2d& axis) {
    const Eigen::Vector3d w0 = c - Eigen::Vector3d(axis.x(), axis.y(), 0.0);
    return (w0.z() - top_ray.z() * top_ray.dot(w0)) / (1.0 - top_ray.z() * top_ray.z());
  };
  double h = height_at(g.head<2>() + box.l * dir);
  if (h >= c.z()) h = height_at(g.head<2>());
  box.height_clamped = !(h >= kMinBoxHeight && h <= kMaxBoxHeight);
  box.h = std::clamp(std::isfinite(h) ? h : kMinBoxHeight, kMinBoxHeight, kMaxBoxHeight);
  return box;
}

FrameMapping map_frame(std::span<const Annotation> detections, const CameraModel& camera, const Treatment& treatment,
                       const Taxonomy& taxonomy, const MapExtent& roi, double timestamp, std::string_view source) {
  const auto start = std::chrono::steady_clock::now();
  FrameMapping out;
  for (const auto& d : detections) {
    int cls = 0;
    try {
      cls = treatment(d.category_id);
    } catch (const Error& e) {
      out.failures.push_back({d.id, e.what()});
      continue;
    }
    if (!taxonomy.contains(cls) || taxonomy.super_category(cls) != SuperCategory::people) {
      ++out.non_people;
      continue;
    }
    try {
      GroundObservation o = locate(d, camera, treatment, timestamp, source);
      if (roi.contains(o.world_xy)) {
        out.observations.push_back(std::move(o));
      } else {
        ++out.out_of_extent;
      }
    } catch (const Error& e) {
      out.failures.push_back({d.id, e.what()});
    }
  }
  out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

MapExtent parse_extent(std::string_view text) {
  MapExtent e;
  try {
    const json j = json::parse(text);
    const json& o = j.at("origin_xy");
    e.origin_xy = {o.at(0).get<double>(), o.at(1).get<double>()};
    e.width_m = j.at("width_m").get<double>();
    e.length_m = j.at("length_m").get<double>();
    e.rotation_rad = j.value("rotation_rad", 0.0);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("map extent: ") + ex.what());
  }
  e.validate();
  return e;
}

std::string write_extent(const MapExtent& e) {
  const nlohmann::ordered_json j = {{"origin_xy", {e.origin_xy.x(), e.origin_xy.y()}},
                                    {"width_m", e.width_m},
                                    {"length_m", e.length_m},
                                    {"rotation_rad", e.rotation_rad}};
  return j.dump();
}

std::string write_observations_csv(std::span<const GroundObservation> obs, const Taxonomy& taxonomy) {
  std::string out = "ts,image_id,class,X,Y,score,source\n";
  for (const auto& o : obs) {
    out += csv::format_double(o.timestamp) + "," + std::to_string(o.source_image_id) + "," +
           taxonomy.at(o.class_id).name + "," + csv::format_double(o.world_xy.x()) + "," +
           csv::format_double(o.world_xy.y()) + "," + csv::format_double(o.score) + "," + o.source + "\n";
  }
  return out;
}

std::vector<GroundObservation> parse_observations_csv(std::string_view text, const Taxonomy& taxonomy) {
  const csv::Table t = csv::parse(text, "observations");
  const std::size_t c_ts = t.column("ts", "observations");
  const std::size_t c_img = t.column("image_id", "observations");
  const std::size_t c_cls = t.column("class", "observations");
  const std::size_t c_x = t.column("X", "observations");
  const std::size_t c_y = t.column("Y", "observations");
  const std::size_t c_score = t.column("score", "observations");
  const auto src_it = std::find(t.header.begin(), t.header.end(), "source");
  std::vector<GroundObservation> out;
  for (const auto& [line, row] : t.rows) {
    GroundObservation o;
    o.timestamp = csv::to_double(row[c_ts], "observations", line);
    o.source_image_id = csv::to_int(row[c_img], "observations", line);
    const ClassDef* cls = taxonomy.find(row[c_cls]);
    if (cls == nullptr) {
      throw DataError("observations:" + std::to_string(line) + ": unknown class '" + row[c_cls] + "'");
    }
    o.class_id = cls->id;
    o.world_xy = {csv::to_double(row[c_x], "observations", line), csv::to_double(row[c_y], "observations", line)};
    o.score = csv::to_double(row[c_score], "observations", line);
    if (src_it != t.header.end()) o.source = row[static_cast<std::size_t>(src_it - t.header.begin())];
    if (!o.world_xy.allFinite() || !std::isfinite(o.timestamp)) {
      throw DataError("observations:" + std::to_string(line) + ": non-finite value");
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::string write_observations_jsonl(std::span<const GroundObservation> obs, const Taxonomy& taxonomy) {
  std::string out;
  for (const auto& o : obs) {
    const nlohmann::ordered_json j = {{"ts", o.timestamp},         {"image_id", o.source_image_id},
                                      {"class", taxonomy.at(o.class_id).name},
                                      {"X", o.world_xy.x()},       {"Y", o.world_xy.y()},
                                      {"score", o.score},          {"source", o.source}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<GroundObservation> parse_observations_jsonl(std::string_view text, const Taxonomy& taxonomy) {
  std::vector<GroundObservation> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "observations:" + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      GroundObservation o;
      o.timestamp = j.at("ts").get<double>();
      o.source_image_id = j.at("image_id").get<std::int64_t>();
      const std::string name = j.at("class").get<std::string>();
      const ClassDef* cls = taxonomy.find(name);
      if (cls == nullptr) throw DataError(where + ": unknown class '" + name + "'");
      o.class_id = cls->id;
      o.world_xy = {j.at("X").get<double>(), j.at("Y").get<double>()};
      o.score = j.value("score", 1.0);
      o.source = j.value("source", std::string());
      out.push_back(std::move(o));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace possense
