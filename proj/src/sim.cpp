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

#include "possense/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "possense/camera_io.hpp"
#include "possense/coco_io.hpp"
#include "possense/error.hpp"
#include "possense/log.hpp"
#include "possense/parallel.hpp"

namespace possense {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<Eigen::Vector2d> Agent::position(double t) const {
  if (path.empty() || t < path.front().t || t > path.back().t) return std::nullopt;
  if (path.size() == 1) return path.front().xy;
  const auto it = std::upper_bound(path.begin(), path.end(), t, [](double v, const Waypoint& w) { return v < w.t; });
  if (it == path.end()) return path.back().xy;
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double span = b.t - a.t;
  const double s = span > 0.0 ? (t - a.t) / span : 0.0;
  return a.xy + s * (b.xy - a.xy);
}

int Scenario::frame_count() const {
  return std::max(1, static_cast<int>(std::floor(duration_s * fps + 1e-9)));
}

void Scenario::validate() const {
  auto rate = [](double r, const char* name) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError(std::string("scenario: ") + name + " must lie in [0, 1]");
  };
  rate(noise.miss_rate, "miss_rate");
  rate(noise.confusion_rate, "confusion_rate");
  if (!(noise.pixel_sigma >= 0.0)) throw ConfigError("scenario: pixel_sigma must be non-negative");
  if (!(noise.score_min >= 0.0 && noise.score_min <= noise.score_max && noise.score_max <= 1.0)) {
    throw ConfigError("scenario: score range must satisfy 0 <= score_min <= score_max <= 1");
  }
  if (!(fps > 0.0) || !(duration_s >= 0.0)) throw ConfigError("scenario: fps must be positive, duration non-negative");
  extent.validate();
  for (const auto& c : cameras) c.model.validate();
  for (const auto& a : agents) {
    if (!(a.height > 0.0) || !(a.w > 0.0) || !(a.l > 0.0)) {
      throw ConfigError("scenario: agent " + std::to_string(a.id) + " has non-positive dimensions");
    }
    for (std::size_t i = 0; i < a.path.size(); ++i) {
      if (i > 0 && a.path[i].t < a.path[i - 1].t) {
        throw ConfigError("scenario: agent " + std::to_string(a.id) + " path is not sorted by time");
      }
      if (!extent.contains(a.path[i].xy)) {
        throw ConfigError("scenario: agent " + std::to_string(a.id) + " leaves the declared extent");
      }
    }
  }
}

Eigen::Vector2d viewing_direction(const CameraModel& camera) {
  const Eigen::Vector3d axis = camera.pose.rotation().transpose() * Eigen::Vector3d::UnitZ();
  const Eigen::Vector2d h = axis.head<2>();
  if (h.norm() < 1e-9) return Eigen::Vector2d::UnitY();
  return h.normalized();
}

std::vector<Eigen::Vector3d> agent_corners(const Agent& agent, const Eigen::Vector2d& contact,
                                           const Eigen::Vector2d& forward) {
  const Eigen::Vector2d side(-forward.y(), forward.x());
  std::vector<Eigen::Vector3d> out;
  for (const double z : {0.0, agent.height}) {
    for (const double along : {0.0, agent.l}) {
      for (const double across : {-0.5 * agent.w, 0.5 * agent.w}) {
        const Eigen::Vector2d p = contact + along * forward + across * side;
        out.emplace_back(p.x(), p.y(), z);
      }
    }
  }
  return out;
}

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Andrew's monotone chain.
Polygon convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Projected corners when the whole cuboid is in front of the camera and
/// inside the image, else nothing.
std::optional<std::vector<Point2>> project_agent(const CameraModel& cam, const Agent& agent,
                                                 const Eigen::Vector2d& contact) {
  std::vector<Point2> px;
  for (const auto& c : agent_corners(agent, contact, viewing_direction(cam))) {
    if (cam.pose.to_camera(c).z() < 0.1) return std::nullopt;
    const Point2 p = project(cam, c);
    if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= cam.image_size.width && p.y() <= cam.image_size.height)) {
      return std::nullopt;
    }
    px.push_back(p);
  }
  return px;
}

struct FrameSlot {
  std::vector<ImageRecord> images;
  std::vector<Annotation> truth_anns;
  std::vector<GroundObservation> truth;
  std::vector<double> heights;
  std::vector<Annotation> detections;
  std::vector<std::size_t> detection_truth;  // local index into truth
  std::vector<int> visible_agents;
};

std::vector<std::vector<int>> same_super_category(const Taxonomy& taxonomy) {
  std::vector<std::vector<int>> out(taxonomy.size() + 1);
  for (const auto& a : taxonomy.classes()) {
    for (const auto& b : taxonomy.classes()) {
      if (a.id != b.id && a.super_category == b.super_category) out[a.id].push_back(b.id);
    }
  }
  return out;
}

}  // namespace

SimOutput render_detections(const Scenario& s, const Taxonomy& taxonomy, int jobs) {
  s.validate();
  for (const auto& a : s.agents) {
    if (!taxonomy.contains(a.class_id)) {
      throw ConfigError("scenario: agent " + std::to_string(a.id) + " has unknown class " + std::to_string(a.class_id));
    }
  }
  const int frames = s.frame_count();
  const auto n_cams = static_cast<int>(s.cameras.size());
  const auto siblings = same_super_category(taxonomy);
  const CounterRng root(s.seed);
  std::vector<FrameSlot> slots(static_cast<std::size_t>(frames));

  parallel_for(slots.size(), jobs, [&](std::size_t f) {
    FrameSlot& slot = slots[f];
    const double t = static_cast<double>(f) / s.fps;
    for (int c = 0; c < n_cams; ++c) {
      const SimCamera& cam = s.cameras[static_cast<std::size_t>(c)];
      ImageRecord im;
      im.id = static_cast<std::int64_t>(f) * n_cams + c + 1;
      char name[64];
      std::snprintf(name, sizeof name, "/frame_%06zu.jpg", f);
      im.file_name = cam.name + name;
      im.width = cam.model.image_size.width;
      im.height = cam.model.image_size.height;
      im.extra["timestamp"] = t;
      im.extra["scene"] = cam.name;
      slot.images.push_back(im);
      const CounterRng frame_rng = root.derive(f).derive(static_cast<std::uint64_t>(c));
      for (const auto& agent : s.agents) {
        const auto pos = agent.position(t);
        if (!pos) continue;
        const auto corners = project_agent(cam.model, agent, *pos);
        if (!corners) continue;
        slot.visible_agents.push_back(agent.id);

        Annotation gt;
        gt.image_id = im.id;
        gt.category_id = agent.class_id;
        gt.segmentation = {convex_hull(*corners)};
        derive_geometry(gt);
        gt.extra["agent_id"] = agent.id;
        slot.truth_anns.push_back(gt);
        slot.truth.push_back({agent.class_id, *pos, t, im.id, 1.0, cam.name});
        slot.heights.push_back(agent.height);

        CounterRng rng = frame_rng.derive(static_cast<std::uint64_t>(agent.id));
        if (rng.bernoulli(s.noise.miss_rate)) continue;
        Annotation det = gt;
        if (rng.bernoulli(s.noise.confusion_rate)) {
          const auto& options = siblings[static_cast<std::size_t>(agent.class_id)];
          if (!options.empty()) det.category_id = options[rng.below(options.size())];
        }
        for (auto& v : det.segmentation[0]) {
          const double dx = rng.normal(0.0, s.noise.pixel_sigma);
          const double dy = rng.normal(0.0, s.noise.pixel_sigma);
          v += Point2(dx, dy);
        }
        clamp_polygons(det.segmentation, im.width, im.height);
        derive_geometry(det);
        if (!(det.bbox.w > 0.0 && det.bbox.h > 0.0)) continue;
        det.score = rng.uniform(s.noise.score_min, s.noise.score_max);
        slot.detections.push_back(std::move(det));
        slot.detection_truth.push_back(slot.truth.size() - 1);
      }
    }
  });

  SimOutput out;
  out.ground_truth.info = {{"description", "possense simulator"}, {"seed", s.seed}};
  out.ground_truth.categories = categories_from(taxonomy);
  std::vector<bool> seen(s.agents.empty() ? 0 : static_cast<std::size_t>(
                                                    std::max_element(s.agents.begin(), s.agents.end(),
                                                                     [](const Agent& a, const Agent& b) {
                                                                       return a.id < b.id;
                                                                     })->id + 1),
                         false);
  for (auto& slot : slots) {
    const std::size_t base = out.truth.size();
    for (auto& im : slot.images) out.ground_truth.images.push_back(std::move(im));
    for (auto& a : slot.truth_anns) {
      a.id = static_cast<std::int64_t>(out.ground_truth.annotations.size()) + 1;
      out.ground_truth.annotations.push_back(std::move(a));
    }
    for (auto& o : slot.truth) out.truth.push_back(std::move(o));
    out.truth_heights.insert(out.truth_heights.end(), slot.heights.begin(), slot.heights.end());
    for (std::size_t i = 0; i < slot.detections.size(); ++i) {
      Annotation& d = slot.detections[i];
      d.id = static_cast<std::int64_t>(out.detections.size()) + 1;
      out.detections.push_back(std::move(d));
      out.detection_truth.push_back(base + slot.detection_truth[i]);
    }
    for (int id : slot.visible_agents) {
      if (id >= 0 && static_cast<std::size_t>(id) < seen.size()) seen[static_cast<std::size_t>(id)] = true;
    }
  }
  for (const auto& a : s.agents) {
    if (a.id >= 0 && !seen[static_cast<std::size_t>(a.id)]) {
      log::warn("scenario: agent " + std::to_string(a.id) + " is never fully visible to any camera");
    }
  }
  return out;
}

CameraModel cullen_rig(double height_m) {
  CameraModel c;
  c.intrinsics = {1000.0, 1000.0, 554.0, 416.0, 0.0};
  c.distortion = {-0.05, 0.005, 0.0, 0.0, 0.0};
  c.image_size = {1108, 832};
  c.pose = Pose::look_at({0.0, 0.0, height_m}, {0.0, 15.0, 0.0});
  return c;
}

CameraModel dequindre_rig() {
  CameraModel c;
  c.intrinsics = {900.0, 900.0, 640.0, 360.0, 0.0};
  c.image_size = {1280, 720};
  c.pose = Pose::look_at({2.25, -6.0, 7.0}, {2.25, 7.0, 0.0});
  return c;
}

MapExtent dequindre_extent() { return {{0.0, 0.0}, 4.5, 32.0, 0.0}; }

std::vector<Correspondence> reference_points(const CameraModel& camera, int n, CounterRng& rng, double max_range_m) {
  const Eigen::Vector3d c = camera.pose.center();
  const Eigen::Vector2d fwd = viewing_direction(camera);
  const Eigen::Vector2d side(-fwd.y(), fwd.x());
  constexpr double margin = 40.0;
  std::vector<Correspondence> out;
  for (int tries = 0; static_cast<int>(out.size()) < n; ++tries) {
    if (tries > 10000 * n) throw NumericError("reference_points: camera sees too little ground");
    const Eigen::Vector2d xy = c.head<2>() + rng.uniform(0.5, max_range_m) * fwd + rng.uniform(-max_range_m, max_range_m) * side;
    const Eigen::Vector3d g(xy.x(), xy.y(), 0.0);
    if (camera.pose.to_camera(g).z() < 0.5) continue;
    const Eigen::Vector2d p = project(camera, g);
    if (p.x() < margin || p.y() < margin || p.x() > camera.image_size.width - margin ||
        p.y() > camera.image_size.height - margin) {
      continue;
    }
    out.push_back({g, p});
  }
  return out;
}

namespace {

Agent make_agent(int id, int class_id, double height, const PriorTable& priors) {
  Agent a;
  a.id = id;
  a.class_id = class_id;
  a.height = height;
  const ClassPrior p = priors.at(class_id);
  a.w = p.footprint_w;
  a.l = p.footprint_l;
  return a;
}

Eigen::Vector2d nearest_on_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return a + s * ab;
}

/// Walker along the local length axis at lateral offset u, entering at t0.
Agent through_walker(int id, int class_id, double height, const PriorTable& priors, const MapExtent& extent,
                     double u, double t0, double speed, bool forward) {
  Agent a = make_agent(id, class_id, height, priors);
  const double crossing = extent.length_m / speed;
  const Eigen::Vector2d start = extent.to_world({u, forward ? 0.0 : extent.length_m});
  const Eigen::Vector2d end = extent.to_world({u, forward ? extent.length_m : 0.0});
  a.path = {{t0, start}, {t0 + crossing, end}};
  return a;
}

}  // namespace

Scenario edge_scenario(const MapExtent& extent, const std::optional<Attractor>& attractor,
                       const EdgeScenarioOptions& opt, const Taxonomy& taxonomy) {
  extent.validate();
  Scenario s;
  s.extent = extent;
  s.duration_s = opt.duration_s;
  s.fps = opt.fps;
  s.seed = opt.seed;
  const PriorTable priors = PriorTable::defaults(taxonomy);
  const int pedestrian = taxonomy.id_of("pedestrian");
  const int cyclist = taxonomy.id_of("cyclist");
  const int sitter = taxonomy.id_of("sitter");
  CounterRng rng(opt.seed, 0xed6e);
  int next_id = 1;

  if (attractor) {
    const Attractor& at = *attractor;
    auto sample_near = [&]() -> Eigen::Vector2d {
      for (int tries = 0; tries < 100000; ++tries) {
        const Eigen::Vector2d base = at.a + rng.uniform() * (at.b - at.a);
        const double r = at.radius_m * std::sqrt(rng.uniform());
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Eigen::Vector2d p = base + r * Eigen::Vector2d(std::cos(phi), std::sin(phi));
        if ((p - nearest_on_segment(p, at.a, at.b)).norm() <= at.radius_m && extent.contains(p)) return p;
      }
      throw ConfigError("edge_scenario: attractor neighbourhood does not intersect the extent");
    };
    constexpr double kDwellStep = 5.0;
    for (int i = 0; i < opt.dwellers; ++i) {
      Agent a = make_agent(next_id++, rng.bernoulli(0.5) ? sitter : pedestrian, 0.0, priors);
      a.height = a.class_id == sitter ? rng.uniform(1.1, 1.3) : rng.uniform(1.6, 1.85);
      for (double t = 0.0;; t += kDwellStep) {
        a.path.push_back({std::min(t, opt.duration_s), sample_near()});
        if (t >= opt.duration_s) break;
      }
      s.agents.push_back(std::move(a));
    }
  }
  for (int i = 0; i < opt.through; ++i) {
    const bool bike = rng.bernoulli(0.2);
    const double speed = bike ? 3.5 * opt.walk_speed : opt.walk_speed;
    const double crossing = extent.length_m / speed;
    const double t0 = rng.uniform(-crossing, opt.duration_s);
    const double u = rng.uniform(0.0, extent.width_m);
    s.agents.push_back(through_walker(next_id++, bike ? cyclist : pedestrian, rng.uniform(1.6, 1.85), priors, extent, u,
                                      t0, speed, rng.bernoulli(0.5)));
  }
  return s;
}

std::vector<GroundObservation> ground_truth_stream(const Scenario& s) {
  std::vector<GroundObservation> out;
  const int frames = s.frame_count();
  for (int f = 0; f < frames; ++f) {
    const double t = f / s.fps;
    for (const auto& a : s.agents) {
      if (const auto p = a.position(t)) out.push_back({a.class_id, *p, t, f + 1, 1.0, "truth"});
    }
  }
  return out;
}

Scenario pass_through_scenario(const Taxonomy& taxonomy, std::uint64_t seed, int pedestrians) {
  Scenario s;
  s.extent = dequindre_extent();
  s.cameras = {{"dequindre", dequindre_rig()}};
  s.duration_s = 12.0;
  s.fps = 5.0;
  s.seed = seed;
  const PriorTable priors = PriorTable::defaults(taxonomy);
  CounterRng rng(seed, 0xd3);
  const double lanes[] = {1.0, 1.9, 2.8, 3.6};
  int id = 1;
  for (int i = 0; i < 4; ++i) {
    s.agents.push_back(through_walker(id++, taxonomy.id_of("cyclist"), rng.uniform(1.65, 1.8), priors, s.extent,
                                      lanes[i], 1.5 * i, rng.uniform(4.5, 6.0), i % 2 == 0));
  }
  for (int i = 0; i < pedestrians; ++i) {
    const double speed = rng.uniform(1.1, 1.5);
    s.agents.push_back(through_walker(id++, taxonomy.id_of("pedestrian"), rng.uniform(1.6, 1.85), priors, s.extent,
                                      rng.uniform(0.3, 4.2), rng.uniform(-s.extent.length_m / speed, s.duration_s),
                                      speed, rng.bernoulli(0.5)));
  }
  return s;
}

Scenario static_crowd(const CameraModel& camera, const MapExtent& extent, int n, int class_id, double height,
                      std::uint64_t seed) {
  Scenario s;
  s.extent = extent;
  s.cameras = {{"static", camera}};
  s.duration_s = 0.0;
  s.fps = 1.0;
  s.seed = seed;
  const PriorTable priors = PriorTable::defaults(Taxonomy::opos());
  CounterRng rng(seed, 0x5c);
  for (int tries = 0; static_cast<int>(s.agents.size()) < n; ++tries) {
    if (tries > 1000 * n) throw ConfigError("static_crowd: too few visible positions in the extent");
    Agent a = make_agent(static_cast<int>(s.agents.size()) + 1, class_id, height, priors);
    const Eigen::Vector2d p = extent.to_world({rng.uniform(0.0, extent.width_m), rng.uniform(0.0, extent.length_m)});
    if (!project_agent(camera, a, p)) continue;
    a.path = {{0.0, p}};
    s.agents.push_back(std::move(a));
  }
  return s;
}

Scenario parse_scenario(std::string_view text, const Taxonomy& taxonomy) {
  Scenario s;
  try {
    const json j = json::parse(text);
    s.seed = j.value("seed", std::uint64_t{0});
    s.duration_s = j.value("duration_s", 10.0);
    s.fps = j.value("fps", 10.0);
    if (j.contains("noise")) {
      const json& n = j["noise"];
      s.noise.pixel_sigma = n.value("pixel_sigma", 0.0);
      s.noise.miss_rate = n.value("miss_rate", 0.0);
      s.noise.confusion_rate = n.value("confusion_rate", 0.0);
      s.noise.score_min = n.value("score_min", 0.5);
      s.noise.score_max = n.value("score_max", 1.0);
    }
    s.extent = parse_extent(j.at("extent").dump());
    for (const auto& c : j.value("cameras", json::array())) {
      s.cameras.push_back({c.value("name", "cam" + std::to_string(s.cameras.size())), parse_camera(c.dump())});
    }
    for (const auto& a : j.value("agents", json::array())) {
      Agent agent;
      agent.id = a.at("id").get<int>();
      const std::string cls = a.at("class").get<std::string>();
      const ClassDef* def = taxonomy.find(cls);
      if (def == nullptr) throw ConfigError("scenario: agent " + std::to_string(agent.id) + " has unknown class " + cls);
      agent.class_id = def->id;
      const ClassPrior prior = PriorTable::defaults(taxonomy).at(def->id);
      agent.height = a.value("height", 1.75);
      agent.w = a.value("w", prior.footprint_w);
      agent.l = a.value("l", prior.footprint_l);
      for (const auto& w : a.at("path")) agent.path.push_back({w.at(0).get<double>(), {w.at(1).get<double>(), w.at(2).get<double>()}});
      s.agents.push_back(std::move(agent));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

std::string write_scenario(const Scenario& s, const Taxonomy& taxonomy) {
  ordered_json j;
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["fps"] = s.fps;
  j["noise"] = {{"pixel_sigma", s.noise.pixel_sigma}, {"miss_rate", s.noise.miss_rate},
                {"confusion_rate", s.noise.confusion_rate}, {"score_min", s.noise.score_min},
                {"score_max", s.noise.score_max}};
  j["extent"] = ordered_json::parse(write_extent(s.extent));
  j["cameras"] = ordered_json::array();
  for (const auto& c : s.cameras) {
    ordered_json cj = ordered_json::parse(write_camera(c.model));
    cj["name"] = c.name;
    j["cameras"].push_back(std::move(cj));
  }
  j["agents"] = ordered_json::array();
  for (const auto& a : s.agents) {
    ordered_json path = ordered_json::array();
    for (const auto& w : a.path) path.push_back({w.t, w.xy.x(), w.xy.y()});
    j["agents"].push_back({{"id", a.id},
                           {"class", taxonomy.at(a.class_id).name},
                           {"height", a.height},
                           {"w", a.w},
                           {"l", a.l},
                           {"path", std::move(path)}});
  }
  return j.dump(1) + "\n";
}

}  // namespace possense
