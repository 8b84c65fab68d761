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

#include "possense/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "possense/calibration.hpp"
#include "possense/camera_io.hpp"
#include "possense/coco_io.hpp"
#include "possense/csv.hpp"
#include "possense/density.hpp"
#include "possense/error.hpp"
#include "possense/eval.hpp"
#include "possense/log.hpp"
#include "possense/mapping.hpp"
#include "possense/parallel.hpp"
#include "possense/sim.hpp"

namespace possense {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string taxonomy_path;
  std::string treatment = "merging";
  int jobs = 1;
  std::string out_dir = ".";
  std::string log_level = "warn";
};

/// Collects what a run read and wrote, for the manifest.
class Run {
 public:
  explicit Run(const Globals& g) : g_(g) {}

  std::string read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open input file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    inputs_.push_back({{"path", path}, {"bytes", text.size()}});
    return text;
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = fs::path(g_.out_dir) / name;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    std::ofstream o(p, std::ios::binary);
    if (!o) throw ConfigError("cannot write output file '" + p.string() + "'");
    o << content;
    if (!o) throw ConfigError("failed writing '" + p.string() + "'");
    outputs_.push_back({{"path", p.string()}, {"bytes", content.size()}});
  }

  /// Parses with `fn`, prefixing data errors with the file path.
  template <class Fn>
  auto parse(const std::string& path, Fn&& fn) {
    const std::string text = read(path);
    try {
      return fn(text);
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }

  void time(const std::string& stage, double seconds) { timings_[stage] = seconds; }
  void stat(const std::string& key, ojson value) { stats_[key] = std::move(value); }

  ojson manifest(const std::string& sub, const std::vector<std::string>& args, const ojson& config) const {
    ojson m;
    m["tool"] = "possense";
    m["version"] = kVersion;
    m["subcommand"] = sub;
    m["argv"] = args;
    m["config"] = config;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["timings_s"] = timings_;
    m["stats"] = stats_;
    return m;
  }

  const Globals& globals() const { return g_; }

 private:
  const Globals& g_;
  ojson inputs_ = ojson::array();
  ojson outputs_ = ojson::array();
  ojson timings_ = ojson::object();
  ojson stats_ = ojson::object();
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Taxonomy load_taxonomy(Run& run) {
  if (run.globals().taxonomy_path.empty()) return Taxonomy::opos();
  return run.parse(run.globals().taxonomy_path, [](const std::string& t) { return Taxonomy::from_json(t); });
}

const Treatment& treatment_of(const Taxonomy& tax, const Globals& g) {
  return tax.treatment(treatment_from_string(g.treatment));
}

std::vector<int> class_ids(const Taxonomy& tax, const std::vector<std::string>& names) {
  std::vector<int> ids;
  for (const auto& n : names) {
    const ClassDef* c = tax.find(n);
    if (!c) throw ConfigError("unknown class '" + n + "'");
    ids.push_back(c->id);
  }
  return ids;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string intrinsics;
  std::string refs;
  std::vector<std::string> views;
  std::string image_size;
};

ImageSize parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--image-size must look like 1108x832, got '" + s + "'");
  }
}

void cmd_calibrate(Run& run, const CalibrateArgs& a) {
  if (a.intrinsics.empty() == a.views.empty()) {
    throw ConfigError("calibrate: give exactly one of --intrinsics or --view");
  }
  CameraModel cam;
  ojson report;
  const auto t0 = std::chrono::steady_clock::now();
  if (!a.views.empty()) {
    if (a.image_size.empty()) throw ConfigError("calibrate: --image-size is required with --view");
    std::vector<PlanarView> views;
    for (const auto& v : a.views) views.push_back(run.parse(v, [](const std::string& t) { return parse_correspondences(t); }));
    const IntrinsicResult r = calibrate_intrinsics_planar(views);
    cam.intrinsics = r.intrinsics;
    cam.distortion = r.distortion;
    cam.image_size = parse_size(a.image_size);
    report["intrinsics"] = {{"rms_px", r.rms_px}, {"status", std::string(to_string(r.status))},
                            {"iterations", r.iterations}, {"views", views.size()}};
  } else {
    cam = run.parse(a.intrinsics, [](const std::string& t) { return parse_camera(t, false); });
  }
  if (!a.refs.empty()) {
    const auto refs = run.parse(a.refs, [](const std::string& t) { return parse_correspondences(t); });
    const ExtrinsicResult r = solve_extrinsics(cam.intrinsics, cam.distortion, refs);
    cam.pose = r.pose;
    cam.validate();
    report["extrinsics"] = {{"rms_px", r.rms_px}, {"status", std::string(to_string(r.status))},
                            {"iterations", r.iterations}, {"references", refs.size()}};
    std::vector<Correspondence> ground;
    for (const auto& c : refs) {
      if (c.world.z() == 0.0) ground.push_back(c);
    }
    if (!ground.empty()) {
      const MappingError e = ground_mapping_error(cam, ground);
      report["ground_mapping"] = {{"mean_m", e.mean_m}, {"max_m", e.max_m}, {"per_point_m", e.per_point}};
    }
  } else if (a.views.empty()) {
    throw ConfigError("calibrate: --refs is required with --intrinsics");
  }
  run.time("calibrate", seconds_since(t0));
  run.write("camera.json", write_camera(cam));
  run.write("calibration.json", report.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct ProjectArgs {
  std::string camera;
  std::string points;
  std::string pixels;
};

void cmd_project(Run& run, const ProjectArgs& a) {
  if (a.points.empty() == a.pixels.empty()) throw ConfigError("project: give exactly one of --points or --pixels");
  const CameraModel cam = run.parse(a.camera, [](const std::string& t) { return parse_camera(t); });
  std::string out;
  if (!a.points.empty()) {
    const csv::Table t = run.parse(a.points, [&](const std::string& s) { return csv::parse(s, a.points); });
    const auto cx = t.column("X", a.points), cy = t.column("Y", a.points), cz = t.column("Z", a.points);
    out = "X,Y,Z,u,v\n";
    for (const auto& [line, cells] : t.rows) {
      const Eigen::Vector3d w{csv::to_double(cells[cx], a.points, line),
                              csv::to_double(cells[cy], a.points, line),
                              csv::to_double(cells[cz], a.points, line)};
      const Eigen::Vector2d px = project(cam, w);
      out += csv::format_double(w.x()) + ',' + csv::format_double(w.y()) + ',' + csv::format_double(w.z()) + ',' +
             csv::format_double(px.x()) + ',' + csv::format_double(px.y()) + '\n';
    }
  } else {
    const csv::Table t = run.parse(a.pixels, [&](const std::string& s) { return csv::parse(s, a.pixels); });
    const auto cu = t.column("u", a.pixels), cv = t.column("v", a.pixels);
    out = "u,v,X,Y\n";
    for (const auto& [line, cells] : t.rows) {
      const Eigen::Vector2d px{csv::to_double(cells[cu], a.pixels, line),
                               csv::to_double(cells[cv], a.pixels, line)};
      const Eigen::Vector3d g = back_project_to_ground(cam, px);
      out += csv::format_double(px.x()) + ',' + csv::format_double(px.y()) + ',' + csv::format_double(g.x()) + ',' +
             csv::format_double(g.y()) + '\n';
    }
  }
  run.write("projection.csv", out);
}

// ---------------------------------------------------------------------------

struct MapArgs {
  std::string camera;
  std::string dets;
  std::string images;
  std::string extent;
  std::string source;
  std::string format = "csv";
  bool boxes = false;
};

void cmd_map(Run& run, const MapArgs& a) {
  const Taxonomy tax = load_taxonomy(run);
  const Treatment& treatment = treatment_of(tax, run.globals());
  const CameraModel cam = run.parse(a.camera, [](const std::string& t) { return parse_camera(t); });
  Dataset images;
  if (!a.images.empty()) images = run.parse(a.images, [](const std::string& t) { return parse_dataset(t); });
  const auto dets = run.parse(a.dets, [&](const std::string& t) {
    return parse_detections(t, a.images.empty() ? nullptr : &images);
  });
  MapExtent roi{{-1e6, -1e6}, 2e6, 2e6, 0.0};
  if (!a.extent.empty()) roi = run.parse(a.extent, [](const std::string& t) { return parse_extent(t); });
  const std::string source = a.source.empty() ? fs::path(a.camera).stem().string() : a.source;

  std::map<std::int64_t, std::vector<Annotation>> frames;
  for (const auto& d : dets) frames[d.image_id].push_back(d);
  for (const auto& im : images.images) frames.try_emplace(im.id);
  std::vector<std::int64_t> ids;
  for (const auto& [id, v] : frames) ids.push_back(id);

  auto timestamp_of = [&](std::int64_t id) {
    const ImageRecord* im = images.find_image(id);
    if (im && im->extra.is_object() && im->extra.contains("timestamp") && im->extra["timestamp"].is_number()) {
      return im->extra["timestamp"].get<double>();
    }
    return 0.0;
  };
  // Frames ordered by time so each source stream stays monotone.
  std::stable_sort(ids.begin(), ids.end(), [&](auto x, auto y) { return timestamp_of(x) < timestamp_of(y); });

  const PriorTable priors = PriorTable::defaults(tax);
  std::vector<FrameMapping> results(ids.size());
  std::vector<std::string> box_rows(ids.size());
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(ids.size(), resolve_jobs(run.globals().jobs), [&](std::size_t i) {
    const auto& fd = frames[ids[i]];
    results[i] = map_frame(fd, cam, treatment, tax, roi, timestamp_of(ids[i]), source);
    if (!a.boxes) return;
    for (const Annotation& d : fd) {
      const int cls = treatment(d.category_id);
      if (tax.super_category(cls) != SuperCategory::people) continue;
      try {
        const Box3D b = estimate_box3d(d, cam, priors.at(cls));
        box_rows[i] += std::to_string(d.id) + ',' + std::to_string(d.image_id) + ',' + tax.at(cls).name + ',' +
                       csv::format_double(b.center_xy.x()) + ',' + csv::format_double(b.center_xy.y()) + ',' +
                       csv::format_double(b.yaw) + ',' + csv::format_double(b.w) + ',' + csv::format_double(b.l) +
                       ',' + csv::format_double(b.h) + ',' + (b.height_clamped ? "1" : "0") + '\n';
      } catch (const NumericError& e) {
        log::warn("detection " + std::to_string(d.id) + ": no 3D box: " + e.what());
      }
    }
  });
  const double elapsed = seconds_since(t0);

  std::vector<GroundObservation> obs;
  int out_of_extent = 0, non_people = 0;
  ojson failures = ojson::array();
  for (const auto& r : results) {
    obs.insert(obs.end(), r.observations.begin(), r.observations.end());
    out_of_extent += r.out_of_extent;
    non_people += r.non_people;
    for (const auto& f : r.failures) failures.push_back({{"detection_id", f.detection_id}, {"reason", f.reason}});
  }
  for (const auto& f : failures) log::warn("detection " + std::to_string(f["detection_id"].get<std::int64_t>()) + ": " + f["reason"].get<std::string>());
  if (a.format == "csv") {
    run.write("observations.csv", write_observations_csv(obs, tax));
  } else {
    run.write("observations.jsonl", write_observations_jsonl(obs, tax));
  }
  if (a.boxes) {
    std::string out = "detection_id,image_id,class,X,Y,yaw,w,l,h,height_clamped\n";
    for (const auto& r : box_rows) out += r;
    run.write("boxes.csv", out);
  }
  ojson summary;
  summary["frames"] = ids.size();
  summary["detections"] = dets.size();
  summary["observations"] = obs.size();
  summary["out_of_extent"] = out_of_extent;
  summary["non_people"] = non_people;
  summary["failures"] = failures;
  run.write("mapping.json", summary.dump(2) + "\n");
  run.time("map", elapsed);
  run.stat("map_frames_per_s", elapsed > 0 ? ojson(static_cast<double>(ids.size()) / elapsed) : ojson(nullptr));
}

// ---------------------------------------------------------------------------

struct DensityArgs {
  std::vector<std::string> obs;
  std::string extent;
  double cell_size = kDefaultCellSize;
  std::string bandwidth = "auto";
  double fps = 1.0;
  std::vector<std::string> classes;
  std::vector<double> window;
  std::vector<std::string> merge;
  std::string name = "density";
  bool pgm = false;
};

void cmd_density(Run& run, const DensityArgs& a) {
  const Taxonomy tax = load_taxonomy(run);
  DensityRaster r;
  const auto t0 = std::chrono::steady_clock::now();
  if (!a.merge.empty()) {
    if (!a.obs.empty()) throw ConfigError("density: --merge cannot be combined with --obs");
    bool first = true;
    for (const auto& prefix : a.merge) {
      const std::string header = run.read(prefix + ".json");
      const std::string grid = run.read(prefix + ".csv");
      DensityRaster next;
      try {
        next = parse_raster(header, grid, tax);
      } catch (const DataError& e) {
        throw DataError(prefix + ": " + e.what());
      }
      r = first ? next : merge_rasters(r, next);
      first = false;
    }
  } else {
    if (a.obs.empty()) throw ConfigError("density: give --obs files or --merge rasters");
    if (a.extent.empty()) throw ConfigError("density: --extent is required");
    const MapExtent extent = run.parse(a.extent, [](const std::string& t) { return parse_extent(t); });
    ObservationStore store;
    std::size_t read = 0;
    for (const auto& path : a.obs) {
      const auto obs = run.parse(path, [&](const std::string& t) {
        return path.ends_with(".jsonl") ? parse_observations_jsonl(t, tax) : parse_observations_csv(t, tax);
      });
      read += obs.size();
      try {
        accumulate(store, obs, a.fps);
      } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
      }
    }
    ObservationFilter filter;
    filter.classes = class_ids(tax, a.classes);
    if (!a.window.empty()) {
      if (a.window.size() != 2 || !(a.window[0] < a.window[1])) throw ConfigError("density: --window needs BEGIN END with BEGIN < END");
      filter.time_window = TimeWindow{a.window[0], a.window[1]};
    }
    KdeOptions opt;
    opt.cell_size = a.cell_size;
    opt.jobs = resolve_jobs(run.globals().jobs);
    if (a.bandwidth != "auto") {
      try {
        opt.bandwidth = std::stod(a.bandwidth);
      } catch (const std::exception&) {
        throw ConfigError("density: --bandwidth must be 'auto' or a number of metres");
      }
    }
    r = kde_density(store, filter, extent, opt);
    run.stat("observations_read", read);
    run.stat("observations_kept", store.size());
  }
  run.time("density", seconds_since(t0));
  run.stat("bandwidth_m", r.bandwidth());
  run.write(a.name + ".json", raster_header_json(r, tax));
  run.write(a.name + ".csv", raster_csv(r));
  if (a.pgm) run.write(a.name + ".pgm", raster_pgm(r));
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string gt;
  std::string dets;
  std::string iou_type = "bbox";
  int max_dets = 100;
};

EvalReport run_eval(Run& run, const EvalArgs& a, const Taxonomy& tax, bool ladder) {
  const Dataset gt = run.parse(a.gt, [](const std::string& t) { return parse_dataset(t); });
  const auto dets = run.parse(a.dets, [&](const std::string& t) { return parse_detections(t, &gt); });
  EvalOptions opt;
  opt.iou_type = iou_type_from_string(a.iou_type);
  opt.max_dets = a.max_dets;
  opt.jobs = resolve_jobs(run.globals().jobs);
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport rep = evaluate_dataset(gt, dets, tax, treatment_of(tax, run.globals()), opt, ladder);
  const double elapsed = seconds_since(t0);
  run.time("eval", elapsed);
  run.stat("eval_frames_per_s", elapsed > 0 ? ojson(static_cast<double>(gt.images.size()) / elapsed) : ojson(nullptr));
  return rep;
}

void cmd_eval(Run& run, const EvalArgs& a) {
  const Taxonomy tax = load_taxonomy(run);
  const EvalReport rep = run_eval(run, a, tax, true);
  run.write("eval_report.json", report_json(rep, tax));
  run.write("eval_summary.csv", report_csv(rep, tax));
  run.write("pr_curves.csv", pr_curves_csv(rep, tax));
}

void cmd_diagnose(Run& run, const EvalArgs& a) {
  const Taxonomy tax = load_taxonomy(run);
  const EvalReport rep = run_eval(run, a, tax, true);
  const ojson full = ojson::parse(report_json(rep, tax));
  ojson d;
  d["iou_type"] = full["iou_type"];
  d["treatment"] = full["treatment"];
  d["ladder"] = full["ladder"];
  run.write("diagnosis.json", d.dump(2) + "\n");
  run.write("pr_curves.csv", pr_curves_csv(rep, tax));
}

// ---------------------------------------------------------------------------

void cmd_stats(Run& run, const std::string& gt_path) {
  const Taxonomy tax = load_taxonomy(run);
  const Dataset gt = run.parse(gt_path, [](const std::string& t) { return parse_dataset(t); });
  const DatasetStats s = dataset_stats(gt, tax);
  run.write("stats.json", stats_json(s, tax));
  run.write("stats.csv", stats_csv(s, tax));
}

struct AssistArgs {
  std::string dets;
  std::string images;
  double min_score = 0.75;
  double min_area = 600.0;
};

std::vector<Annotation> assist_filter(Run& run, const AssistArgs& a, const Dataset* images) {
  const auto dets = run.parse(a.dets, [&](const std::string& t) { return parse_detections(t, images); });
  const auto kept = filter_for_annotation(dets, {a.min_score, a.min_area});
  run.stat("detections_in", dets.size());
  run.stat("detections_kept", kept.size());
  return kept;
}

void cmd_filter(Run& run, const AssistArgs& a) {
  Dataset images;
  if (!a.images.empty()) images = run.parse(a.images, [](const std::string& t) { return parse_dataset(t); });
  run.write("filtered.json", write_detections(assist_filter(run, a, a.images.empty() ? nullptr : &images)));
}

void cmd_export_labelme(Run& run, const AssistArgs& a) {
  const Taxonomy tax = load_taxonomy(run);
  if (a.images.empty()) throw ConfigError("export-labelme: --images is required (file names and sizes)");
  const Dataset images = run.parse(a.images, [](const std::string& t) { return parse_dataset(t); });
  const auto kept = assist_filter(run, a, &images);
  std::map<std::int64_t, std::vector<Annotation>> per_image;
  for (const auto& d : kept) per_image[d.image_id].push_back(d);
  for (const auto& im : images.images) {
    const auto it = per_image.find(im.id);
    if (it == per_image.end()) continue;
    const LabelMeDoc doc = export_labelme(im, it->second, tax);
    fs::path name = fs::path(im.file_name);
    name.replace_extension(".json");
    run.write((fs::path("labelme") / name).string(), write_labelme(doc));
  }
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma, miss, confusion;
};

void cmd_simulate(Run& run, const SimulateArgs& a) {
  const Taxonomy tax = load_taxonomy(run);
  if (a.scenario.empty() == a.preset.empty()) throw ConfigError("simulate: give exactly one of --scenario or --preset");
  Scenario s;
  const std::uint64_t seed = a.seed.value_or(0);
  if (!a.scenario.empty()) {
    s = run.parse(a.scenario, [&](const std::string& t) { return parse_scenario(t, tax); });
    if (a.seed) s.seed = *a.seed;
  } else if (a.preset == "pass-through") {
    s = pass_through_scenario(tax, seed);
  } else if (a.preset == "edge") {
    EdgeScenarioOptions opt;
    opt.seed = seed;
    s = edge_scenario(dequindre_extent(), Attractor{{0.3, 8.0}, {0.3, 24.0}, 1.0}, opt, tax);
    s.cameras = {{"dequindre", dequindre_rig()}};
  } else if (a.preset == "crowd") {
    s = static_crowd(cullen_rig(6.0), MapExtent{{-10.0, 4.0}, 20.0, 30.0, 0.0}, 40, tax.id_of("pedestrian"), 1.75, seed);
    s.cameras[0].name = "cullen";
  } else {
    throw ConfigError("simulate: unknown preset '" + a.preset + "' (pass-through, edge, crowd)");
  }
  if (a.sigma) s.noise.pixel_sigma = *a.sigma;
  if (a.miss) s.noise.miss_rate = *a.miss;
  if (a.confusion) s.noise.confusion_rate = *a.confusion;
  const auto t0 = std::chrono::steady_clock::now();
  const SimOutput out = render_detections(s, tax, resolve_jobs(run.globals().jobs));
  run.time("simulate", seconds_since(t0));
  run.write("scenario.json", write_scenario(s, tax));
  run.write("extent.json", write_extent(s.extent));
  for (const auto& c : s.cameras) run.write("cameras/" + c.name + ".json", write_camera(c.model));
  run.write("gt.json", write_dataset(out.ground_truth));
  run.write("dets.json", write_detections(out.detections));
  run.write("truth.csv", write_observations_csv(out.truth, tax));
  run.stat("images", out.ground_truth.images.size());
  run.stat("gt_annotations", out.ground_truth.annotations.size());
  run.stat("detections", out.detections.size());
}

struct SplitArgs {
  std::string gt;
  std::string ratio = "9:1";
  std::uint64_t seed = 0;
  bool stratify = false;
};

void cmd_split(Run& run, const SplitArgs& a) {
  const Dataset gt = run.parse(a.gt, [](const std::string& t) { return parse_dataset(t); });
  SplitOptions opt;
  const auto colon = a.ratio.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(a.ratio);
    const std::int64_t train = std::stoll(a.ratio.substr(0, colon));
    const std::int64_t test = std::stoll(a.ratio.substr(colon + 1));
    if (train < 0 || test < 0 || train + test == 0) throw std::invalid_argument(a.ratio);
    opt.numerator = train;
    opt.denominator = train + test;
  } catch (const std::invalid_argument&) {
    throw ConfigError("split: --ratio must look like 9:1, got '" + a.ratio + "'");
  }
  opt.seed = a.seed;
  opt.stratify_by_scene = a.stratify;
  const auto [train, test] = split_dataset(gt, opt);
  run.write("train.json", write_dataset(train));
  run.write("test.json", write_dataset(test));
  run.stat("train_images", train.images.size());
  run.stat("test_images", test.images.size());
}

void collect_options(const CLI::App& app, const std::string& prefix, ojson& into) {
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "version") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      into[prefix + name] = res.size() == 1 ? ojson(res.front()) : ojson(res);
    } else {
      into[prefix + name] = opt->get_default_str();
    }
  }
}

/// Recorded argv with any output-directory flag replaced by `out_dir`.
std::vector<std::string> replay_args(const std::string& manifest_path, const std::string& out_dir) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open input file '" + manifest_path + "'");
  ojson m;
  try {
    m = ojson::parse(in);
  } catch (const ojson::exception& e) {
    throw DataError(manifest_path + ": " + e.what());
  }
  if (!m.contains("argv") || !m["argv"].is_array() || m["argv"].empty()) {
    throw DataError(manifest_path + ": no recorded argv");
  }
  const auto recorded = m["argv"].get<std::vector<std::string>>();
  std::vector<std::string> args{recorded.front(), "--out", out_dir};
  for (std::size_t i = 1; i < recorded.size(); ++i) {
    const std::string& a = recorded[i];
    if (a == "--out" || a == "-o") {
      ++i;
    } else if (!a.starts_with("--out=")) {
      args.push_back(a);
    }
  }
  return args;
}

int replay_run(const std::string& manifest_path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  try {
    args = replay_args(manifest_path, out_dir);
  } catch (const ConfigError& e) {
    err << "possense: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "possense: data error: " << e.what() << '\n';
    return kExitData;
  }
  return run_cli(args, out, err);
}

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::debug;
  if (s == "info") return log::Level::info;
  if (s == "warn") return log::Level::warn;
  if (s == "error") return log::Level::error;
  return log::Level::off;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Public-open-space sensing: calibration, behavioral mapping, density maps and detection evaluation.",
               "possense"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  Globals g;
  app.add_option("--taxonomy", g.taxonomy_path, "Taxonomy JSON (default: built-in OPOS table)")->check(CLI::ExistingFile);
  app.add_option("--treatment", g.treatment, "Part-class treatment")
      ->check(CLI::IsMember({"merging", "filtering", "separating"}));
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out,-o", g.out_dir, "Output directory");
  app.add_option("--log-level", g.log_level, "Log level on stderr")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Solve camera intrinsics and/or pose from correspondences");
  calibrate->add_option("--intrinsics", cal.intrinsics, "Camera file with intrinsics (pose optional)");
  calibrate->add_option("--refs", cal.refs, "Reference CSV X,Y,Z,u,v for the pose");
  calibrate->add_option("--view", cal.views, "Planar target view CSV (repeat, >= 3) for intrinsics");
  calibrate->add_option("--image-size", cal.image_size, "WIDTHxHEIGHT, with --view");

  ProjectArgs proj;
  auto* project_cmd = app.add_subcommand("project", "Project world points to pixels, or pixels to the ground plane");
  project_cmd->add_option("--camera", proj.camera, "Camera file")->required();
  project_cmd->add_option("--points", proj.points, "CSV with X,Y,Z columns");
  project_cmd->add_option("--pixels", proj.pixels, "CSV with u,v columns");

  MapArgs mp;
  auto* map = app.add_subcommand("map", "Locate people detections on the ground plane");
  map->add_option("--camera", mp.camera, "Camera file")->required();
  map->add_option("--dets", mp.dets, "Detections JSON")->required();
  map->add_option("--images", mp.images, "COCO document listing the images (timestamps from image 'timestamp')");
  map->add_option("--extent", mp.extent, "Region of interest JSON");
  map->add_option("--source", mp.source, "Stream name (default: camera file stem)");
  map->add_option("--format", mp.format, "Observation format")->check(CLI::IsMember({"csv", "jsonl"}));
  map->add_flag("--boxes", mp.boxes, "Also write 3D box estimates");

  DensityArgs den;
  auto* density = app.add_subcommand("density", "Kernel density raster from observation streams, or merge rasters");
  density->add_option("--obs", den.obs, "Observation CSV/JSONL (repeatable)");
  density->add_option("--extent", den.extent, "Map extent JSON");
  density->add_option("--cell-size", den.cell_size, "Cell size, m")->check(CLI::PositiveNumber);
  density->add_option("--bandwidth", den.bandwidth, "'auto' or kernel sigma in m");
  density->add_option("--fps", den.fps, "Sampling rate per source, Hz (0 keeps every frame)");
  density->add_option("--class", den.classes, "Class name filter (repeatable)");
  density->add_option("--window", den.window, "BEGIN END seconds (half-open)")->expected(2);
  density->add_option("--merge", den.merge, "Raster prefixes (PREFIX.json + PREFIX.csv) to merge");
  density->add_option("--name", den.name, "Output file stem");
  density->add_flag("--pgm", den.pgm, "Also write an 8-bit PGM preview");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "COCO AP/AR per class, mAP and diagnosis ladder");
  auto* diagnose = app.add_subcommand("diagnose", "Progressive PR error-diagnosis ladder");
  for (auto* sub : {eval, diagnose}) {
    sub->add_option("--gt", ev.gt, "Ground-truth COCO JSON")->required();
    sub->add_option("--dets", ev.dets, "Detections JSON")->required();
    sub->add_option("--iou-type", ev.iou_type, "bbox or segm")->check(CLI::IsMember({"bbox", "segm"}));
    sub->add_option("--max-dets", ev.max_dets, "Detections kept per image and class")->check(CLI::PositiveNumber);
  }

  std::string stats_gt;
  auto* stats = app.add_subcommand("stats", "Per-class annotation statistics");
  stats->add_option("--gt", stats_gt, "COCO JSON")->required();

  AssistArgs as;
  auto* filter = app.add_subcommand("filter-annotations", "Keep detections fit for annotation assist");
  auto* labelme = app.add_subcommand("export-labelme", "Write LabelMe files for annotation assist");
  for (auto* sub : {filter, labelme}) {
    sub->add_option("--dets", as.dets, "Detections JSON")->required();
    sub->add_option("--images", as.images, "COCO document listing the images");
    sub->add_option("--min-score", as.min_score, "Score threshold (closed)");
    sub->add_option("--min-area", as.min_area, "Polygon area threshold, px^2 (closed)");
  }

  SimulateArgs sim;
  std::uint64_t sim_seed = 0;
  double sigma = 0, miss = 0, confusion = 0;
  auto* simulate = app.add_subcommand("simulate", "Render a synthetic scenario to ground truth and detections");
  simulate->add_option("--scenario", sim.scenario, "Scenario JSON");
  simulate->add_option("--preset", sim.preset, "pass-through, edge or crowd");
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "Seed (overrides the scenario's)");
  auto* sigma_opt = simulate->add_option("--pixel-sigma", sigma, "Vertex noise, px")->check(CLI::NonNegativeNumber);
  auto* miss_opt = simulate->add_option("--miss-rate", miss, "Miss probability")->check(CLI::Range(0.0, 1.0));
  auto* conf_opt = simulate->add_option("--confusion-rate", confusion, "Confusion probability")->check(CLI::Range(0.0, 1.0));

  SplitArgs sp;
  auto* split = app.add_subcommand("split", "Whole-image train/test split");
  split->add_option("--gt", sp.gt, "COCO JSON")->required();
  split->add_option("--ratio", sp.ratio, "TRAIN:TEST");
  split->add_option("--seed", sp.seed, "Shuffle seed");
  split->add_flag("--stratify", sp.stratify, "Split each scene separately");

  std::string replay_manifest;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest into --out");
  replay->add_option("--manifest", replay_manifest, "manifest.json of an earlier run")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto old_sink = log::set_sink([&err](log::Level l, std::string_view m) {
    static constexpr const char* names[] = {"debug", "info", "warning", "error"};
    err << "possense: " << names[static_cast<int>(l)] << ": " << m << '\n';
  });
  const log::Level old_level = log::level();
  log::set_level(parse_level(g.log_level));
  struct Restore {
    log::Sink sink;
    log::Level level;
    ~Restore() {
      log::set_sink(std::move(sink));
      log::set_level(level);
    }
  } restore{std::move(old_sink), old_level};

  if (replay->parsed()) return replay_run(replay_manifest, g.out_dir, out, err);

  Run run(g);
  const std::string sub = app.get_subcommands().front()->get_name();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (calibrate->parsed()) cmd_calibrate(run, cal);
    if (project_cmd->parsed()) cmd_project(run, proj);
    if (map->parsed()) cmd_map(run, mp);
    if (density->parsed()) cmd_density(run, den);
    if (eval->parsed()) cmd_eval(run, ev);
    if (diagnose->parsed()) cmd_diagnose(run, ev);
    if (stats->parsed()) cmd_stats(run, stats_gt);
    if (filter->parsed()) cmd_filter(run, as);
    if (labelme->parsed()) cmd_export_labelme(run, as);
    if (simulate->parsed()) {
      if (seed_opt->count()) sim.seed = sim_seed;
      if (sigma_opt->count()) sim.sigma = sigma;
      if (miss_opt->count()) sim.miss = miss;
      if (conf_opt->count()) sim.confusion = confusion;
      cmd_simulate(run, sim);
    }
    if (split->parsed()) cmd_split(run, sp);
    run.time("total", seconds_since(t0));
    ojson config = ojson::object();
    collect_options(app, "", config);
    collect_options(*app.get_subcommands().front(), sub + ".", config);
    run.write("manifest.json", run.manifest(sub, args, config).dump(2) + "\n");
  } catch (const ConfigError& e) {
    err << "possense: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "possense: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "possense: numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "possense: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace possense
