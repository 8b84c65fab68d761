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

#include "possense/coco_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "possense/error.hpp"
#include "possense/log.hpp"
#include "possense/rng.hpp"

namespace possense {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const ImageRecord* Dataset::find_image(std::int64_t id) const {
  for (const auto& im : images) {
    if (im.id == id) return &im;
  }
  return nullptr;
}

namespace {

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

std::string ann_tag(const json& a) {
  if (a.contains("id") && a["id"].is_number_integer()) {
    return "annotation " + std::to_string(a["id"].get<std::int64_t>());
  }
  return "annotation <no id>";
}

PolygonSet parse_segmentation(const json& seg, const std::string& tag) {
  if (seg.is_object()) {
    throw DataError(tag + ": RLE-encoded masks are not supported; provide polygon segmentations");
  }
  if (!seg.is_array()) throw DataError(tag + ": segmentation must be a list of polygons");
  PolygonSet polys;
  for (const auto& flat : seg) {
    if (!flat.is_array()) throw DataError(tag + ": segmentation polygon must be a flat coordinate list");
    if (flat.size() < 6 || flat.size() % 2 != 0) {
      throw DataError(tag + ": degenerate polygon with " + std::to_string(flat.size() / 2) +
                      " vertices (need at least 3)");
    }
    Polygon poly;
    poly.reserve(flat.size() / 2);
    for (std::size_t i = 0; i < flat.size(); i += 2) {
      const double x = flat[i].get<double>();
      const double y = flat[i + 1].get<double>();
      if (!std::isfinite(x) || !std::isfinite(y)) throw DataError(tag + ": non-finite polygon vertex");
      poly.emplace_back(x, y);
    }
    polys.push_back(std::move(poly));
  }
  return polys;
}

template <typename Json>
Json segmentation_json(const PolygonSet& polys) {
  Json seg = Json::array();
  for (const auto& poly : polys) {
    Json flat = Json::array();
    for (const auto& v : poly) {
      flat.push_back(v.x());
      flat.push_back(v.y());
    }
    seg.push_back(std::move(flat));
  }
  return seg;
}

// Fields handled explicitly; everything else goes to `extra`.
const std::set<std::string> kAnnotationKeys = {"id",   "image_id",     "category_id", "bbox",
                                               "area", "segmentation", "score"};
const std::set<std::string> kImageKeys = {"id", "file_name", "width", "height"};
const std::set<std::string> kTopKeys = {"info", "licenses", "images", "annotations", "categories"};

Annotation parse_annotation(const json& a, bool require_id) {
  const std::string tag = ann_tag(a);
  if (!a.is_object()) throw DataError("annotation entries must be objects");
  Annotation out;
  try {
    if (a.contains("id")) {
      out.id = a.at("id").get<std::int64_t>();
    } else if (require_id) {
      throw DataError(tag + ": missing id");
    }
    out.image_id = a.at("image_id").get<std::int64_t>();
    out.category_id = a.at("category_id").get<int>();
    if (a.contains("segmentation") && !a["segmentation"].is_null()) {
      out.segmentation = parse_segmentation(a["segmentation"], tag);
    }
    if (a.contains("bbox")) {
      const auto& b = a["bbox"];
      if (!b.is_array() || b.size() != 4) throw DataError(tag + ": bbox must be [x, y, w, h]");
      out.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    } else if (!out.segmentation.empty()) {
      out.bbox = polygon_bbox(out.segmentation);
    } else {
      throw DataError(tag + ": neither bbox nor segmentation present");
    }
    if (!(out.bbox.w > 0.0) || !(out.bbox.h > 0.0)) {
      throw DataError(tag + ": bbox width and height must be positive");
    }
    if (a.contains("area")) {
      out.area = a["area"].get<double>();
    } else {
      out.area = out.segmentation.empty() ? out.bbox.area() : polygon_area(out.segmentation);
    }
    if (a.contains("score") && !a["score"].is_null()) {
      const double s = a["score"].get<double>();
      if (!(s >= 0.0 && s <= 1.0)) throw DataError(tag + ": score " + std::to_string(s) + " outside [0,1]");
      out.score = s;
    }
  } catch (const json::exception& e) {
    throw DataError(tag + ": schema violation: " + e.what());
  }
  for (const auto& [k, v] : a.items()) {
    // iscrowd = 0 is the default the writer emits; only a non-default value is kept.
    if (k == "iscrowd" && v == 0) continue;
    if (!kAnnotationKeys.count(k)) out.extra[k] = v;
  }
  return out;
}

void check_geometry(const Annotation& a, const ImageRecord* image) {
  const std::string tag = "annotation " + std::to_string(a.id);
  if (!a.segmentation.empty()) {
    if (polygon_area(a.segmentation) <= 0.0) log::warn(tag + ": polygon has zero area");
    const BBox hull = polygon_bbox(a.segmentation);
    if (std::abs(hull.x - a.bbox.x) > 1.0 || std::abs(hull.y - a.bbox.y) > 1.0 ||
        std::abs(hull.right() - a.bbox.right()) > 1.0 || std::abs(hull.bottom() - a.bbox.bottom()) > 1.0) {
      log::warn(tag + ": bbox differs from the polygon hull by more than 1 px");
    }
  }
  if (image != nullptr) {
    if (a.bbox.x < -1.0 || a.bbox.y < -1.0 || a.bbox.right() > image->width + 1.0 ||
        a.bbox.bottom() > image->height + 1.0) {
      log::warn(tag + ": bbox extends beyond image " + std::to_string(image->id));
    }
  }
}

template <typename Json>
Json annotation_json(const Annotation& a, bool with_id) {
  Json j;
  if (with_id) j["id"] = a.id;
  j["image_id"] = a.image_id;
  j["category_id"] = a.category_id;
  j["bbox"] = {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h};
  j["segmentation"] = segmentation_json<Json>(a.segmentation);
  j["area"] = a.area;
  if (a.score) j["score"] = *a.score;
  for (const auto& [k, v] : a.extra.items()) j[k] = v;
  return j;
}

}  // namespace

void derive_geometry(Annotation& annotation) {
  if (annotation.segmentation.empty()) {
    annotation.area = annotation.bbox.area();
    return;
  }
  annotation.bbox = polygon_bbox(annotation.segmentation);
  annotation.area = polygon_area(annotation.segmentation);
}

Dataset parse_dataset(std::string_view text) {
  const json doc = parse_json(text, "COCO dataset");
  if (!doc.is_object()) throw DataError("COCO dataset: top level must be an object");
  Dataset d;
  try {
    if (doc.contains("info")) d.info = doc["info"];
    if (doc.contains("licenses")) d.licenses = doc["licenses"];
    for (const auto& [k, v] : doc.items()) {
      if (!kTopKeys.count(k)) d.extra[k] = v;
    }

    std::set<std::int64_t> image_ids;
    for (const auto& im : doc.at("images")) {
      ImageRecord rec;
      rec.id = im.at("id").get<std::int64_t>();
      rec.file_name = im.value("file_name", std::string());
      rec.width = im.at("width").get<int>();
      rec.height = im.at("height").get<int>();
      if (rec.width <= 0 || rec.height <= 0) {
        throw DataError("image " + std::to_string(rec.id) + ": width and height must be positive");
      }
      for (const auto& [k, v] : im.items()) {
        if (!kImageKeys.count(k)) rec.extra[k] = v;
      }
      if (!image_ids.insert(rec.id).second) {
        throw DataError("image id " + std::to_string(rec.id) + " is duplicated");
      }
      d.images.push_back(std::move(rec));
    }

    std::set<int> category_ids;
    if (doc.contains("categories")) {
      for (const auto& c : doc["categories"]) {
        ClassDef def;
        def.id = c.at("id").get<int>();
        def.name = c.at("name").get<std::string>();
        def.super_category = super_category_from_string(c.value("supercategory", std::string("people")));
        if (!category_ids.insert(def.id).second) {
          throw DataError("category id " + std::to_string(def.id) + " is duplicated");
        }
        d.categories.push_back(std::move(def));
      }
    }

    std::map<std::int64_t, const ImageRecord*> by_id;
    for (const auto& im : d.images) by_id[im.id] = &im;
    std::set<std::int64_t> ann_ids;
    if (doc.contains("annotations")) {
      for (const auto& a : doc["annotations"]) {
        Annotation ann = parse_annotation(a, true);
        if (!ann_ids.insert(ann.id).second) {
          throw DataError("annotation id " + std::to_string(ann.id) + " is duplicated");
        }
        auto it = by_id.find(ann.image_id);
        if (it == by_id.end()) {
          throw DataError("annotation " + std::to_string(ann.id) + " references missing image_id " +
                          std::to_string(ann.image_id));
        }
        if (!category_ids.count(ann.category_id)) {
          throw DataError("annotation " + std::to_string(ann.id) + " references missing category_id " +
                          std::to_string(ann.category_id));
        }
        check_geometry(ann, it->second);
        d.annotations.push_back(std::move(ann));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("COCO dataset: schema violation: ") + e.what());
  }
  return d;
}

std::string write_dataset(const Dataset& d) {
  ordered_json doc;
  doc["info"] = d.info;
  doc["licenses"] = d.licenses;
  doc["images"] = ordered_json::array();
  for (const auto& im : d.images) {
    ordered_json j;
    j["id"] = im.id;
    j["file_name"] = im.file_name;
    j["width"] = im.width;
    j["height"] = im.height;
    for (const auto& [k, v] : im.extra.items()) j[k] = v;
    doc["images"].push_back(std::move(j));
  }
  doc["annotations"] = ordered_json::array();
  for (const auto& a : d.annotations) {
    ordered_json j = annotation_json<ordered_json>(a, true);
    if (!j.contains("iscrowd")) j["iscrowd"] = 0;
    doc["annotations"].push_back(std::move(j));
  }
  doc["categories"] = ordered_json::array();
  for (const auto& c : d.categories) {
    doc["categories"].push_back(
        {{"id", c.id}, {"name", c.name}, {"supercategory", std::string(to_string(c.super_category))}});
  }
  for (const auto& [k, v] : d.extra.items()) doc[k] = v;
  return doc.dump(1) + "\n";
}

std::vector<Annotation> parse_detections(std::string_view text, const Dataset* images) {
  const json doc = parse_json(text, "detections");
  std::vector<Annotation> dets;
  if (doc.is_array()) {
    std::int64_t next_id = 1;
    for (const auto& a : doc) {
      Annotation det = parse_annotation(a, false);
      if (!a.contains("id")) det.id = next_id;
      next_id = std::max(next_id, det.id) + 1;
      dets.push_back(std::move(det));
    }
  } else {
    dets = parse_dataset(text).annotations;
  }
  if (images != nullptr) {
    std::set<std::int64_t> ids;
    for (const auto& im : images->images) ids.insert(im.id);
    for (const auto& d : dets) {
      if (!ids.count(d.image_id)) {
        throw DataError("detection " + std::to_string(d.id) + " references missing image_id " +
                        std::to_string(d.image_id));
      }
    }
  }
  return dets;
}

std::string write_detections(std::span<const Annotation> detections) {
  ordered_json doc = ordered_json::array();
  for (const auto& d : detections) doc.push_back(annotation_json<ordered_json>(d, true));
  return doc.dump(1) + "\n";
}

std::vector<ClassDef> categories_from(const Taxonomy& taxonomy) {
  return {taxonomy.classes().begin(), taxonomy.classes().end()};
}

namespace {

std::string scene_of(const ImageRecord& im) {
  if (im.extra.contains("scene")) {
    const auto& s = im.extra["scene"];
    return s.is_string() ? s.get<std::string>() : s.dump();
  }
  const auto slash = im.file_name.find_last_of('/');
  return slash == std::string::npos ? std::string() : im.file_name.substr(0, slash);
}

// round(n * num / den), halves rounded up, in exact integer arithmetic.
std::size_t rounded_share(std::size_t n, std::int64_t num, std::int64_t den) {
  const auto nn = static_cast<std::int64_t>(n);
  return static_cast<std::size_t>((2 * nn * num + den) / (2 * den));
}

void shuffle(std::vector<std::size_t>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

Dataset subset(const Dataset& d, const std::vector<std::size_t>& image_indices) {
  Dataset out;
  out.info = d.info;
  out.licenses = d.licenses;
  out.categories = d.categories;
  out.extra = d.extra;
  std::set<std::int64_t> ids;
  for (std::size_t i : image_indices) {
    out.images.push_back(d.images[i]);
    ids.insert(d.images[i].id);
  }
  for (const auto& a : d.annotations) {
    if (ids.count(a.image_id)) out.annotations.push_back(a);
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, const SplitOptions& options) {
  if (dataset.images.empty()) throw DataError("split_dataset: dataset has no images");
  if (options.denominator <= 0 || options.numerator <= 0 || options.numerator >= options.denominator) {
    throw ConfigError("split_dataset: train ratio must lie strictly between 0 and 1");
  }
  CounterRng rng(options.seed, 0x5b17);

  std::vector<std::vector<std::size_t>> groups;
  if (options.stratify_by_scene) {
    std::map<std::string, std::vector<std::size_t>> by_scene;
    for (std::size_t i = 0; i < dataset.images.size(); ++i) by_scene[scene_of(dataset.images[i])].push_back(i);
    for (auto& [scene, idx] : by_scene) groups.push_back(std::move(idx));
  } else {
    groups.emplace_back(dataset.images.size());
    std::iota(groups.back().begin(), groups.back().end(), std::size_t{0});
  }

  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (auto& idx : groups) {
    shuffle(idx, rng);
    const std::size_t n_train = rounded_share(idx.size(), options.numerator, options.denominator);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {subset(dataset, train), subset(dataset, test)};
}

std::vector<Annotation> filter_for_annotation(std::span<const Annotation> detections,
                                              const AssistThresholds& thresholds) {
  std::vector<Annotation> kept;
  for (const auto& d : detections) {
    if (!d.score) throw DataError("detection " + std::to_string(d.id) + " has no confidence score");
    if (d.segmentation.empty()) throw DataError("detection " + std::to_string(d.id) + " has no polygon");
    if (*d.score >= thresholds.min_score && polygon_area(d.segmentation) >= thresholds.min_area_px2) {
      kept.push_back(d);
    }
  }
  return kept;
}

LabelMeDoc export_labelme(const ImageRecord& image, std::span<const Annotation> detections,
                          const Taxonomy& taxonomy) {
  std::vector<const Annotation*> order;
  for (const auto& d : detections) {
    if (d.image_id != image.id) {
      throw DataError("detection " + std::to_string(d.id) + " belongs to image " +
                      std::to_string(d.image_id) + ", not " + std::to_string(image.id));
    }
    order.push_back(&d);
  }
  std::stable_sort(order.begin(), order.end(), [](const Annotation* a, const Annotation* b) {
    return a->score.value_or(-1.0) > b->score.value_or(-1.0);
  });

  LabelMeDoc doc;
  doc.image_path = image.file_name;
  doc.image_width = image.width;
  doc.image_height = image.height;
  int k = 0;
  for (const Annotation* d : order) {
    const ClassDef& cls = taxonomy.at(d->category_id);
    PolygonSet polys = d->segmentation;
    if (polys.empty()) {
      const BBox& b = d->bbox;
      polys.push_back({{b.x, b.y}, {b.right(), b.y}, {b.right(), b.bottom()}, {b.x, b.bottom()}});
    }
    if (polys.size() > 1) {
      log::warn("detection " + std::to_string(d->id) + " has " + std::to_string(polys.size()) +
                " polygon parts; exporting the largest");
      std::stable_sort(polys.begin(), polys.end(), [](const Polygon& a, const Polygon& b) {
        return polygon_area(a) > polygon_area(b);
      });
      polys.resize(1);
    }
    if (clamp_polygons(polys, image.width, image.height)) {
      log::warn("detection " + std::to_string(d->id) + " polygon clamped to image bounds");
    }
    LabelMeShape shape;
    shape.label = std::string(label_prefix(cls.super_category)) + "_" + cls.name + "_" + std::to_string(++k);
    shape.points = std::move(polys.front());
    doc.shapes.push_back(std::move(shape));
  }
  return doc;
}

std::string write_labelme(const LabelMeDoc& doc) {
  ordered_json j;
  j["version"] = "5.0.1";
  j["flags"] = ordered_json::object();
  j["shapes"] = ordered_json::array();
  for (const auto& s : doc.shapes) {
    ordered_json pts = ordered_json::array();
    for (const auto& v : s.points) pts.push_back({v.x(), v.y()});
    j["shapes"].push_back({{"label", s.label},
                           {"points", std::move(pts)},
                           {"group_id", nullptr},
                           {"shape_type", s.shape_type},
                           {"flags", ordered_json::object()}});
  }
  j["imagePath"] = doc.image_path;
  j["imageData"] = nullptr;
  j["imageHeight"] = doc.image_height;
  j["imageWidth"] = doc.image_width;
  return j.dump(2) + "\n";
}

LabelMeDoc parse_labelme(std::string_view text) {
  const json j = parse_json(text, "LabelMe");
  LabelMeDoc doc;
  try {
    doc.image_path = j.value("imagePath", std::string());
    doc.image_height = j.at("imageHeight").get<int>();
    doc.image_width = j.at("imageWidth").get<int>();
    for (const auto& s : j.at("shapes")) {
      LabelMeShape shape;
      shape.label = s.at("label").get<std::string>();
      shape.shape_type = s.value("shape_type", std::string("polygon"));
      if (shape.shape_type != "polygon") {
        log::warn("LabelMe shape '" + shape.label + "' of type " + shape.shape_type + " skipped");
        continue;
      }
      for (const auto& p : s.at("points")) shape.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      if (shape.points.size() < 3) throw DataError("LabelMe shape '" + shape.label + "' has fewer than 3 points");
      doc.shapes.push_back(std::move(shape));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("LabelMe: schema violation: ") + e.what());
  }
  return doc;
}

std::vector<Annotation> labelme_to_annotations(const LabelMeDoc& doc, std::int64_t image_id,
                                               const Taxonomy& taxonomy, std::int64_t first_id) {
  std::vector<Annotation> out;
  for (const auto& s : doc.shapes) {
    const auto first = s.label.find('_');
    const auto last = s.label.rfind('_');
    if (first == std::string::npos || first == last) {
      throw DataError("LabelMe label '" + s.label + "' does not match <super-category>_<class>_<index>");
    }
    const std::string prefix = s.label.substr(0, first);
    const std::string name = s.label.substr(first + 1, last - first - 1);
    const std::string index = s.label.substr(last + 1);
    if (index.empty() || !std::all_of(index.begin(), index.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw DataError("LabelMe label '" + s.label + "' has no numeric object index");
    }
    const ClassDef* cls = taxonomy.find(name);
    if (cls == nullptr) throw DataError("LabelMe label '" + s.label + "' names an unknown class");
    if (label_prefix(cls->super_category) != prefix && to_string(cls->super_category) != prefix) {
      throw DataError("LabelMe label '" + s.label + "' has the wrong super-category for " + name);
    }
    Annotation a;
    a.id = first_id++;
    a.image_id = image_id;
    a.category_id = cls->id;
    a.segmentation = {s.points};
    derive_geometry(a);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace possense
