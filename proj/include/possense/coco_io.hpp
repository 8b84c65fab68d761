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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "possense/annotation.hpp"
#include "possense/taxonomy.hpp"

namespace possense {

/// Parses a COCO instances document (info, licenses, images, annotations,
/// categories). Checks referential integrity and polygon validity; bbox/polygon
/// disagreements beyond 1 px are logged as warnings. Unknown fields are kept in
/// the `extra` members. RLE masks are rejected.
Dataset parse_dataset(std::string_view text);

/// Serializes a dataset. parse_dataset(write_dataset(d)) reproduces d.
std::string write_dataset(const Dataset& dataset);

/// Parses detections: either a COCO results array ([{image_id, category_id,
/// bbox, segmentation, score}, ...], ids assigned 1..n in file order) or a full
/// COCO document whose annotations carry scores. When `images` is given, every
/// detection's image_id must reference one of them.
std::vector<Annotation> parse_detections(std::string_view text, const Dataset* images = nullptr);

/// Writes detections as a COCO results array.
std::string write_detections(std::span<const Annotation> detections);

/// Builds the COCO category table from a taxonomy.
std::vector<ClassDef> categories_from(const Taxonomy& taxonomy);

struct SplitOptions {
  /// Train fraction as numerator/denominator, e.g. 9/10 for a 9:1 split.
  std::int64_t numerator = 9;
  std::int64_t denominator = 10;
  std::uint64_t seed = 0;
  /// Split each scene separately. The scene of an image is its "scene" field
  /// when present, else the directory part of file_name.
  bool stratify_by_scene = false;
};

/// Whole-image split: an image and all its annotations land on one side.
/// |train| = round(ratio * N) (globally, or per scene when stratified).
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, const SplitOptions& options);

struct AssistThresholds {
  double min_score = 0.75;
  double min_area_px2 = 600.0;
};

/// Keeps detections with score >= min_score and polygon area >= min_area
/// (both closed). Order preserved. Throws DataError for a detection without a
/// score or polygon.
std::vector<Annotation> filter_for_annotation(std::span<const Annotation> detections,
                                              const AssistThresholds& thresholds = {});

struct LabelMeShape {
  std::string label;
  Polygon points;
  std::string shape_type = "polygon";
};

struct LabelMeDoc {
  std::string image_path;
  int image_height = 0;
  int image_width = 0;
  std::vector<LabelMeShape> shapes;
};

/// One polygon shape per detection, labelled "<prefix>_<class>_<k>" where k
/// runs from 1 in score-descending order. Detections with several polygon
/// parts export their largest part. Out-of-image vertices are clamped.
LabelMeDoc export_labelme(const ImageRecord& image, std::span<const Annotation> detections,
                          const Taxonomy& taxonomy);

std::string write_labelme(const LabelMeDoc& doc);
LabelMeDoc parse_labelme(std::string_view text);

/// Converts LabelMe shapes back to annotations (bbox and area from polygon).
std::vector<Annotation> labelme_to_annotations(const LabelMeDoc& doc, std::int64_t image_id,
                                               const Taxonomy& taxonomy, std::int64_t first_id = 1);

/// Sets bbox and area from the segmentation.
void derive_geometry(Annotation& annotation);

}  // namespace possense
