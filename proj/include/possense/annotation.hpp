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
#include <vector>

#include <nlohmann/json.hpp>

#include "possense/geometry.hpp"
#include "possense/taxonomy.hpp"

namespace possense {

struct ImageRecord {
  std::int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  /// Fields we do not model (e.g. timestamp, weather tags), kept for round trip.
  nlohmann::json extra = nlohmann::json::object();
};

/// One object instance. Ground truth leaves `score` empty; detections carry it.
struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  int category_id = 0;
  BBox bbox;
  PolygonSet segmentation;
  double area = 0.0;
  std::optional<double> score;
  nlohmann::json extra = nlohmann::json::object();
};

struct Dataset {
  nlohmann::json info = nlohmann::json::object();
  nlohmann::json licenses = nlohmann::json::array();
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::vector<ClassDef> categories;
  /// Unmodeled top-level sections.
  nlohmann::json extra = nlohmann::json::object();

  const ImageRecord* find_image(std::int64_t id) const;
};

}  // namespace possense
