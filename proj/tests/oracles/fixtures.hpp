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

#include <optional>
#include <string>
#include <vector>

#include "possense/annotation.hpp"
#include "possense/rng.hpp"

namespace fixtures {

/// Rectangle annotation whose polygon matches the box.
possense::Annotation box(std::int64_t id, std::int64_t image_id, int category, double x, double y, double w,
                         double h, std::optional<double> score = std::nullopt);

/// A valid random dataset over the OPOS categories: convex polygons with
/// 3-8 vertices, occasional two-part segmentations, extra fields sprinkled
/// on images and annotations.
possense::Dataset random_dataset(possense::CounterRng& rng, int n_images, int max_annotations_per_image);

/// Field-by-field comparison of the modeled set plus extras. On mismatch
/// returns false and describes the first difference in `why`.
bool same_dataset(const possense::Dataset& a, const possense::Dataset& b, std::string* why = nullptr);


struct EvalFixture {
  possense::Dataset gt;
  std::vector<possense::Annotation> dets;
};

/// Simulator-rendered evaluation fixture on the Cullen rig: `images` frames
/// of mixed-class static crowds (near and far, so all size strata occur),
/// detections with pixel noise, misses and same-super-category confusion,
/// then perturbed with background false positives, lower-scored duplicates
/// and inflated (mislocalized) boxes.
EvalFixture sim_eval_fixture(std::uint64_t seed, int images = 20, int max_agents = 10);

}  // namespace fixtures
