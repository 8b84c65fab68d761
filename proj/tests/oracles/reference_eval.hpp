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

#include <map>
#include <span>

#include "possense/annotation.hpp"

namespace oracle {

/// Summary numbers in the reference tooling's layout; -1 marks "no gt".
struct RefSummary {
  double ap = -1, ap50 = -1, ap75 = -1, ap_small = -1, ap_medium = -1, ap_large = -1, ar100 = -1;
};

/// A second, deliberately literal implementation of the COCO protocol
/// (per-image evaluateImg, concatenate-and-sort accumulate, -1 sentinels),
/// with its own box IoU and its own brute-force pixel rasterizer. Equal IoUs
/// go to the lower gt id. Keyed by category id over the gt categories plus
/// any category seen in the annotations.
std::map<int, RefSummary> reference_coco_eval(const possense::Dataset& gt,
                                              std::span<const possense::Annotation> dets, bool segm,
                                              int max_dets = 100);

}  // namespace oracle
