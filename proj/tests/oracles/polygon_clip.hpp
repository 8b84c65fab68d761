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

#include <span>
#include <vector>

#include "possense/geometry.hpp"
#include "possense/rng.hpp"

namespace oracle {

/// Sutherland-Hodgman: clips `subject` against the convex polygon `clip`.
possense::Polygon clip_polygon(const possense::Polygon& subject, const possense::Polygon& clip);

/// Exact IoU of two convex polygons via clipping.
double convex_iou(const possense::Polygon& a, const possense::Polygon& b);

double perimeter(const possense::Polygon& p);

/// Random convex polygon (hull of random points on a jittered ellipse).
possense::Polygon random_convex(possense::CounterRng& rng, double cx, double cy, double rx, double ry);

/// Largest number of (det, gt) pairs with IoU >= threshold over all
/// one-to-one assignments, by exhaustive search over permutations.
int max_assignment(const std::vector<std::vector<double>>& iou, double threshold);

}  // namespace oracle
