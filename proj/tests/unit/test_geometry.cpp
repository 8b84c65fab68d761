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

#include <doctest.h>

#include "possense/error.hpp"
#include "possense/geometry.hpp"

using namespace possense;

TEST_CASE("polygon area and bbox") {
  const Polygon square{{0, 0}, {10, 0}, {10, 30}, {0, 30}};
  CHECK(polygon_area(square) == 300.0);
  Polygon reversed(square.rbegin(), square.rend());
  CHECK(polygon_area(reversed) == 300.0);
  const PolygonSet two{square, {{20, 20}, {22, 20}, {22, 22}}};
  CHECK(polygon_area(two) == 302.0);
  CHECK(polygon_bbox(two) == BBox{0, 0, 22, 30});
  CHECK_THROWS_AS(polygon_bbox(PolygonSet{}), DataError);
}

TEST_CASE("point in polygon and clamping") {
  const Polygon tri{{0, 0}, {10, 0}, {0, 10}};
  CHECK(point_in_polygon(tri, {2, 2}));
  CHECK_FALSE(point_in_polygon(tri, {8, 8}));
  PolygonSet p{{{-5, 2}, {700, 2}, {700, 500}}};
  CHECK(clamp_polygons(p, 640, 480));
  CHECK(p[0][0].x() == 0.0);
  CHECK(p[0][2] == Point2(640, 480));
  CHECK_FALSE(clamp_polygons(p, 640, 480));
}

TEST_CASE("mask rasterization samples pixel centres") {
  const PolygonSet rect{{{2, 3}, {12, 3}, {12, 8}, {2, 8}}};
  const Mask m = Mask::rasterize(rect, 100, 100);
  CHECK(m.count() == 50);
  CHECK(m.at(2, 3));
  CHECK_FALSE(m.at(12, 3));
  CHECK_FALSE(m.at(1, 3));
  const PolygonSet shifted{{{7, 3}, {17, 3}, {17, 8}, {7, 8}}};
  CHECK(Mask::intersection(m, Mask::rasterize(shifted, 100, 100)) == 25);
  const PolygonSet far{{{50, 50}, {60, 50}, {60, 60}}};
  CHECK(Mask::intersection(m, Mask::rasterize(far, 100, 100)) == 0);
  // Clipped to the image.
  const PolygonSet outside{{{-10, -10}, {5, -10}, {5, 5}, {-10, 5}}};
  CHECK(Mask::rasterize(outside, 100, 100).count() == 25);
  // Overlapping parts are a union.
  const PolygonSet overlap{rect[0], shifted[0]};
  CHECK(Mask::rasterize(overlap, 100, 100).count() == 75);
}
