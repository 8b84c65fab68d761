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
#include <vector>

#include <Eigen/Core>

namespace possense {

/// Axis-aligned box in pixels, top-left origin: (x, y, w, h).
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  bool operator==(const BBox&) const = default;
};

using Point2 = Eigen::Vector2d;
using Polygon = std::vector<Point2>;
/// A segmentation: one or more simple polygons (occlusion may split an object).
using PolygonSet = std::vector<Polygon>;

/// Absolute shoelace area of one polygon, vertices taken in the given order.
double polygon_area(const Polygon& poly);

/// Sum of part areas.
double polygon_area(const PolygonSet& polys);

/// Axis-aligned hull of all vertices. Requires at least one vertex.
BBox polygon_bbox(const PolygonSet& polys);

/// Even-odd point-in-polygon test.
bool point_in_polygon(const Polygon& poly, const Point2& p);

/// Clamps every vertex into [0,width]x[0,height]. Returns true if any vertex moved.
bool clamp_polygons(PolygonSet& polys, double width, double height);

/// Binary mask restricted to a pixel window. Pixel (col,row) is set when its
/// center (col+0.5, row+0.5) lies inside some polygon (even-odd per polygon,
/// union across polygons).
class Mask {
 public:
  Mask() = default;
  Mask(int x0, int y0, int width, int height);

  static Mask rasterize(const PolygonSet& polys, int image_width, int image_height);

  int x0() const { return x0_; }
  int y0() const { return y0_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int col, int row) const;
  std::int64_t count() const;

  /// Number of pixels set in both masks.
  static std::int64_t intersection(const Mask& a, const Mask& b);

 private:
  int x0_ = 0;
  int y0_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace possense
