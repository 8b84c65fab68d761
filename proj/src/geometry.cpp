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

#include "possense/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "possense/error.hpp"

namespace possense {

double polygon_area(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    twice += poly[j].x() * poly[i].y() - poly[i].x() * poly[j].y();
  }
  return std::abs(twice) * 0.5;
}

double polygon_area(const PolygonSet& polys) {
  double total = 0.0;
  for (const auto& p : polys) total += polygon_area(p);
  return total;
}

BBox polygon_bbox(const PolygonSet& polys) {
  double xmin = std::numeric_limits<double>::infinity();
  double ymin = xmin;
  double xmax = -xmin;
  double ymax = -xmin;
  for (const auto& poly : polys) {
    for (const auto& v : poly) {
      xmin = std::min(xmin, v.x());
      ymin = std::min(ymin, v.y());
      xmax = std::max(xmax, v.x());
      ymax = std::max(ymax, v.y());
    }
  }
  if (xmin > xmax) throw DataError("polygon_bbox: segmentation has no vertices");
  return {xmin, ymin, xmax - xmin, ymax - ymin};
}

bool point_in_polygon(const Polygon& poly, const Point2& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

bool clamp_polygons(PolygonSet& polys, double width, double height) {
  bool moved = false;
  for (auto& poly : polys) {
    for (auto& v : poly) {
      const double x = std::clamp(v.x(), 0.0, width);
      const double y = std::clamp(v.y(), 0.0, height);
      if (x != v.x() || y != v.y()) moved = true;
      v = {x, y};
    }
  }
  return moved;
}

Mask::Mask(int x0, int y0, int width, int height)
    : x0_(x0), y0_(y0), width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {}

bool Mask::at(int col, int row) const {
  const int c = col - x0_;
  const int r = row - y0_;
  if (c < 0 || r < 0 || c >= width_ || r >= height_) return false;
  return bits_[static_cast<std::size_t>(r) * width_ + c] != 0;
}

std::int64_t Mask::count() const {
  return std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
}

Mask Mask::rasterize(const PolygonSet& polys, int image_width, int image_height) {
  double xmin = std::numeric_limits<double>::infinity();
  double ymin = xmin;
  double xmax = -xmin;
  double ymax = -xmin;
  for (const auto& poly : polys) {
    for (const auto& v : poly) {
      xmin = std::min(xmin, v.x());
      ymin = std::min(ymin, v.y());
      xmax = std::max(xmax, v.x());
      ymax = std::max(ymax, v.y());
    }
  }
  if (xmin > xmax) return {};
  const int c0 = std::max(0, static_cast<int>(std::floor(xmin)));
  const int r0 = std::max(0, static_cast<int>(std::floor(ymin)));
  const int c1 = std::min(image_width, static_cast<int>(std::ceil(xmax)));
  const int r1 = std::min(image_height, static_cast<int>(std::ceil(ymax)));
  if (c1 <= c0 || r1 <= r0) return {};

  Mask mask(c0, r0, c1 - c0, r1 - r0);
  std::vector<double> xs;
  for (int row = r0; row < r1; ++row) {
    const double yc = row + 0.5;
    for (const auto& poly : polys) {
      xs.clear();
      const std::size_t n = poly.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = poly[i];
        const Point2& b = poly[j];
        if ((a.y() > yc) != (b.y() > yc)) {
          xs.push_back(a.x() + (yc - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
        }
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        // Pixel centers col+0.5 in [xs[k], xs[k+1]).
        int from = static_cast<int>(std::ceil(xs[k] - 0.5));
        int to = static_cast<int>(std::ceil(xs[k + 1] - 0.5));
        from = std::max(from, c0);
        to = std::min(to, c1);
        auto* line = &mask.bits_[static_cast<std::size_t>(row - r0) * mask.width_];
        for (int col = from; col < to; ++col) line[col - c0] = 1;
      }
    }
  }
  return mask;
}

std::int64_t Mask::intersection(const Mask& a, const Mask& b) {
  const int c0 = std::max(a.x0_, b.x0_);
  const int r0 = std::max(a.y0_, b.y0_);
  const int c1 = std::min(a.x0_ + a.width_, b.x0_ + b.width_);
  const int r1 = std::min(a.y0_ + a.height_, b.y0_ + b.height_);
  std::int64_t n = 0;
  for (int row = r0; row < r1; ++row) {
    const auto* la = a.bits_.data() + static_cast<std::size_t>(row - a.y0_) * a.width_;
    const auto* lb = b.bits_.data() + static_cast<std::size_t>(row - b.y0_) * b.width_;
    for (int col = c0; col < c1; ++col) n += la[col - a.x0_] & lb[col - b.x0_];
  }
  return n;
}

}  // namespace possense
