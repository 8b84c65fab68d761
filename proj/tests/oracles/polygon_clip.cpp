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

#include "polygon_clip.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oracle {

using possense::Point2;
using possense::Polygon;

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

Polygon ccw(Polygon p) {
  double s = 0;
  for (std::size_t i = 0, j = p.size() - 1; i < p.size(); j = i++) s += p[j].x() * p[i].y() - p[i].x() * p[j].y();
  if (s < 0) std::reverse(p.begin(), p.end());
  return p;
}

}  // namespace

Polygon clip_polygon(const Polygon& subject, const Polygon& clip_in) {
  const Polygon clip = ccw(clip_in);
  Polygon out = subject;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    const Polygon in = out;
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2& p = in[i];
      const Point2& q = in[(i + 1) % in.size()];
      const double sp = cross(a, b, p);
      const double sq = cross(a, b, q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
  }
  return out;
}

double convex_iou(const Polygon& a, const Polygon& b) {
  const double inter = possense::polygon_area(clip_polygon(a, b));
  const double uni = possense::polygon_area(a) + possense::polygon_area(b) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double perimeter(const Polygon& p) {
  double s = 0;
  for (std::size_t i = 0, j = p.size() - 1; i < p.size(); j = i++) s += (p[i] - p[j]).norm();
  return s;
}

Polygon random_convex(possense::CounterRng& rng, double cx, double cy, double rx, double ry) {
  const int n = 3 + static_cast<int>(rng.uniform() * 8);
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (double& t : angles) t = rng.uniform(0, 2 * M_PI);
  std::sort(angles.begin(), angles.end());
  Polygon p;
  for (double t : angles) p.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  return p;  // points on an ellipse in angular order are convex
}

int max_assignment(const std::vector<std::vector<double>>& iou, double threshold) {
  const std::size_t nd = iou.size();
  const std::size_t ng = nd ? iou[0].size() : 0;
  // Pad to a square so every permutation is an assignment.
  const std::size_t n = std::max(nd, ng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  int best = 0;
  do {
    int c = 0;
    for (std::size_t d = 0; d < nd; ++d) {
      if (perm[d] < ng && iou[d][perm[d]] >= threshold) ++c;
    }
    best = std::max(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace oracle
