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

#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "possense/coco_io.hpp"
#include "possense/sim.hpp"
#include "possense/taxonomy.hpp"

namespace fixtures {

using namespace possense;

Annotation box(std::int64_t id, std::int64_t image_id, int category, double x, double y, double w, double h,
               std::optional<double> score) {
  Annotation a;
  a.id = id;
  a.image_id = image_id;
  a.category_id = category;
  a.bbox = {x, y, w, h};
  a.segmentation = {{{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}}};
  a.area = w * h;
  a.score = score;
  return a;
}

namespace {

Polygon random_convex(CounterRng& rng, double cx, double cy, double radius) {
  const int n = 3 + static_cast<int>(rng.below(6));
  std::vector<double> angles(n);
  for (auto& t : angles) t = rng.uniform(0, 2 * std::numbers::pi);
  std::sort(angles.begin(), angles.end());
  Polygon p;
  for (double t : angles) {
    // Quantize to 1/64 px so values survive text round trips exactly either way.
    p.emplace_back(std::round((cx + radius * std::cos(t)) * 64) / 64, std::round((cy + radius * std::sin(t)) * 64) / 64);
  }
  return p;
}

}  // namespace

Dataset random_dataset(CounterRng& rng, int n_images, int max_annotations_per_image) {
  Dataset d;
  d.info = {{"description", "generated"}, {"version", "1"}};
  d.categories = categories_from(Taxonomy::opos());
  std::int64_t next_ann = 1;
  for (int i = 0; i < n_images; ++i) {
    ImageRecord im;
    im.id = 100 + i;
    im.file_name = "cam" + std::to_string(i % 3) + "/frame_" + std::to_string(i) + ".jpg";
    im.width = 640 + 64 * static_cast<int>(rng.below(10));
    im.height = 480 + 32 * static_cast<int>(rng.below(10));
    if (rng.bernoulli(0.5)) im.extra["weather"] = rng.bernoulli(0.5) ? "rain" : "clear";
    d.images.push_back(im);
    const int n_ann = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_annotations_per_image) + 1));
    for (int k = 0; k < n_ann; ++k) {
      Annotation a;
      a.id = next_ann++;
      a.image_id = im.id;
      a.category_id = 1 + static_cast<int>(rng.below(15));
      const double r = rng.uniform(4, 60);
      const double cx = rng.uniform(r, im.width - r);
      const double cy = rng.uniform(r, im.height - r);
      a.segmentation.push_back(random_convex(rng, cx, cy, r));
      if (rng.bernoulli(0.2)) {
        const double r2 = std::min(r, 3.0 + rng.uniform(0, 10));
        a.segmentation.push_back(random_convex(rng, std::clamp(cx + r, r2, im.width - r2), cy, r2));
      }
      derive_geometry(a);
      if (rng.bernoulli(0.3)) a.extra["occluded"] = rng.bernoulli(0.5);
      d.annotations.push_back(std::move(a));
    }
  }
  return d;
}

bool same_dataset(const Dataset& a, const Dataset& b, std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  if (a.info != b.info) return fail("info");
  if (a.licenses != b.licenses) return fail("licenses");
  if (a.extra != b.extra) return fail("extra");
  if (a.categories != b.categories) return fail("categories");
  if (a.images.size() != b.images.size()) return fail("image count");
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    const auto& x = a.images[i];
    const auto& y = b.images[i];
    if (x.id != y.id || x.file_name != y.file_name || x.width != y.width || x.height != y.height ||
        x.extra != y.extra) {
      return fail("image " + std::to_string(x.id));
    }
  }
  if (a.annotations.size() != b.annotations.size()) return fail("annotation count");
  for (std::size_t i = 0; i < a.annotations.size(); ++i) {
    const auto& x = a.annotations[i];
    const auto& y = b.annotations[i];
    const std::string tag = "annotation " + std::to_string(x.id);
    if (x.id != y.id || x.image_id != y.image_id || x.category_id != y.category_id) return fail(tag + " ids");
    if (!(x.bbox == y.bbox) || x.area != y.area || x.score != y.score) return fail(tag + " geometry");
    if (x.segmentation != y.segmentation) return fail(tag + " segmentation");
    if (x.extra != y.extra) return fail(tag + " extra");
  }
  return true;
}


EvalFixture sim_eval_fixture(std::uint64_t seed, int images, int max_agents) {
  using namespace possense;
  const Taxonomy& tax = Taxonomy::opos();
  CounterRng rng(seed, 0xe7a1);
  const CameraModel cam = cullen_rig(6.0);
  const MapExtent extent{{-10.0, 4.0}, 20.0, 36.0, 0.0};
  const std::vector<int> classes{tax.id_of("pedestrian"), tax.id_of("cyclist"), tax.id_of("sitter"),
                                 tax.id_of("scooterer"),  tax.id_of("skater"),  tax.id_of("car"),
                                 tax.id_of("dog")};
  EvalFixture fx;
  fx.gt.categories = categories_from(tax);
  std::int64_t next_gt = 1;
  std::int64_t next_det = 1;
  for (int f = 0; f < images; ++f) {
    CounterRng fr = rng.derive(static_cast<std::uint64_t>(f));
    const int n = 1 + static_cast<int>(fr.below(static_cast<std::uint64_t>(max_agents)));
    Scenario s = static_crowd(cam, extent, n, classes[0], 1.75, seed * 1000 + static_cast<std::uint64_t>(f));
    for (auto& a : s.agents) {
      a.class_id = classes[fr.below(classes.size())];
      a.height = fr.uniform(0.4, 2.0);
    }
    s.noise.pixel_sigma = fr.uniform(0.0, 4.0);
    s.noise.miss_rate = 0.1;
    s.noise.confusion_rate = 0.15;
    s.noise.score_min = 0.05;
    const SimOutput out = render_detections(s, tax);
    const std::int64_t image_id = f + 1;
    ImageRecord im = out.ground_truth.images.at(0);
    im.id = image_id;
    fx.gt.images.push_back(im);
    for (Annotation a : out.ground_truth.annotations) {
      a.id = next_gt++;
      a.image_id = image_id;
      fx.gt.annotations.push_back(a);
    }
    for (Annotation d : out.detections) {
      d.id = next_det++;
      d.image_id = image_id;
      fx.dets.push_back(d);
      if (fr.bernoulli(0.15)) {  // duplicate with a lower score
        Annotation dup = d;
        dup.id = next_det++;
        dup.score = *d.score * fr.uniform(0.3, 0.95);
        fx.dets.push_back(dup);
      }
      if (fr.bernoulli(0.15)) {  // mislocalized: inflated and shifted
        Annotation bad = d;
        bad.id = next_det++;
        const double k = fr.uniform(1.3, 2.5);
        const Eigen::Vector2d c{d.bbox.x + d.bbox.w / 2, d.bbox.y + d.bbox.h / 2};
        const Eigen::Vector2d shift{fr.uniform(-0.5, 0.5) * d.bbox.w, 0.0};
        for (auto& part : bad.segmentation) {
          for (auto& v : part) v = c + shift + k * (v - c);
        }
        clamp_polygons(bad.segmentation, im.width, im.height);
        derive_geometry(bad);
        bad.score = fr.uniform(0.05, 1.0);
        if (bad.bbox.w > 0 && bad.bbox.h > 0) fx.dets.push_back(bad);
      }
    }
    const int n_bg = static_cast<int>(fr.below(4));
    for (int k = 0; k < n_bg; ++k) {  // background false positives
      const double w = fr.uniform(8, 120);
      const double h = fr.uniform(8, 200);
      const double x = fr.uniform(0, im.width - w);
      const double y = fr.uniform(0, im.height - h);
      fx.dets.push_back(box(next_det++, image_id, classes[fr.below(classes.size())], x, y, w, h, fr.uniform(0.05, 1.0)));
    }
  }
  return fx;
}

}  // namespace fixtures
