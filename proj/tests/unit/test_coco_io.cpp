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

#include <algorithm>
#include <set>
#include <string>

#include "fixtures.hpp"
#include "possense/coco_io.hpp"
#include "possense/error.hpp"
#include "possense/log.hpp"

using namespace possense;

namespace {

const char* kMinimal = R"({
  "info": {"description": "tiny"},
  "licenses": [],
  "images": [{"id": 1, "file_name": "a.jpg", "width": 640, "height": 480}],
  "annotations": [{"id": 5, "image_id": 1, "category_id": 3, "bbox": [10, 20, 30, 60],
                   "segmentation": [[10, 20, 40, 20, 40, 80, 10, 80]], "area": 1800}],
  "categories": [{"id": 3, "name": "pedestrian", "supercategory": "people"}]
})";

std::string with(std::string text, const std::string& from, const std::string& to) {
  text.replace(text.find(from), from.size(), to);
  return text;
}

Dataset indexed(int n) {
  Dataset d;
  d.categories = categories_from(Taxonomy::opos());
  for (int i = 0; i < n; ++i) d.images.push_back({i + 1, "img" + std::to_string(i) + ".jpg", 100, 100, {}});
  return d;
}

}  // namespace

TEST_CASE("parse_dataset: minimal document") {
  const Dataset d = parse_dataset(kMinimal);
  CHECK(d.images.size() == 1);
  CHECK(d.annotations.size() == 1);
  CHECK(d.annotations[0].bbox == BBox{10, 20, 30, 60});
  CHECK(d.annotations[0].area == 1800.0);
  CHECK_FALSE(d.annotations[0].score.has_value());
}

TEST_CASE("parse_dataset: errors name the record") {
  auto message = [](const std::string& text) {
    try {
      parse_dataset(text);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(with(kMinimal, "\"image_id\": 1", "\"image_id\": 999")).find("annotation 5") != std::string::npos);
  CHECK(message(with(kMinimal, "\"category_id\": 3", "\"category_id\": 4")).find("annotation 5") != std::string::npos);
  CHECK(message(with(kMinimal, "[[10, 20, 40, 20, 40, 80, 10, 80]]", "[[10, 20, 40, 20]]")).find("5") !=
        std::string::npos);
  CHECK(message("{\"images\": [").find("malformed JSON") != std::string::npos);
  CHECK(message(with(kMinimal, "[[10, 20, 40, 20, 40, 80, 10, 80]]", R"({"counts": "abc", "size": [4, 4]})"))
            .find("RLE") != std::string::npos);
  CHECK(message(with(kMinimal, "\"area\": 1800", "\"area\": 1800, \"score\": 1.5")).find("score") !=
        std::string::npos);
}

TEST_CASE("parse_dataset: bbox/hull mismatch is a warning") {
  std::vector<std::string> warnings;
  auto old = log::set_sink([&](log::Level, std::string_view m) { warnings.emplace_back(m); });
  const Dataset d = parse_dataset(with(kMinimal, "[10, 20, 30, 60]", "[10, 20, 35, 60]"));
  log::set_sink(old);
  CHECK(d.annotations.size() == 1);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("1 px") != std::string::npos);
}

TEST_CASE("OPOS category table round trips") {
  Dataset d = indexed(1);
  const Dataset back = parse_dataset(write_dataset(d));
  CHECK(back.categories.size() == 15);
  CHECK(back.categories == categories_from(Taxonomy::opos()));
}

TEST_CASE("COCO write/parse round trip over random datasets") {
  CounterRng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const Dataset d = fixtures::random_dataset(rng, 1 + static_cast<int>(rng.below(6)), 6);
    std::string why;
    const bool same = fixtures::same_dataset(d, parse_dataset(write_dataset(d)), &why);
    INFO(why);
    CHECK(same);
  }
}

TEST_CASE("detections: results array and document forms") {
  std::vector<Annotation> dets{fixtures::box(1, 1, 3, 10, 10, 20, 40, 0.9),
                               fixtures::box(2, 1, 2, 50, 10, 20, 40, 0.4)};
  const auto back = parse_detections(write_detections(dets));
  REQUIRE(back.size() == 2);
  CHECK(back[1].score == 0.4);
  CHECK(back[1].bbox == dets[1].bbox);
  CHECK(back[0].segmentation == dets[0].segmentation);
  const Dataset images = parse_dataset(kMinimal);
  dets[1].image_id = 42;
  CHECK_THROWS_AS(parse_detections(write_detections(dets), &images), DataError);
}

TEST_CASE("split_dataset") {
  SUBCASE("7826 images at 9:1") {
    const auto [train, test] = split_dataset(indexed(7826), {9, 10, 1});
    CHECK(train.images.size() == 7043);
    CHECK(test.images.size() == 783);
  }
  SUBCASE("determinism, partition and whole-image membership") {
    Dataset d = indexed(10);
    for (int i = 0; i < 30; ++i) d.annotations.push_back(fixtures::box(i + 1, 1 + i % 10, 3, 1, 1, 5, 5));
    const auto a = split_dataset(d, {9, 10, 5});
    const auto b = split_dataset(d, {9, 10, 5});
    CHECK(a.first.images.size() == 9);
    CHECK(a.second.images.size() == 1);
    CHECK(fixtures::same_dataset(a.first, b.first));
    std::set<std::int64_t> train_ids;
    for (const auto& im : a.first.images) train_ids.insert(im.id);
    for (const auto& im : a.second.images) CHECK(train_ids.count(im.id) == 0);
    CHECK(train_ids.size() + a.second.images.size() == 10);
    for (const auto& ann : a.first.annotations) CHECK(train_ids.count(ann.image_id) == 1);
    for (const auto& ann : a.second.annotations) CHECK(train_ids.count(ann.image_id) == 0);
    CHECK(a.first.annotations.size() + a.second.annotations.size() == 30);
  }
  SUBCASE("different seeds give different membership, same sizes") {
    const Dataset d = indexed(200);
    const auto a = split_dataset(d, {9, 10, 1});
    const auto b = split_dataset(d, {9, 10, 2});
    CHECK(a.first.images.size() == b.first.images.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.first.images.size(); ++i) differs |= a.first.images[i].id != b.first.images[i].id;
    CHECK(differs);
  }
  SUBCASE("stratified by scene") {
    Dataset d = indexed(40);
    for (auto& im : d.images) im.file_name = (im.id <= 20 ? "north/" : "south/") + im.file_name;
    const auto [train, test] = split_dataset(d, {9, 10, 3, true});
    int north = 0;
    for (const auto& im : test.images) north += im.file_name.rfind("north/", 0) == 0 ? 1 : 0;
    CHECK(test.images.size() == 4);
    CHECK(north == 2);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(split_dataset(Dataset{}, {}), DataError);
    CHECK_THROWS_AS(split_dataset(indexed(3), {1, 1, 0}), ConfigError);
  }
}

TEST_CASE("filter_for_annotation thresholds are closed") {
  auto det = [](std::int64_t id, double score, double area) {
    return fixtures::box(id, 1, 3, 0, 0, area / 10.0, 10.0, score);
  };
  const std::vector<Annotation> dets{det(1, 0.80, 700), det(2, 0.74, 700), det(3, 0.90, 599),
                                     det(4, 0.75, 600), det(5, 0.7499999, 600), det(6, 0.75, 599.999)};
  const auto kept = filter_for_annotation(dets);
  std::vector<std::int64_t> ids;
  for (const auto& k : kept) ids.push_back(k.id);
  CHECK(ids == std::vector<std::int64_t>{1, 4});
  std::vector<Annotation> bad{fixtures::box(9, 1, 3, 0, 0, 10, 10)};
  CHECK_THROWS_AS(filter_for_annotation(bad), DataError);
}

TEST_CASE("LabelMe export") {
  const ImageRecord im{1, "frames/a.jpg", 640, 480, {}};
  const Taxonomy& t = Taxonomy::opos();
  SUBCASE("single pedestrian") {
    const std::vector<Annotation> dets{fixtures::box(1, 1, t.id_of("pedestrian"), 10, 10, 30, 80, 0.9)};
    const LabelMeDoc doc = export_labelme(im, dets, t);
    REQUIRE(doc.shapes.size() == 1);
    CHECK(doc.shapes[0].label == "person_pedestrian_1");
    CHECK(doc.image_width == 640);
  }
  SUBCASE("empty") { CHECK(export_labelme(im, {}, t).shapes.empty()); }
  SUBCASE("index follows descending score per image") {
    const std::vector<Annotation> dets{fixtures::box(1, 1, t.id_of("car"), 10, 10, 30, 80, 0.5),
                                       fixtures::box(2, 1, t.id_of("dog"), 100, 10, 30, 80, 0.95),
                                       fixtures::box(3, 1, t.id_of("car"), 200, 10, 30, 80, 0.7)};
    const LabelMeDoc doc = export_labelme(im, dets, t);
    REQUIRE(doc.shapes.size() == 3);
    CHECK(doc.shapes[0].label == "animal_dog_1");
    CHECK(doc.shapes[1].label == "vehicle_car_2");
    CHECK(doc.shapes[2].label == "vehicle_car_3");
  }
  SUBCASE("round trip through JSON") {
    CounterRng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
      Dataset d = fixtures::random_dataset(rng, 1, 8);
      for (auto& a : d.annotations) {
        a.segmentation.resize(1);
        a.score = rng.uniform();
        derive_geometry(a);
      }
      const LabelMeDoc doc = parse_labelme(write_labelme(export_labelme(d.images[0], d.annotations, t)));
      const auto anns = labelme_to_annotations(doc, d.images[0].id, t);
      REQUIRE(anns.size() == d.annotations.size());
      for (const auto& a : anns) {
        // Find the source polygon by exact match to 1e-6 px.
        const bool found = std::any_of(d.annotations.begin(), d.annotations.end(), [&](const Annotation& s) {
          if (s.category_id != a.category_id || s.segmentation[0].size() != a.segmentation[0].size()) return false;
          for (std::size_t k = 0; k < s.segmentation[0].size(); ++k) {
            if ((s.segmentation[0][k] - a.segmentation[0][k]).norm() > 1e-6) return false;
          }
          return true;
        });
        CHECK(found);
      }
    }
  }
  SUBCASE("out-of-image vertices are clamped with a warning") {
    std::vector<std::string> warnings;
    auto old = log::set_sink([&](log::Level, std::string_view m) { warnings.emplace_back(m); });
    const std::vector<Annotation> dets{fixtures::box(1, 1, 3, 600, 400, 80, 100, 0.9)};
    const LabelMeDoc doc = export_labelme(im, dets, t);
    log::set_sink(old);
    CHECK(warnings.size() == 1);
    for (const auto& p : doc.shapes[0].points) CHECK((p.x() <= 640 && p.y() <= 480));
  }
}
