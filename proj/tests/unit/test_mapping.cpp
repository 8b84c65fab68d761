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
#include <cmath>

#include "fixtures.hpp"
#include "possense/error.hpp"
#include "possense/mapping.hpp"
#include "possense/sim.hpp"

using namespace possense;

namespace {

const Taxonomy& tax() { return Taxonomy::opos(); }
const Treatment& merging() { return tax().treatment(TreatmentMode::merging); }

/// Mean localization error of all detections in a rendered static crowd.
std::vector<double> localization_errors(const Scenario& s, double sigma) {
  Scenario noisy = s;
  noisy.noise.pixel_sigma = sigma;
  const SimOutput out = render_detections(noisy, tax());
  std::vector<double> errs;
  for (std::size_t i = 0; i < out.detections.size(); ++i) {
    const GroundObservation o = locate(out.detections[i], noisy.cameras[0].model, merging());
    errs.push_back((o.world_xy - out.truth[out.detection_truth[i]].world_xy).norm());
  }
  return errs;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("footpoint") {
  SUBCASE("rectangle mask gives bottom centre") {
    const Annotation a = fixtures::box(1, 1, 3, 100, 50, 40, 80);
    CHECK(footpoint(a) == Eigen::Vector2d(120, 130));
    CHECK(toppoint(a) == Eigen::Vector2d(120, 50));
  }
  SUBCASE("bbox only") {
    Annotation a;
    a.bbox = {100, 50, 40, 80};
    CHECK(footpoint(a) == Eigen::Vector2d(120, 130));
  }
  SUBCASE("band ignores vertices above the lowest 5%") {
    Annotation a;
    // Leg at the left reaches v = 100; right foot stops at 90 (outside the 5% band).
    a.segmentation = {{{0, 0}, {20, 0}, {20, 90}, {12, 90}, {10, 100}, {2, 100}}};
    CHECK(footpoint(a) == Eigen::Vector2d(6, 100));
  }
  SUBCASE("nothing to use") {
    Annotation a;
    a.id = 4;
    CHECK_THROWS_AS(footpoint(a), DataError);
  }
}

TEST_CASE("locate on simulated agents") {
  const CameraModel cam = dequindre_rig();
  const Scenario crowd = static_crowd(cam, dequindre_extent(), 100, tax().id_of("pedestrian"), 1.75, 3);
  SUBCASE("noiseless is exact") {
    const auto errs = localization_errors(crowd, 0.0);
    REQUIRE(errs.size() == 100);
    CHECK(*std::max_element(errs.begin(), errs.end()) < 1e-6);
  }
  SUBCASE("error grows with pixel noise and stays under 10 cm at 1 px") {
    double previous = -1.0;
    for (double sigma : {0.0, 0.5, 1.0, 2.0}) {
      double total = 0.0;
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Scenario s = crowd;
        s.seed = seed;
        total += mean(localization_errors(s, sigma));
      }
      const double m = total / 20.0;
      CHECK(m >= previous);
      if (sigma == 1.0) CHECK(m < 0.10);
      previous = m;
    }
  }
  SUBCASE("sky footpoint fails") {
    CameraModel level = cam;
    level.pose = Pose::look_at({0, 0, 5}, {0, 20, 5});
    Annotation a = fixtures::box(9, 1, 3, 600, 0, 20, 30);
    CHECK_THROWS_AS(locate(a, level, merging()), NumericError);
  }
  SUBCASE("class remapped by treatment") {
    const SimOutput out = render_detections(crowd, tax());
    Annotation d = out.detections[0];
    d.category_id = tax().id_of("pedpart");
    CHECK(locate(d, cam, merging()).class_id == tax().id_of("pedestrian"));
    CHECK(locate(d, cam, tax().treatment(TreatmentMode::filtering)).class_id == tax().id_of("peopleother"));
  }
}

TEST_CASE("estimate_box3d") {
  const PriorTable priors = PriorTable::defaults(tax());
  const int ped = tax().id_of("pedestrian");
  const int cyc = tax().id_of("cyclist");
  CHECK(priors.at(ped).footprint_w == 0.5);
  CHECK(priors.at(ped).footprint_l == 0.6);
  CHECK(priors.at(cyc).footprint_l == 1.6);

  for (const CameraModel& cam : {dequindre_rig(), cullen_rig(6.0)}) {
    const MapExtent extent = cam.image_size.width == 1280 ? dequindre_extent() : MapExtent{{-6, 6}, 12, 20, 0};
    Scenario s = static_crowd(cam, extent, 50, ped, 1.75, 11);
    SUBCASE("noiseless height recovery") {
      const SimOutput out = render_detections(s, tax());
      for (const auto& d : out.detections) {
        const Box3D b = estimate_box3d(d, cam, priors.at(ped));
        CHECK(b.w == 0.5);
        CHECK(b.l == 0.6);
        CHECK(std::abs(b.h - 1.75) < 0.03);
      }
    }
    SUBCASE("1 px noise keeps height within [1.70, 1.80] on average") {
      double total = 0.0;
      int n = 0;
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        s.seed = seed;
        s.noise.pixel_sigma = 1.0;
        const SimOutput out = render_detections(s, tax());
        for (const auto& d : out.detections) {
          const Box3D b = estimate_box3d(d, cam, priors.at(ped));
          CHECK(b.h >= kMinBoxHeight);
          CHECK(b.h <= kMaxBoxHeight);
          total += b.h;
          ++n;
        }
      }
      const double mean_h = total / n;
      CHECK(mean_h >= 1.70);
      CHECK(mean_h <= 1.80);
    }
  }
  SUBCASE("nadir camera at the image centre is degenerate") {
    CameraModel cam = dequindre_rig();
    cam.pose = Pose::from_rotation(Eigen::Vector3d(1, -1, -1).asDiagonal(), Eigen::Vector3d(0, 0, 8));
    const Annotation a = fixtures::box(1, 1, ped, 630, 340, 20, 20);
    CHECK_THROWS_AS(estimate_box3d(a, cam, priors.at(ped)), NumericError);
  }
}

TEST_CASE("map_frame") {
  const CameraModel cam = dequindre_rig();
  const MapExtent roi = dequindre_extent();
  SUBCASE("empty input") {
    const FrameMapping m = map_frame({}, cam, merging(), tax(), roi);
    CHECK(m.observations.empty());
    CHECK(m.out_of_extent == 0);
  }
  SUBCASE("pass-through scene keeps people inside the roi") {
    const Scenario s = pass_through_scenario(tax(), 4);
    const SimOutput out = render_detections(s, tax());
    std::size_t kept = 0;
    for (const auto& im : out.ground_truth.images) {
      std::vector<Annotation> dets;
      for (const auto& d : out.detections) {
        if (d.image_id == im.id) dets.push_back(d);
      }
      Annotation dog = fixtures::box(999, im.id, tax().id_of("dog"), 600, 500, 30, 30, 0.9);
      dets.push_back(dog);
      const FrameMapping m = map_frame(dets, cam, merging(), tax(), roi, im.extra["timestamp"].get<double>());
      CHECK(m.observations.size() + m.out_of_extent + m.failures.size() + m.non_people == dets.size());
      CHECK(m.non_people == 1);
      for (const auto& o : m.observations) {
        CHECK(tax().super_category(o.class_id) == SuperCategory::people);
        CHECK(roi.contains(o.world_xy));
      }
      kept += m.observations.size();
    }
    CHECK(kept == out.detections.size());
  }
  SUBCASE("closed extent and rotation") {
    const MapExtent e{{1, 2}, 4.5, 32, 0.0};
    CHECK(e.contains({1, 2}));
    CHECK(e.contains({5.5, 34}));
    CHECK_FALSE(e.contains({5.5000001, 34}));
    const MapExtent r{{0, 0}, 2, 4, M_PI / 2};
    CHECK(r.contains({-4, 2}));
    CHECK_FALSE(r.contains({1, 1}));
    CHECK((r.to_world(r.to_local({-3, 1.5})) - Eigen::Vector2d(-3, 1.5)).norm() < 1e-12);
  }
  SUBCASE("edge observation retained") {
    // A detection whose footpoint lands exactly on the far-left roi corner line.
    const Eigen::Vector2d px = project(cam, {0.0, 10.0, 0.0});
    Annotation a;
    a.id = 1;
    a.category_id = tax().id_of("pedestrian");
    a.bbox = {px.x() - 10, px.y() - 60, 20, 60};
    const FrameMapping m = map_frame(std::vector<Annotation>{a}, cam, merging(), tax(), roi);
    CHECK(m.observations.size() == 1);
  }
}

TEST_CASE("observation stream formats") {
  std::vector<GroundObservation> obs{{tax().id_of("sitter"), {1.25, -3.5}, 0.5, 7, 0.875, "cam0"},
                                     {tax().id_of("cyclist"), {1e-17, 3.0 / 7.0}, 1.0 / 3.0, 8, 1.0, "cam1"}};
  for (const bool jsonl : {false, true}) {
    const auto back = jsonl ? parse_observations_jsonl(write_observations_jsonl(obs, tax()), tax())
                            : parse_observations_csv(write_observations_csv(obs, tax()), tax());
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back[i].class_id == obs[i].class_id);
      CHECK(back[i].world_xy == obs[i].world_xy);
      CHECK(back[i].timestamp == obs[i].timestamp);
      CHECK(back[i].source_image_id == obs[i].source_image_id);
      CHECK(back[i].score == obs[i].score);
      CHECK(back[i].source == obs[i].source);
    }
  }
  CHECK_THROWS_AS(parse_observations_csv("ts,image_id,class,X,Y,score\n0,1,unicorn,0,0,1\n", tax()), DataError);
  CHECK_THROWS_AS(parse_observations_csv("ts,image_id,class,X,Y,score\n0,1,pedestrian,zero,0,1\n", tax()), DataError);
}
