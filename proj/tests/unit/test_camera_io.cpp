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

#include "possense/camera_io.hpp"
#include "possense/error.hpp"
#include "possense/sim.hpp"

using namespace possense;

TEST_CASE("camera file round trip") {
  const CameraModel cam = cullen_rig(7.0);
  const std::string text = write_camera(cam);
  const CameraModel back = parse_camera(text);
  CHECK(write_camera(back) == text);
  CHECK(back.intrinsics.fx == cam.intrinsics.fx);
  CHECK(back.distortion.k1 == cam.distortion.k1);
  CHECK((back.pose.axis_angle() - cam.pose.axis_angle()).norm() == 0.0);
  CHECK((back.pose.translation() - cam.pose.translation()).norm() == 0.0);
  CHECK(back.image_size.width == 1108);
}

TEST_CASE("camera file validation") {
  const std::string good = write_camera(dequindre_rig());
  CHECK_THROWS_AS(parse_camera("{"), DataError);
  CHECK_THROWS_AS(parse_camera(R"({"image_size":[10,10],"intrinsics":{"fx":1,"fy":1,"cx":0,"cy":0},"units":"mm-px"})"),
                  DataError);
  const std::string no_pose =
      R"({"image_size":{"width":640,"height":480},"intrinsics":{"fx":500,"fy":500,"cx":320,"cy":240},"units":"m-px"})";
  CHECK_THROWS_AS(parse_camera(no_pose), DataError);
  const CameraModel intr = parse_camera(no_pose, false);
  CHECK(intr.intrinsics.cx == 320);
  CHECK(intr.image_size.height == 480);
  CHECK_THROWS_AS(
      parse_camera(R"({"image_size":[0,480],"intrinsics":{"fx":500,"fy":500,"cx":320,"cy":240},"units":"m-px"})",
                   false),
      DataError);
  CHECK_NOTHROW(parse_camera(good));
}

TEST_CASE("correspondence csv") {
  const CameraModel cam = cullen_rig();
  CounterRng rng(3);
  const auto refs = reference_points(cam, 19, rng);
  const std::string text = write_correspondences(refs);
  const auto back = parse_correspondences(text);
  REQUIRE(back.size() == refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    CHECK(back[i].world == refs[i].world);
    CHECK(back[i].pixel == refs[i].pixel);
  }
  const auto extra = parse_correspondences("# surveyed 2019-06-24\nname,X,Y,Z,u,v\np1,1,2,0,10,20\n");
  REQUIRE(extra.size() == 1);
  CHECK(extra[0].pixel.y() == 20);
  try {
    parse_correspondences("X,Y,Z,u,v\n1,2,0,10,20\n1,2,0,ten,20\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_correspondences("X,Y,u,v\n1,2,3,4\n"), DataError);
}
