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
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

#include "possense/density.hpp"
#include "possense/error.hpp"
#include "possense/rng.hpp"
#include "possense/sim.hpp"

using namespace possense;

namespace {

const Taxonomy& tax() { return Taxonomy::opos(); }
int cls(const char* name) { return tax().id_of(name); }

GroundObservation obs(double x, double y, double t = 0.0, int class_id = 3, std::string source = "cam") {
  GroundObservation o;
  o.class_id = class_id;
  o.world_xy = {x, y};
  o.timestamp = t;
  o.source = std::move(source);
  return o;
}

const MapExtent kExtent{{0.0, 0.0}, 10.0, 20.0, 0.0};

DensityRaster render(const std::vector<GroundObservation>& v, double bandwidth, const MapExtent& extent = kExtent,
                     double cell = 0.25) {
  ObservationStore store;
  accumulate(store, v, 0.0);
  KdeOptions opt;
  opt.cell_size = cell;
  opt.bandwidth = bandwidth;
  return kde_density(store, {}, extent, opt);
}

double integral(const DensityRaster& r) {
  double s = 0.0;
  for (int row = 0; row < r.rows(); ++row) {
    for (int col = 0; col < r.cols(); ++col) s += r.value(col, row);
  }
  return s * r.cell_size() * r.cell_size();
}

}  // namespace

TEST_CASE("accumulate decimates per source") {
  SUBCASE("30 fps for 60 s at 1 fps keeps at most 60 frames per source") {
    std::vector<GroundObservation> v;
    for (const char* src : {"north", "south"}) {
      for (int f = 0; f < 30 * 60; ++f) {
        const double t = f / 30.0;
        v.push_back(obs(1, 1, t, 3, src));
        v.push_back(obs(2, 2, t, 3, src));
      }
    }
    ObservationStore store;
    accumulate(store, v, 1.0);
    std::map<std::string, std::set<double>> frames;
    for (const auto& o : store.observations()) frames[o.source].insert(o.timestamp);
    CHECK(frames.size() == 2);
    for (const auto& [src, ts] : frames) {
      CHECK(ts.size() <= 60);
      CHECK(ts.size() == 60);
    }
    // Every kept frame keeps all of its observations.
    CHECK(store.size() == 2 * 2 * 60);
  }
  SUBCASE("fps equal to the native rate is the identity") {
    std::vector<GroundObservation> v;
    for (int f = 0; f < 250; ++f) v.push_back(obs(f * 0.01, 1, f / 5.0));
    ObservationStore store;
    CHECK(accumulate(store, v, 5.0) == v.size());
    CHECK(store.size() == v.size());
  }
  SUBCASE("jittered timestamps never keep two frames in one window") {
    CounterRng rng(4);
    std::vector<GroundObservation> v;
    double t = 0.0;
    for (int f = 0; f < 2000; ++f) {
      t += rng.uniform(0.0, 0.2);
      v.push_back(obs(1, 1, t));
    }
    ObservationStore store;
    accumulate(store, v, 1.0);
    std::set<long> windows;
    for (const auto& o : store.observations()) CHECK(windows.insert(static_cast<long>(std::floor(o.timestamp))).second);
    CHECK(store.size() <= static_cast<std::size_t>(std::ceil(t)) + 1);
  }
  SUBCASE("windows start at each source's first frame") {
    // 10 fps for one second starting mid-second keeps one frame, not two.
    std::vector<GroundObservation> v;
    for (int f = 0; f < 10; ++f) v.push_back(obs(1, 1, 100.5 + f / 10.0));
    ObservationStore store;
    accumulate(store, v, 1.0);
    CHECK(store.size() == 1);
    accumulate(store, std::vector<GroundObservation>{obs(1, 1, 101.5)}, 1.0);
    CHECK(store.size() == 2);
  }
  SUBCASE("empty input leaves the store unchanged") {
    ObservationStore store;
    store.append(obs(1, 1));
    CHECK(accumulate(store, {}, 1.0) == 0);
    CHECK(store.size() == 1);
  }
  SUBCASE("errors") {
    ObservationStore store;
    CHECK_THROWS_AS(accumulate(store, {}, -1.0), ConfigError);
    std::vector<GroundObservation> v{obs(1, 1, 5.0), obs(1, 1, 4.0)};
    CHECK_THROWS_AS(accumulate(store, v, 0.0), DataError);
    // Other sources are independent.
    ObservationStore s2;
    std::vector<GroundObservation> w{obs(1, 1, 5.0, 3, "a"), obs(1, 1, 4.0, 3, "b")};
    CHECK(accumulate(s2, w, 0.0) == 2);
  }
}

TEST_CASE("observation store selection") {
  ObservationStore store(10.0);
  std::vector<GroundObservation> v;
  for (int i = 0; i < 100; ++i) v.push_back(obs(1, 1, i, i % 3 == 0 ? cls("sitter") : cls("pedestrian")));
  accumulate(store, v, 0.0);
  CHECK(store.select({}).size() == 100);
  const auto sitters = store.select({{cls("sitter")}, std::nullopt});
  CHECK(sitters.size() == 34);
  CHECK(std::is_sorted(sitters.begin(), sitters.end()));
  // Half-open window.
  CHECK(store.select({{}, TimeWindow{10.0, 20.0}}).size() == 10);
  CHECK(store.select({{cls("sitter")}, TimeWindow{0.0, 9.0}}).size() == 3);
  CHECK(store.select({{cls("dog")}, std::nullopt}).empty());
}

TEST_CASE("kde single observation") {
  const DensityRaster r = render({obs(5.125, 10.125)}, 0.5);
  CHECK(r.cols() == 40);
  CHECK(r.rows() == 80);
  CHECK(r.total_count() == 1);
  CHECK(integral(r) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.argmax() == std::pair<int, int>{20, 40});
  // Symmetric about the centre cell.
  for (int d = 1; d < 8; ++d) {
    CHECK(r.quanta(20 + d, 40) == doctest::Approx(r.quanta(20 - d, 40)).epsilon(1e-9));
    CHECK(r.quanta(20, 40 + d) == doctest::Approx(r.quanta(20, 40 - d)).epsilon(1e-9));
    CHECK(r.quanta(20 + d, 40) < r.quanta(20 + d - 1, 40));
  }
  const Eigen::Vector2d c = r.cell_center_world(20, 40);
  CHECK(c.x() == doctest::Approx(5.125));
  CHECK(c.y() == doctest::Approx(10.125));
}

TEST_CASE("kde mass conservation over random stores") {
  CounterRng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    CounterRng t = rng.derive(static_cast<std::uint64_t>(trial));
    const MapExtent extent{{t.uniform(-50, 50), t.uniform(-50, 50)}, t.uniform(2, 15), t.uniform(2, 15),
                           t.uniform(-3.1, 3.1)};
    const int n = static_cast<int>(t.uniform(0, 60));
    std::vector<GroundObservation> v;
    for (int i = 0; i < n; ++i) {
      // Some observations land near (or on) the boundary on purpose.
      const Eigen::Vector2d local{t.uniform(0, extent.width_m), t.uniform(0, extent.length_m)};
      v.push_back(obs(0, 0, i));
      v.back().world_xy = extent.to_world(local);
    }
    ObservationStore store;
    accumulate(store, v, 0.0);
    KdeOptions opt;
    opt.cell_size = t.uniform(0.1, 0.6);
    if (trial % 2) opt.bandwidth = t.uniform(0.05, 3.0);
    const DensityRaster r = kde_density(store, {}, extent, opt);
    REQUIRE(r.total_count() == n);
    CHECK(std::abs(integral(r) - n) <= 0.01 * std::max(n, 1));
    for (std::int64_t q : r.raw()) REQUIRE(q >= 0);
  }
}

TEST_CASE("kde linearity") {
  CounterRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GroundObservation> a;
    std::vector<GroundObservation> b;
    for (int i = 0; i < 5; ++i) a.push_back(obs(rng.uniform(0, 10), rng.uniform(0, 20), i));
    for (int i = 0; i < 7; ++i) b.push_back(obs(rng.uniform(0, 10), rng.uniform(0, 20), i));
    std::vector<GroundObservation> both = a;
    both.insert(both.end(), b.begin(), b.end());
    std::sort(both.begin(), both.end(), [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    const double h = rng.uniform(0.1, 2.0);
    const DensityRaster ra = render(a, h);
    const DensityRaster rb = render(b, h);
    const DensityRaster rab = render(both, h);
    const DensityRaster sum = merge_rasters(ra, rb);
    CHECK(sum.raw() == rab.raw());
    for (int row = 0; row < rab.rows(); ++row) {
      for (int col = 0; col < rab.cols(); ++col) {
        REQUIRE(std::abs(rab.value(col, row) - ra.value(col, row) - rb.value(col, row)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("kde filter and job invariance") {
  std::vector<GroundObservation> v;
  CounterRng rng(3);
  for (int i = 0; i < 9000; ++i) {
    v.push_back(obs(rng.uniform(0, 10), rng.uniform(0, 20), i * 0.01, i % 4 == 0 ? cls("sitter") : cls("pedestrian")));
  }
  ObservationStore store;
  accumulate(store, v, 0.0);
  KdeOptions opt;
  opt.bandwidth = 0.4;
  const DensityRaster sitters = kde_density(store, {{cls("sitter")}, std::nullopt}, kExtent, opt);
  CHECK(sitters.total_count() == 2250);
  CHECK(sitters.classes == std::vector<int>{cls("sitter")});
  const DensityRaster all1 = kde_density(store, {}, kExtent, opt);
  opt.jobs = 4;
  const DensityRaster all4 = kde_density(store, {}, kExtent, opt);
  CHECK(all1 == all4);
  CHECK(all1.total_count() == 9000);
}

TEST_CASE("kde bandwidth") {
  SUBCASE("auto follows the normal reference rule") {
    CounterRng rng(5);
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 20000; ++i) pts.push_back({rng.normal(0, 2.0), rng.normal(0, 0.5)});
    const auto h = auto_bandwidth(pts);
    REQUIRE(h);
    const double expect = std::sqrt(2.0 * 0.5) * std::pow(20000.0, -1.0 / 6.0);
    CHECK(*h == doctest::Approx(expect).epsilon(0.03));
  }
  SUBCASE("degenerate input falls back to the cell size") {
    ObservationStore store;
    accumulate(store, std::vector<GroundObservation>{obs(3, 3)}, 0.0);
    const DensityRaster r = kde_density(store, {}, kExtent, {});
    CHECK(r.bandwidth() == kDefaultCellSize);
    CHECK(r.bandwidth_mode == "auto-fallback-cell");
    CHECK(integral(r) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("empty filter result is a zero raster") {
    ObservationStore store;
    const DensityRaster r = kde_density(store, {}, kExtent, {});
    CHECK(r.total_count() == 0);
    CHECK(r.mass() == 0.0);
  }
  SUBCASE("errors") {
    ObservationStore store;
    KdeOptions opt;
    opt.bandwidth = 0.0;
    CHECK_THROWS_AS(kde_density(store, {}, kExtent, opt), ConfigError);
    opt.bandwidth = -1.0;
    CHECK_THROWS_AS(kde_density(store, {}, kExtent, opt), ConfigError);
    opt.bandwidth.reset();
    opt.cell_size = 0.0;
    CHECK_THROWS_AS(kde_density(store, {}, kExtent, opt), ConfigError);
    CHECK_THROWS_AS(kde_density(store, {}, MapExtent{{0, 0}, 0.0, 5.0, 0.0}, {}), ConfigError);
  }
}

TEST_CASE("merge monoid laws") {
  CounterRng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    auto random_raster = [&](double t0) {
      std::vector<GroundObservation> v;
      const int n = static_cast<int>(rng.uniform(0, 30));
      for (int i = 0; i < n; ++i) v.push_back(obs(rng.uniform(-1, 11), rng.uniform(-1, 21), t0 + i));
      DensityRaster r = render(v, 0.7);
      r.time_window = TimeWindow{t0, t0 + 86400};
      return r;
    };
    const DensityRaster a = random_raster(0);
    const DensityRaster b = random_raster(86400);
    const DensityRaster c = random_raster(2 * 86400);
    DensityRaster zero(kExtent, 0.25, 0.7);
    zero.time_window = a.time_window;
    CHECK(merge_rasters(a, zero) == a);
    CHECK(merge_rasters(a, b) == merge_rasters(b, a));
    CHECK(merge_rasters(merge_rasters(a, b), c) == merge_rasters(a, merge_rasters(b, c)));
    CHECK(merge_rasters(a, b).total_count() == a.total_count() + b.total_count());
    CHECK(merge_rasters(a, c).time_window == TimeWindow{0, 3 * 86400});
  }
  SUBCASE("a week of days sums the counts") {
    DensityRaster week(kExtent, 0.25, 0.7);
    std::int64_t expect = 0;
    for (int d = 0; d < 7; ++d) {
      std::vector<GroundObservation> v;
      for (int i = 0; i < 10 + d; ++i) v.push_back(obs(rng.uniform(0, 10), rng.uniform(0, 20), i));
      const DensityRaster day = render(v, 0.7);
      expect += day.total_count();
      week = merge_rasters(week, day);
    }
    CHECK(week.total_count() == expect);
    CHECK(integral(week) == doctest::Approx(static_cast<double>(expect)).epsilon(1e-9));
  }
  SUBCASE("mismatched grids") {
    const DensityRaster a(kExtent, 0.25, 0.7);
    CHECK_THROWS_AS(merge_rasters(a, DensityRaster(kExtent, 0.5, 0.7)), DataError);
    CHECK_THROWS_AS(merge_rasters(a, DensityRaster(kExtent, 0.25, 0.8)), DataError);
    CHECK_THROWS_AS(merge_rasters(a, DensityRaster(MapExtent{{1, 0}, 10, 20, 0}, 0.25, 0.7)), DataError);
  }
}

TEST_CASE("edge scenario density peaks at the attractor") {
  const MapExtent extent = dequindre_extent();
  const Attractor attractor{{0.3, 8.0}, {0.3, 24.0}, 1.0};
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EdgeScenarioOptions opt;
    opt.seed = seed;
    const Scenario s = edge_scenario(extent, attractor, opt, tax());
    ObservationStore store;
    accumulate(store, ground_truth_stream(s), 1.0);
    const DensityRaster r = kde_density(store, {}, extent, {});
    const auto [col, row] = r.argmax();
    const Eigen::Vector2d p = extent.to_local(r.cell_center_world(col, row));
    // Distance from the peak to the attractor segment.
    const Eigen::Vector2d ab = attractor.b - attractor.a;
    const double u = std::clamp((p - attractor.a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    if ((p - (attractor.a + u * ab)).norm() <= r.bandwidth()) ++hits;
  }
  MESSAGE("edge hits " << hits << "/100");
  CHECK(hits >= 95);
}

TEST_CASE("through-traffic occupancy is uniform across the width") {
  const MapExtent extent = dequindre_extent();
  EdgeScenarioOptions opt;
  opt.dwellers = 0;
  opt.through = 2000;
  opt.seed = 11;
  const Scenario s = edge_scenario(extent, std::nullopt, opt, tax());
  // One sample per agent: its lateral offset, constant along its path.
  constexpr int kBins = 10;
  std::vector<int> counts(kBins, 0);
  int n = 0;
  for (const auto& a : s.agents) {
    const Eigen::Vector2d local = extent.to_local(a.path.front().xy);
    const int b = std::clamp(static_cast<int>(local.x() / extent.width_m * kBins), 0, kBins - 1);
    ++counts[static_cast<std::size_t>(b)];
    ++n;
  }
  double chi2 = 0.0;
  const double e = static_cast<double>(n) / kBins;
  for (int c : counts) chi2 += (c - e) * (c - e) / e;
  const double p = 1.0 - boost::math::cdf(boost::math::chi_squared(kBins - 1), chi2);
  CHECK(p > 0.001);
}

TEST_CASE("raster export round trip") {
  CounterRng rng(8);
  std::vector<GroundObservation> v;
  for (int i = 0; i < 40; ++i) v.push_back(obs(rng.uniform(0, 10), rng.uniform(0, 20), i, cls("sitter")));
  ObservationStore store;
  accumulate(store, v, 0.0);
  KdeOptions opt;
  opt.cell_size = 0.5;
  DensityRaster r = kde_density(store, {{cls("sitter")}, TimeWindow{0, 40}}, MapExtent{{3.0, -2.0}, 10.0, 20.0, 0.4}, opt);
  const std::string header = raster_header_json(r, tax());
  const std::string grid = raster_csv(r);
  const DensityRaster back = parse_raster(header, grid, tax());
  CHECK(back == r);
  CHECK(back.bandwidth_mode == "auto");
  CHECK(header.find("\"sitter\"") != std::string::npos);
  // First CSV row is the far edge.
  const auto first_line = grid.substr(0, grid.find('\n'));
  CHECK(std::count(first_line.begin(), first_line.end(), ',') == r.cols() - 1);

  const std::string pgm = raster_pgm(r);
  const std::string magic = "P5\n" + std::to_string(r.cols()) + " " + std::to_string(r.rows()) + "\n255\n";
  REQUIRE(pgm.substr(0, magic.size()) == magic);
  CHECK(pgm.size() == magic.size() + static_cast<std::size_t>(r.cols() * r.rows()));
  int peak = 0;
  for (std::size_t i = magic.size(); i < pgm.size(); ++i) peak = std::max(peak, static_cast<int>(static_cast<unsigned char>(pgm[i])));
  CHECK(peak == 255);

  CHECK_THROWS_AS(parse_raster(header, grid + "1,2\n", tax()), DataError);
  CHECK_THROWS_AS(parse_raster("{", grid, tax()), DataError);
  CHECK_THROWS_AS(parse_raster(header, grid.substr(0, grid.find('\n') + 1), tax()), DataError);
}
