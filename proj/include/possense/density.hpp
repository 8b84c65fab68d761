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
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "possense/mapping.hpp"

namespace possense {

/// Half-open time interval [begin, end) in stream seconds.
struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
  bool contains(double t) const { return t >= begin && t < end; }
  bool operator==(const TimeWindow&) const = default;
};

struct ObservationFilter {
  /// Empty means every class.
  std::vector<int> classes;
  std::optional<TimeWindow> time_window;
};

/// Append-only observation log indexed by (class, time bucket).
class ObservationStore {
 public:
  explicit ObservationStore(double bucket_s = 3600.0);

  /// Throws DataError if `o` is older than the last observation of its source.
  void append(const GroundObservation& o);

  std::span<const GroundObservation> observations() const { return observations_; }
  std::size_t size() const { return observations_.size(); }
  double bucket_seconds() const { return bucket_s_; }

  /// Indices of matching observations, ascending.
  std::vector<std::size_t> select(const ObservationFilter& filter) const;

  /// Decimation state per source: the window index and timestamp of the last
  /// kept frame.
  struct SourceState {
    double origin = std::numeric_limits<double>::quiet_NaN();
    double last_ts = -std::numeric_limits<double>::infinity();
    std::int64_t kept_window = std::numeric_limits<std::int64_t>::min();
    double kept_ts = std::numeric_limits<double>::quiet_NaN();
  };
  std::map<std::string, SourceState>& sources() { return sources_; }

 private:
  double bucket_s_;
  std::vector<GroundObservation> observations_;
  std::map<std::pair<int, std::int64_t>, std::vector<std::size_t>> index_;
  std::map<std::string, SourceState> sources_;
};

/// Appends observations after decimating each source to `sampling_fps`: a
/// frame (all observations sharing a timestamp) is kept when it is the first
/// of its 1/fps window, windows counted from the source's first timestamp. fps = 0 disables decimation. Returns the number
/// appended. Throws ConfigError for negative fps.
std::size_t accumulate(ObservationStore& store, std::span<const GroundObservation> observations,
                       double sampling_fps);

/// Fixed-point unit of raster mass: one observation is 2^32 quanta. Integer
/// storage makes merges exact, commutative and associative.
inline constexpr double kMassQuantum = 1.0 / 4294967296.0;
inline constexpr std::int64_t kQuantaPerObservation = std::int64_t{1} << 32;
inline constexpr double kDefaultCellSize = 0.25;

class DensityRaster {
 public:
  DensityRaster() = default;
  /// An all-zero raster (the merge identity).
  DensityRaster(const MapExtent& extent, double cell_size, double bandwidth);

  const MapExtent& extent() const { return extent_; }
  double cell_size() const { return cell_size_; }
  double bandwidth() const { return bandwidth_; }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  std::int64_t total_count() const { return total_count_; }

  /// Density (counts per m^2) of the cell at local column/row (row 0 at the
  /// extent origin edge).
  double value(int col, int row) const;
  std::int64_t quanta(int col, int row) const { return mass_[index(col, row)]; }
  /// Integral of the raster in counts.
  double mass() const;
  /// Local-frame centre of a cell and its world position.
  Eigen::Vector2d cell_center_world(int col, int row) const;
  /// Cell with the largest density (first in row-major order on ties).
  std::pair<int, int> argmax() const;

  std::optional<TimeWindow> time_window;
  std::vector<int> classes;
  std::string bandwidth_mode = "fixed";

  bool same_grid(const DensityRaster& other) const;
  bool operator==(const DensityRaster& other) const;

  /// Adds one observation at local coordinates with weight 1; the kernel is
  /// renormalized to the grid so every observation contributes exactly 1.
  void splat(const Eigen::Vector2d& local);
  void add(const DensityRaster& other);
  void set_total_count(std::int64_t n) { total_count_ = n; }
  std::vector<std::int64_t>& raw() { return mass_; }
  const std::vector<std::int64_t>& raw() const { return mass_; }

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col);
  }
  MapExtent extent_;
  double cell_size_ = kDefaultCellSize;
  double bandwidth_ = 0.0;
  int cols_ = 0;
  int rows_ = 0;
  std::int64_t total_count_ = 0;
  std::vector<std::int64_t> mass_;
};

/// Bivariate normal-reference bandwidth: per axis min(sd, IQR/1.349) * n^(-1/6),
/// combined by geometric mean. Returns nullopt when it is undefined (n < 2 or
/// zero spread on an axis).
std::optional<double> auto_bandwidth(std::span<const Eigen::Vector2d> points);

struct KdeOptions {
  double cell_size = kDefaultCellSize;
  /// Metres; nullopt selects auto_bandwidth (falling back to cell_size).
  std::optional<double> bandwidth;
  int jobs = 1;
};

/// Gaussian KDE of the filtered observations that fall inside `extent`.
/// Throws ConfigError for a non-positive bandwidth or cell size.
DensityRaster kde_density(const ObservationStore& store, const ObservationFilter& filter, const MapExtent& extent,
                          const KdeOptions& options = {});

/// Cellwise sum. Throws DataError unless extent, cell size and bandwidth match.
DensityRaster merge_rasters(const DensityRaster& a, const DensityRaster& b);

/// Grid as CSV (one line per row, far edge first, values "%.17g").
std::string raster_csv(const DensityRaster& r);
std::string raster_header_json(const DensityRaster& r, const Taxonomy& taxonomy);
/// 8-bit binary PGM scaled to the maximum density.
std::string raster_pgm(const DensityRaster& r);
/// Rebuilds a raster from its header and CSV grid.
DensityRaster parse_raster(std::string_view header_json, std::string_view grid_csv, const Taxonomy& taxonomy);

}  // namespace possense
