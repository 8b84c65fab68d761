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

#include "possense/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "possense/csv.hpp"
#include "possense/error.hpp"
#include "possense/parallel.hpp"

namespace possense {

ObservationStore::ObservationStore(double bucket_s) : bucket_s_(bucket_s) {
  if (!(bucket_s > 0.0)) throw ConfigError("observation store: bucket length must be positive");
}

void ObservationStore::append(const GroundObservation& o) {
  if (!o.world_xy.allFinite() || !std::isfinite(o.timestamp)) {
    throw DataError("observation from image " + std::to_string(o.source_image_id) + " has non-finite fields");
  }
  SourceState& src = sources_[o.source];
  if (o.timestamp < src.last_ts) {
    throw DataError("observation stream '" + o.source + "' goes back in time (" + std::to_string(o.timestamp) +
                    " after " + std::to_string(src.last_ts) + ")");
  }
  src.last_ts = o.timestamp;
  const auto bucket = static_cast<std::int64_t>(std::floor(o.timestamp / bucket_s_));
  index_[{o.class_id, bucket}].push_back(observations_.size());
  observations_.push_back(o);
}

std::vector<std::size_t> ObservationStore::select(const ObservationFilter& filter) const {
  const std::set<int> classes(filter.classes.begin(), filter.classes.end());
  std::vector<std::size_t> out;
  for (const auto& [key, idx] : index_) {
    if (!classes.empty() && !classes.count(key.first)) continue;
    if (filter.time_window) {
      const double b0 = static_cast<double>(key.second) * bucket_s_;
      if (b0 >= filter.time_window->end || b0 + bucket_s_ <= filter.time_window->begin) continue;
      for (std::size_t i : idx) {
        if (filter.time_window->contains(observations_[i].timestamp)) out.push_back(i);
      }
    } else {
      out.insert(out.end(), idx.begin(), idx.end());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t accumulate(ObservationStore& store, std::span<const GroundObservation> observations, double fps) {
  if (!(fps >= 0.0)) throw ConfigError("accumulate: sampling fps must be non-negative");
  std::size_t appended = 0;
  for (const auto& o : observations) {
    if (fps > 0.0) {
      auto& src = store.sources()[o.source];
      if (o.timestamp < src.last_ts) throw DataError("observation stream '" + o.source + "' goes back in time");
      if (std::isnan(src.origin)) src.origin = o.timestamp;
      src.last_ts = o.timestamp;
      // Windows start at the source's first frame, so a stream of duration D
      // keeps at most ceil(D * fps) frames.
      const auto window = static_cast<std::int64_t>(std::floor((o.timestamp - src.origin) * fps + 1e-9));
      if (window > src.kept_window) {
        src.kept_window = window;
        src.kept_ts = o.timestamp;
      } else if (o.timestamp != src.kept_ts) {
        continue;
      }
    }
    store.append(o);
    ++appended;
  }
  return appended;
}

DensityRaster::DensityRaster(const MapExtent& extent, double cell_size, double bandwidth)
    : extent_(extent), cell_size_(cell_size), bandwidth_(bandwidth) {
  extent.validate();
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw ConfigError("density raster: cell size must be positive");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("density raster: bandwidth must be positive");
  cols_ = std::max(1, static_cast<int>(std::ceil(extent.width_m / cell_size - 1e-9)));
  rows_ = std::max(1, static_cast<int>(std::ceil(extent.length_m / cell_size - 1e-9)));
  mass_.assign(static_cast<std::size_t>(cols_) * static_cast<std::size_t>(rows_), 0);
}

double DensityRaster::value(int col, int row) const {
  return static_cast<double>(mass_[index(col, row)]) * kMassQuantum / (cell_size_ * cell_size_);
}

double DensityRaster::mass() const {
  __int128 sum = 0;
  for (std::int64_t m : mass_) sum += m;
  return static_cast<double>(sum) * kMassQuantum;
}

Eigen::Vector2d DensityRaster::cell_center_world(int col, int row) const {
  return extent_.to_world({(col + 0.5) * cell_size_, (row + 0.5) * cell_size_});
}

std::pair<int, int> DensityRaster::argmax() const {
  const auto it = std::max_element(mass_.begin(), mass_.end());
  const auto i = static_cast<int>(it - mass_.begin());
  return {i % cols_, i / cols_};
}

bool DensityRaster::same_grid(const DensityRaster& o) const {
  return extent_ == o.extent_ && cell_size_ == o.cell_size_ && bandwidth_ == o.bandwidth_;
}

bool DensityRaster::operator==(const DensityRaster& o) const {
  return same_grid(o) && total_count_ == o.total_count_ && mass_ == o.mass_ && time_window == o.time_window &&
         classes == o.classes;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Per-cell Gaussian mass along one axis over cells [first, last].
void axis_weights(double x, double h, double cell, int n, int& first, int& last, std::vector<double>& w) {
  constexpr double kTruncation = 5.0;
  first = std::clamp(static_cast<int>(std::floor((x - kTruncation * h) / cell)), 0, n - 1);
  last = std::clamp(static_cast<int>(std::floor((x + kTruncation * h) / cell)), 0, n - 1);
  w.resize(static_cast<std::size_t>(last - first + 1));
  double lo = normal_cdf((first * cell - x) / h);
  for (int i = first; i <= last; ++i) {
    const double hi = normal_cdf(((i + 1) * cell - x) / h);
    w[static_cast<std::size_t>(i - first)] = hi - lo;
    lo = hi;
  }
}

}  // namespace

void DensityRaster::splat(const Eigen::Vector2d& local) {
  int c0 = 0, c1 = 0, r0 = 0, r1 = 0;
  std::vector<double> wx;
  std::vector<double> wy;
  axis_weights(local.x(), bandwidth_, cell_size_, cols_, c0, c1, wx);
  axis_weights(local.y(), bandwidth_, cell_size_, rows_, r0, r1, wy);
  double sx = 0.0, sy = 0.0;
  for (double v : wx) sx += v;
  for (double v : wy) sy += v;
  if (!(sx > 0.0) || !(sy > 0.0)) {
    // Kernel far narrower than a cell and the point on a far edge: all mass
    // goes to the containing cell.
    wx.assign(wx.size(), 0.0);
    wy.assign(wy.size(), 0.0);
    const int cx = std::clamp(static_cast<int>(std::floor(local.x() / cell_size_)), c0, c1);
    const int cy = std::clamp(static_cast<int>(std::floor(local.y() / cell_size_)), r0, r1);
    wx[static_cast<std::size_t>(cx - c0)] = 1.0;
    wy[static_cast<std::size_t>(cy - r0)] = 1.0;
    sx = sy = 1.0;
  }
  const double scale = static_cast<double>(kQuantaPerObservation) / (sx * sy);
  std::int64_t placed = 0;
  std::size_t best = index(c0, r0);
  std::int64_t best_q = -1;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const auto q = std::llround(wx[static_cast<std::size_t>(c - c0)] * wy[static_cast<std::size_t>(r - r0)] * scale);
      const std::size_t i = index(c, r);
      mass_[i] += q;
      placed += q;
      if (q > best_q) {
        best_q = q;
        best = i;
      }
    }
  }
  // Rounding residue goes to the peak cell so each observation is exactly one count.
  mass_[best] += kQuantaPerObservation - placed;
  ++total_count_;
}

void DensityRaster::add(const DensityRaster& o) {
  for (std::size_t i = 0; i < mass_.size(); ++i) mass_[i] += o.mass_[i];
  total_count_ += o.total_count_;
}

std::optional<double> auto_bandwidth(std::span<const Eigen::Vector2d> points) {
  const std::size_t n = points.size();
  if (n < 2) return std::nullopt;
  double h_prod = 1.0;
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<double> v(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = points[i][axis];
      mean += v[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    std::sort(v.begin(), v.end());
    // Linear-interpolated quantiles (type 7).
    auto quantile = [&](double p) {
      const double pos = p * static_cast<double>(n - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, n - 1);
      return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.349);
    if (!(spread > 0.0)) return std::nullopt;
    h_prod *= spread * std::pow(static_cast<double>(n), -1.0 / 6.0);
  }
  return std::sqrt(h_prod);
}

DensityRaster kde_density(const ObservationStore& store, const ObservationFilter& filter, const MapExtent& extent,
                          const KdeOptions& options) {
  extent.validate();
  if (!(options.cell_size > 0.0)) throw ConfigError("kde_density: cell size must be positive");
  if (options.bandwidth && !(*options.bandwidth > 0.0)) throw ConfigError("kde_density: bandwidth must be positive");

  std::vector<Eigen::Vector2d> local;
  for (std::size_t i : store.select(filter)) {
    const Eigen::Vector2d& xy = store.observations()[i].world_xy;
    if (extent.contains(xy)) local.push_back(extent.to_local(xy));
  }
  double h = options.cell_size;
  std::string mode = "fixed";
  if (options.bandwidth) {
    h = *options.bandwidth;
  } else {
    mode = "auto";
    if (const auto a = auto_bandwidth(local)) {
      h = *a;
    } else {
      mode = "auto-fallback-cell";
    }
  }

  DensityRaster out(extent, options.cell_size, h);
  out.bandwidth_mode = mode;
  out.time_window = filter.time_window;
  out.classes = filter.classes;
  std::sort(out.classes.begin(), out.classes.end());

  // Integer partial rasters summed in chunk order: identical for any job count.
  const std::size_t chunk = 4096;
  const std::size_t n_chunks = (local.size() + chunk - 1) / chunk;
  std::vector<DensityRaster> parts(n_chunks, DensityRaster(extent, options.cell_size, h));
  parallel_for(n_chunks, options.jobs, [&](std::size_t k) {
    const std::size_t end = std::min(local.size(), (k + 1) * chunk);
    for (std::size_t i = k * chunk; i < end; ++i) parts[k].splat(local[i]);
  });
  for (const auto& p : parts) out.add(p);
  return out;
}

DensityRaster merge_rasters(const DensityRaster& a, const DensityRaster& b) {
  if (!a.same_grid(b)) {
    throw DataError("merge_rasters: grids differ (extent, cell size or bandwidth)");
  }
  DensityRaster out = a;
  out.add(b);
  if (a.time_window && b.time_window) {
    out.time_window = TimeWindow{std::min(a.time_window->begin, b.time_window->begin),
                                 std::max(a.time_window->end, b.time_window->end)};
  } else {
    out.time_window.reset();
  }
  if (a.classes.empty() || b.classes.empty()) {
    out.classes.clear();
  } else {
    std::set<int> u(a.classes.begin(), a.classes.end());
    u.insert(b.classes.begin(), b.classes.end());
    out.classes.assign(u.begin(), u.end());
  }
  if (a.bandwidth_mode != b.bandwidth_mode) out.bandwidth_mode = "mixed";
  return out;
}

std::string raster_csv(const DensityRaster& r) {
  std::string out;
  for (int row = r.rows() - 1; row >= 0; --row) {
    for (int col = 0; col < r.cols(); ++col) {
      if (col > 0) out += ',';
      out += csv::format_double(r.value(col, row));
    }
    out += '\n';
  }
  return out;
}

std::string raster_header_json(const DensityRaster& r, const Taxonomy& taxonomy) {
  nlohmann::ordered_json j;
  j["extent"] = nlohmann::ordered_json::parse(write_extent(r.extent()));
  j["cell_size"] = r.cell_size();
  j["bandwidth"] = r.bandwidth();
  j["bandwidth_mode"] = r.bandwidth_mode;
  j["kernel"] = "gaussian";
  j["total_count"] = r.total_count();
  j["time_window"] = r.time_window ? nlohmann::ordered_json{r.time_window->begin, r.time_window->end}
                                   : nlohmann::ordered_json(nullptr);
  j["classes"] = nlohmann::ordered_json::array();
  for (int c : r.classes) j["classes"].push_back(taxonomy.at(c).name);
  j["cols"] = r.cols();
  j["rows"] = r.rows();
  j["row_order"] = "far-edge-first";
  j["units"] = "counts/m^2";
  return j.dump(2) + "\n";
}

std::string raster_pgm(const DensityRaster& r) {
  double peak = 0.0;
  for (int row = 0; row < r.rows(); ++row) {
    for (int col = 0; col < r.cols(); ++col) peak = std::max(peak, r.value(col, row));
  }
  std::string out = "P5\n" + std::to_string(r.cols()) + " " + std::to_string(r.rows()) + "\n255\n";
  for (int row = r.rows() - 1; row >= 0; --row) {
    for (int col = 0; col < r.cols(); ++col) {
      const double v = peak > 0.0 ? r.value(col, row) / peak : 0.0;
      out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
    }
  }
  return out;
}

DensityRaster parse_raster(std::string_view header_json, std::string_view grid_csv, const Taxonomy& taxonomy) {
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header_json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("raster header: ") + e.what());
  }
  DensityRaster r;
  try {
    r = DensityRaster(parse_extent(h.at("extent").dump()), h.at("cell_size").get<double>(),
                      h.at("bandwidth").get<double>());
    r.bandwidth_mode = h.value("bandwidth_mode", std::string("fixed"));
    r.set_total_count(h.at("total_count").get<std::int64_t>());
    if (h.contains("time_window") && !h["time_window"].is_null()) {
      r.time_window = TimeWindow{h["time_window"].at(0).get<double>(), h["time_window"].at(1).get<double>()};
    }
    for (const auto& c : h.value("classes", nlohmann::json::array())) r.classes.push_back(taxonomy.id_of(c.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("raster header: ") + e.what());
  }
  const double cell_area = r.cell_size() * r.cell_size();
  int row = r.rows() - 1;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < grid_csv.size()) {
    const std::size_t nl = grid_csv.find('\n', pos);
    const std::string_view line = grid_csv.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? grid_csv.size() : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (row < 0) throw DataError("raster grid: more rows than the header declares");
    int col = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      const std::string cell(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (col >= r.cols()) throw DataError("raster grid:" + std::to_string(line_no) + ": too many columns");
      const double v = csv::to_double(cell, "raster grid", line_no);
      r.raw()[static_cast<std::size_t>(row) * static_cast<std::size_t>(r.cols()) + static_cast<std::size_t>(col)] =
          std::llround(v * cell_area / kMassQuantum);
      ++col;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (col != r.cols()) throw DataError("raster grid:" + std::to_string(line_no) + ": expected " + std::to_string(r.cols()) + " columns");
    --row;
  }
  if (row != -1) throw DataError("raster grid: fewer rows than the header declares");
  return r;
}

}  // namespace possense
