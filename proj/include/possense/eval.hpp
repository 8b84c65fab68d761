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

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "possense/annotation.hpp"
#include "possense/taxonomy.hpp"

namespace possense {

enum class IouType { bbox, segm };

std::string_view to_string(IouType t);
IouType iou_type_from_string(std::string_view s);

/// Throws DataError for a box with non-positive width or height.
double iou_bbox(const BBox& a, const BBox& b);

/// IoU of the two rasterized masks (pixel centres, even-odd per part, union
/// across parts). Throws DataError for an empty set or one lying entirely
/// outside the image.
double iou_mask(const PolygonSet& a, const PolygonSet& b, int image_width, int image_height);

struct DetectionMatch {
  std::int64_t det_id = 0;
  std::optional<std::int64_t> gt_id;
  /// IoU with the matched gt, 0 when unmatched.
  double iou = 0.0;
  double score = 0.0;
};

struct MatchResult {
  /// Score-descending (stable in input order).
  std::vector<DetectionMatch> detections;
  std::vector<std::int64_t> unmatched_gt;
};

using IouFn = std::function<double(const Annotation& gt, const Annotation& det)>;

/// Greedy matching within one image and class: detections by descending
/// score each take the highest-IoU unmatched gt with IoU >= threshold; equal
/// IoUs go to the lower gt id.
MatchResult match_detections(std::span<const Annotation> gt, std::span<const Annotation> dets, const IouFn& iou,
                             double threshold);

inline constexpr int kRecallPoints = 101;

/// Recall threshold i of the 101-point grid (i * 0.01, as the reference
/// tooling computes it).
double recall_threshold(int i);

/// The ten COCO IoU thresholds 0.50:0.05:0.95.
const std::array<double, 10>& coco_iou_thresholds();

struct PrCurve {
  /// Interpolated precision at each recall threshold (monotone envelope,
  /// 0 beyond the highest recall reached).
  std::array<double, kRecallPoints> precision{};
  /// Highest recall reached.
  double max_recall = 0.0;
  /// Mean of `precision`; empty when there are no gt instances.
  std::optional<double> ap;
};

struct ScoredOutcome {
  double score = 0.0;
  bool true_positive = false;
};

/// Cumulative TP/FP sweep over outcomes sorted by descending score (stable).
PrCurve pr_curve(std::span<const ScoredOutcome> outcomes, std::int64_t gt_count);

struct ApResult {
  std::optional<double> ap, ap50, ap75, ap_small, ap_medium, ap_large, ar100;
  std::int64_t gt_count = 0;
  std::int64_t det_count = 0;
};

/// Rungs of the diagnosis ladder, in order.
enum class Rung { c75, c50, loc, sim, oth, bg, fn };
inline constexpr std::array<Rung, 7> kRungs{Rung::c75, Rung::c50, Rung::loc, Rung::sim,
                                            Rung::oth, Rung::bg,  Rung::fn};
std::string_view to_string(Rung r);

struct DiagnosisLadder {
  std::array<PrCurve, 7> curves{};

  std::optional<double> ap(Rung r) const { return curves[static_cast<std::size_t>(r)].ap; }
};

struct EvalOptions {
  IouType iou_type = IouType::bbox;
  int max_dets = 100;
  int jobs = 1;
};

/// COCO-protocol evaluator over one gt dataset and a detection set whose
/// class ids are already in the evaluated space (apply the treatment first).
/// Per image and class it keeps the top max_dets detections and their IoUs
/// against the image's gt, so every metric and ladder rung reuses them.
class Evaluator {
 public:
  /// Throws DataError for detections on images missing from `gt` or without
  /// a score, and (segm) for images without a size.
  Evaluator(const Dataset& gt, std::span<const Annotation> dets, const Taxonomy& taxonomy,
            const EvalOptions& options = {});
  ~Evaluator();
  Evaluator(Evaluator&&) noexcept;
  Evaluator& operator=(Evaluator&&) noexcept;

  ApResult evaluate(int class_id) const;
  /// Area range "all", one IoU threshold.
  PrCurve curve(int class_id, double iou_threshold) const;
  DiagnosisLadder diagnose(int class_id) const;
  /// Greedy matches (area "all") for one image and class.
  MatchResult matches(std::int64_t image_id, int class_id, double iou_threshold) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Single-class convenience wrapper.
ApResult coco_ap(const Dataset& gt, std::span<const Annotation> dets, int class_id, IouType iou_type,
                 const Taxonomy& taxonomy = Taxonomy::opos());

/// Unweighted mean of the defined values; empty when none is defined.
/// Throws DataError for an empty subset.
std::optional<double> mean_ap(std::span<const std::optional<double>> values);

struct EvalReport {
  IouType iou_type = IouType::bbox;
  std::string treatment;
  std::vector<int> classes;
  std::vector<ApResult> per_class;
  std::optional<double> map_overall, map_people;
  /// Filled by evaluate_dataset when diagnosis is requested.
  std::vector<DiagnosisLadder> ladders;
  std::array<std::optional<double>, 7> ladder_overall{}, ladder_people{};
};

/// Applies the treatment to both sides, then evaluates every class surviving
/// it (N/A for classes without gt).
EvalReport evaluate_dataset(const Dataset& gt, std::span<const Annotation> dets, const Taxonomy& taxonomy,
                            const Treatment& treatment, const EvalOptions& options, bool with_ladder);

std::string report_json(const EvalReport& report, const Taxonomy& taxonomy);
std::string report_csv(const EvalReport& report, const Taxonomy& taxonomy);
/// class,curve,recall,precision rows for the ladder curves (or the C50/C75
/// curves when no ladder was computed).
std::string pr_curves_csv(const EvalReport& report, const Taxonomy& taxonomy);

struct ClassStats {
  int class_id = 0;
  std::int64_t count = 0;
  double area_mean = 0.0, area_std = 0.0;
  double aspect_mean = 0.0, aspect_std = 0.0;
  /// Annotations with area < 32^2 px^2.
  std::int64_t small = 0;
};

struct DatasetStats {
  std::int64_t images = 0;
  std::int64_t annotations = 0;
  std::int64_t small = 0;
  /// Classes in taxonomy order, including those with zero count.
  std::vector<ClassStats> per_class;
  /// Annotation counts per image "weather" tag, and for images tagged
  /// "evening": true. Empty/zero when no image carries tags.
  std::map<std::string, std::int64_t> weather;
  std::int64_t evening = 0;
};

/// Polygon (shoelace) area, bbox h/w aspect, population standard deviations.
DatasetStats dataset_stats(const Dataset& dataset, const Taxonomy& taxonomy);
std::string stats_json(const DatasetStats& stats, const Taxonomy& taxonomy);
std::string stats_csv(const DatasetStats& stats, const Taxonomy& taxonomy);

}  // namespace possense
