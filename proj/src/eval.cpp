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

#include "possense/eval.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "possense/csv.hpp"
#include "possense/error.hpp"
#include "possense/parallel.hpp"

namespace possense {

std::string_view to_string(IouType t) { return t == IouType::bbox ? "bbox" : "segm"; }

IouType iou_type_from_string(std::string_view s) {
  if (s == "bbox") return IouType::bbox;
  if (s == "segm") return IouType::segm;
  throw ConfigError("unknown IoU type '" + std::string(s) + "' (expected bbox or segm)");
}

std::string_view to_string(Rung r) {
  static constexpr std::array<std::string_view, 7> names{"C75", "C50", "Loc", "Sim", "Oth", "BG", "FN"};
  return names[static_cast<std::size_t>(r)];
}

namespace {

// Areas from edge differences so a box intersected with itself gives
// exactly its own area.
double box_area(const BBox& a) { return (a.right() - a.x) * (a.bottom() - a.y); }

double box_intersection(const BBox& a, const BBox& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace

double iou_bbox(const BBox& a, const BBox& b) {
  if (!(a.w > 0.0) || !(a.h > 0.0) || !(b.w > 0.0) || !(b.h > 0.0)) {
    throw DataError("iou_bbox: degenerate box");
  }
  const double inter = box_intersection(a, b);
  return inter / (box_area(a) + box_area(b) - inter);
}

double iou_mask(const PolygonSet& a, const PolygonSet& b, int image_width, int image_height) {
  auto check = [&](const PolygonSet& p, const char* which) {
    bool any = false;
    for (const auto& part : p) any = any || !part.empty();
    if (!any) throw DataError(std::string("iou_mask: polygon set ") + which + " is empty");
    const BBox box = polygon_bbox(p);
    if (box.x >= image_width || box.y >= image_height || box.right() <= 0.0 || box.bottom() <= 0.0) {
      throw DataError(std::string("iou_mask: polygon set ") + which + " lies outside the image");
    }
  };
  check(a, "a");
  check(b, "b");
  const Mask ma = Mask::rasterize(a, image_width, image_height);
  const Mask mb = Mask::rasterize(b, image_width, image_height);
  const std::int64_t inter = Mask::intersection(ma, mb);
  const std::int64_t uni = ma.count() + mb.count() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

namespace {

std::vector<std::size_t> score_order(std::span<const Annotation> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score.value_or(0) > dets[b].score.value_or(0); });
  return order;
}

}  // namespace

MatchResult match_detections(std::span<const Annotation> gt, std::span<const Annotation> dets, const IouFn& iou,
                             double threshold) {
  std::vector<std::size_t> gt_order(gt.size());
  std::iota(gt_order.begin(), gt_order.end(), 0);
  std::stable_sort(gt_order.begin(), gt_order.end(), [&](std::size_t a, std::size_t b) { return gt[a].id < gt[b].id; });
  std::vector<bool> taken(gt.size(), false);
  MatchResult out;
  for (std::size_t d : score_order(dets)) {
    DetectionMatch m{dets[d].id, std::nullopt, 0.0, dets[d].score.value_or(0.0)};
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t g : gt_order) {
      if (taken[g]) continue;
      const double v = iou(gt[g], dets[d]);
      if (v >= threshold && (!best || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    if (best) {
      taken[*best] = true;
      m.gt_id = gt[*best].id;
      m.iou = best_iou;
    }
    out.detections.push_back(m);
  }
  for (std::size_t g : gt_order) {
    if (!taken[g]) out.unmatched_gt.push_back(gt[g].id);
  }
  return out;
}

double recall_threshold(int i) { return static_cast<double>(i) * 0.01; }

const std::array<double, 10>& coco_iou_thresholds() {
  static const std::array<double, 10> t = [] {
    std::array<double, 10> v{};
    const double step = (0.95 - 0.5) / 9.0;
    for (int i = 0; i < 10; ++i) v[static_cast<std::size_t>(i)] = 0.5 + i * step;
    v[9] = 0.95;
    return v;
  }();
  return t;
}

PrCurve pr_curve(std::span<const ScoredOutcome> outcomes, std::int64_t gt_count) {
  PrCurve curve;
  if (gt_count <= 0) return curve;
  std::vector<ScoredOutcome> sorted(outcomes.begin(), outcomes.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  const std::size_t n = sorted.size();
  std::vector<double> rc(n);
  std::vector<double> pr(n);
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    (sorted[i].true_positive ? tp : fp) += 1.0;
    rc[i] = tp / static_cast<double>(gt_count);
    pr[i] = tp / (tp + fp + DBL_EPSILON);
  }
  for (std::size_t i = n; i-- > 1;) pr[i - 1] = std::max(pr[i - 1], pr[i]);
  double sum = 0.0;
  for (int r = 0; r < kRecallPoints; ++r) {
    const auto it = std::lower_bound(rc.begin(), rc.end(), recall_threshold(r));
    const double q = it == rc.end() ? 0.0 : pr[static_cast<std::size_t>(it - rc.begin())];
    curve.precision[static_cast<std::size_t>(r)] = q;
    sum += q;
  }
  curve.max_recall = n ? rc.back() : 0.0;
  curve.ap = sum / kRecallPoints;
  return curve;
}

// ---------------------------------------------------------------------------

namespace {

struct AreaRange {
  double lo;
  double hi;
};
constexpr AreaRange kAll{0.0, 1e10};
constexpr std::array<AreaRange, 4> kAreaRanges{{{0.0, 1e10}, {0.0, 32.0 * 32.0}, {32.0 * 32.0, 96.0 * 96.0},
                                                {96.0 * 96.0, 1e10}}};

struct GtItem {
  std::int64_t id;
  int cls;
  BBox box;
  double area;
  bool crowd;
  Mask mask;
};

struct DetItem {
  std::int64_t id;
  int cls;
  BBox box;
  double area;
  double score;
  Mask mask;
};

struct Cell {
  std::vector<int> gt;   // image gt indices, ascending id
  std::vector<int> det;  // image det indices, score-descending, truncated
  std::vector<double> iou;  // det-major
};

struct ImageData {
  std::int64_t id = 0;
  std::vector<GtItem> gts;
  std::vector<DetItem> dets;
  std::map<int, Cell> cells;
};

/// Per-detection outcome of one (image, class, threshold, area) matching.
struct Outcome {
  double score;
  bool tp;
  bool ignore;
  int det;  // image det index
  int gt;   // matched cell gt position, -1 if none
};

}  // namespace

struct Evaluator::Impl {
  EvalOptions options;
  std::vector<ImageData> images;
  std::unordered_map<std::int64_t, std::size_t> image_index;
  std::map<int, SuperCategory> super;

  double iou(const GtItem& g, const DetItem& d) const {
    if (options.iou_type == IouType::bbox) {
      const double inter = box_intersection(g.box, d.box);
      const double denom = g.crowd ? box_area(d.box) : box_area(g.box) + box_area(d.box) - inter;
      return denom > 0.0 ? inter / denom : 0.0;
    }
    const double inter = static_cast<double>(Mask::intersection(g.mask, d.mask));
    const double denom = g.crowd ? static_cast<double>(d.mask.count())
                                 : static_cast<double>(g.mask.count() + d.mask.count()) - inter;
    return denom > 0.0 ? inter / denom : 0.0;
  }

  /// Greedy matching with COCO ignore semantics; returns non-ignored gt count.
  std::int64_t match(const ImageData& img, const Cell& cell, double thr, AreaRange range,
                     std::vector<Outcome>& out) const {
    const std::size_t ng = cell.gt.size();
    std::vector<char> ig(ng);
    std::int64_t npig = 0;
    for (std::size_t k = 0; k < ng; ++k) {
      const GtItem& g = img.gts[static_cast<std::size_t>(cell.gt[k])];
      ig[k] = g.crowd || g.area < range.lo || g.area > range.hi;
      if (!ig[k]) ++npig;
    }
    std::vector<std::size_t> order(ng);
    std::iota(order.begin(), order.end(), 0);
    std::stable_partition(order.begin(), order.end(), [&](std::size_t k) { return !ig[k]; });
    std::vector<char> taken(ng, 0);
    const double t = std::min(thr, 1.0 - 1e-10);
    for (std::size_t di = 0; di < cell.det.size(); ++di) {
      const DetItem& d = img.dets[static_cast<std::size_t>(cell.det[di])];
      int m = -1;
      double best = t;
      for (std::size_t k : order) {
        const GtItem& g = img.gts[static_cast<std::size_t>(cell.gt[k])];
        if (taken[k] && !g.crowd) continue;
        if (m > -1 && !ig[static_cast<std::size_t>(m)] && ig[k]) break;
        const double v = cell.iou[di * ng + k];
        if (m == -1 ? v < best : v <= best) continue;
        best = v;
        m = static_cast<int>(k);
      }
      Outcome o{d.score, false, false, cell.det[di], m};
      if (m > -1) {
        taken[static_cast<std::size_t>(m)] = 1;
        o.tp = true;
        o.ignore = ig[static_cast<std::size_t>(m)];
      } else {
        o.ignore = d.area < range.lo || d.area > range.hi;
      }
      out.push_back(o);
    }
    return npig;
  }

  /// Outcomes across all images for one class; the callback may drop or
  /// re-label false positives (used by the Sim/Oth rungs).
  template <class Adjust>
  PrCurve sweep(int cls, double thr, AreaRange range, Adjust&& adjust, double* recall = nullptr) const {
    std::vector<ScoredOutcome> scored;
    std::vector<Outcome> buf;
    std::int64_t npig = 0;
    for (const ImageData& img : images) {
      const auto it = img.cells.find(cls);
      if (it == img.cells.end()) continue;
      buf.clear();
      npig += match(img, it->second, thr, range, buf);
      for (Outcome& o : buf) {
        if (!o.ignore && !o.tp) adjust(img, o);
        if (!o.ignore) scored.push_back({o.score, o.tp});
      }
    }
    PrCurve c = pr_curve(scored, npig);
    if (recall) *recall = c.max_recall;
    return c;
  }

  PrCurve sweep(int cls, double thr, AreaRange range, double* recall = nullptr) const {
    return sweep(cls, thr, range, [](const ImageData&, Outcome&) {}, recall);
  }

  bool overlaps_other_class(const ImageData& img, const DetItem& d, int cls, bool same_super_only) const {
    for (const GtItem& g : img.gts) {
      if (g.cls == cls) continue;
      if (same_super_only && super.at(g.cls) != super.at(cls)) continue;
      if (iou(g, d) >= 0.1) return true;
    }
    return false;
  }
};

Evaluator::Evaluator(const Dataset& gt, std::span<const Annotation> dets, const Taxonomy& taxonomy,
                     const EvalOptions& options)
    : impl_(std::make_unique<Impl>()) {
  Impl& m = *impl_;
  m.options = options;
  if (options.max_dets <= 0) throw ConfigError("evaluator: max_dets must be positive");
  for (const auto& c : taxonomy.classes()) m.super[c.id] = c.super_category;

  std::vector<const ImageRecord*> recs;
  for (const auto& im : gt.images) recs.push_back(&im);
  std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->id < b->id; });
  m.images.resize(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    m.images[i].id = recs[i]->id;
    if (!m.image_index.emplace(recs[i]->id, i).second) {
      throw DataError("evaluator: duplicate image id " + std::to_string(recs[i]->id));
    }
    if (options.iou_type == IouType::segm && (recs[i]->width <= 0 || recs[i]->height <= 0)) {
      throw DataError("evaluator: image " + std::to_string(recs[i]->id) + " has no size (needed for segm)");
    }
  }
  auto image_of = [&](const Annotation& a, const char* what) -> std::size_t {
    const auto it = m.image_index.find(a.image_id);
    if (it == m.image_index.end()) {
      throw DataError(std::string("evaluator: ") + what + " " + std::to_string(a.id) + " refers to unknown image " +
                      std::to_string(a.image_id));
    }
    return it->second;
  };
  auto check_class = [&](const Annotation& a, const char* what) {
    if (!m.super.count(a.category_id)) {
      throw DataError(std::string("evaluator: ") + what + " " + std::to_string(a.id) + " has unknown class " +
                      std::to_string(a.category_id));
    }
  };

  std::vector<std::vector<const Annotation*>> gt_by_image(m.images.size());
  std::vector<std::vector<const Annotation*>> det_by_image(m.images.size());
  for (const auto& a : gt.annotations) {
    check_class(a, "annotation");
    gt_by_image[image_of(a, "annotation")].push_back(&a);
  }
  for (const auto& d : dets) {
    check_class(d, "detection");
    if (!d.score) throw DataError("evaluator: detection " + std::to_string(d.id) + " has no score");
    if (options.iou_type == IouType::segm && d.segmentation.empty()) {
      throw DataError("evaluator: detection " + std::to_string(d.id) + " has no segmentation (needed for segm)");
    }
    det_by_image[image_of(d, "detection")].push_back(&d);
  }

  parallel_for(m.images.size(), resolve_jobs(options.jobs), [&](std::size_t i) {
    ImageData& img = m.images[i];
    const ImageRecord& rec = *recs[i];
    const bool segm = options.iou_type == IouType::segm;
    auto mask_of = [&](const Annotation& a) {
      if (!segm) return Mask{};
      if (a.segmentation.empty()) {
        const BBox& b = a.bbox;
        return Mask::rasterize({{{b.x, b.y}, {b.right(), b.y}, {b.right(), b.bottom()}, {b.x, b.bottom()}}},
                               rec.width, rec.height);
      }
      return Mask::rasterize(a.segmentation, rec.width, rec.height);
    };
    auto& gts = gt_by_image[i];
    std::stable_sort(gts.begin(), gts.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (const Annotation* a : gts) {
      const bool crowd = a->extra.is_object() && a->extra.value("iscrowd", 0) == 1;
      img.gts.push_back({a->id, a->category_id, a->bbox, a->area, crowd, mask_of(*a)});
      img.cells[a->category_id].gt.push_back(static_cast<int>(img.gts.size() - 1));
    }
    auto& ds = det_by_image[i];
    std::stable_sort(ds.begin(), ds.end(), [](auto* a, auto* b) { return *a->score > *b->score; });
    std::map<int, int> per_class;
    for (const Annotation* d : ds) {
      if (++per_class[d->category_id] > options.max_dets) continue;
      Mask mk = mask_of(*d);
      const double area = segm ? static_cast<double>(mk.count()) : d->bbox.area();
      img.dets.push_back({d->id, d->category_id, d->bbox, area, *d->score, std::move(mk)});
      img.cells[d->category_id].det.push_back(static_cast<int>(img.dets.size() - 1));
    }
    for (auto& [cls, cell] : img.cells) {
      cell.iou.resize(cell.det.size() * cell.gt.size());
      for (std::size_t di = 0; di < cell.det.size(); ++di) {
        for (std::size_t k = 0; k < cell.gt.size(); ++k) {
          cell.iou[di * cell.gt.size() + k] = m.iou(img.gts[static_cast<std::size_t>(cell.gt[k])],
                                                    img.dets[static_cast<std::size_t>(cell.det[di])]);
        }
      }
    }
  });
}

Evaluator::~Evaluator() = default;
Evaluator::Evaluator(Evaluator&&) noexcept = default;
Evaluator& Evaluator::operator=(Evaluator&&) noexcept = default;

ApResult Evaluator::evaluate(int class_id) const {
  const Impl& m = *impl_;
  ApResult r;
  for (const auto& img : m.images) {
    const auto it = img.cells.find(class_id);
    if (it == img.cells.end()) continue;
    r.det_count += static_cast<std::int64_t>(it->second.det.size());
    for (int g : it->second.gt) r.gt_count += img.gts[static_cast<std::size_t>(g)].crowd ? 0 : 1;
  }
  const auto& thr = coco_iou_thresholds();
  std::array<std::optional<double>*, 4> targets{&r.ap, &r.ap_small, &r.ap_medium, &r.ap_large};
  for (std::size_t a = 0; a < kAreaRanges.size(); ++a) {
    double sum = 0.0;
    double rsum = 0.0;
    bool defined = false;
    for (std::size_t t = 0; t < thr.size(); ++t) {
      double recall = 0.0;
      const PrCurve c = m.sweep(class_id, thr[t], kAreaRanges[a], &recall);
      if (!c.ap) continue;
      defined = true;
      sum += *c.ap;
      rsum += recall;
      if (a == 0 && t == 0) r.ap50 = c.ap;
      if (a == 0 && t == 5) r.ap75 = c.ap;
    }
    if (defined) {
      *targets[a] = sum / static_cast<double>(thr.size());
      if (a == 0) r.ar100 = rsum / static_cast<double>(thr.size());
    }
  }
  return r;
}

PrCurve Evaluator::curve(int class_id, double iou_threshold) const {
  return impl_->sweep(class_id, iou_threshold, kAll);
}

DiagnosisLadder Evaluator::diagnose(int class_id) const {
  const Impl& m = *impl_;
  DiagnosisLadder l;
  auto at = [&](Rung r) -> PrCurve& { return l.curves[static_cast<std::size_t>(r)]; };
  at(Rung::c75) = m.sweep(class_id, 0.75, kAll);
  at(Rung::c50) = m.sweep(class_id, 0.50, kAll);
  at(Rung::loc) = m.sweep(class_id, 0.10, kAll);
  at(Rung::sim) = m.sweep(class_id, 0.10, kAll, [&](const ImageData& img, Outcome& o) {
    o.ignore = m.overlaps_other_class(img, img.dets[static_cast<std::size_t>(o.det)], class_id, true);
  });
  at(Rung::oth) = m.sweep(class_id, 0.10, kAll, [&](const ImageData& img, Outcome& o) {
    o.ignore = m.overlaps_other_class(img, img.dets[static_cast<std::size_t>(o.det)], class_id, false);
  });
  at(Rung::bg) = m.sweep(class_id, 0.10, kAll, [](const ImageData&, Outcome& o) { o.ignore = true; });
  PrCurve& fn = at(Rung::fn);
  if (at(Rung::c75).ap) {
    fn.precision.fill(1.0);
    fn.max_recall = 1.0;
    fn.ap = 1.0;
  }
  return l;
}

MatchResult Evaluator::matches(std::int64_t image_id, int class_id, double iou_threshold) const {
  const Impl& m = *impl_;
  MatchResult r;
  const auto ii = m.image_index.find(image_id);
  if (ii == m.image_index.end()) return r;
  const ImageData& img = m.images[ii->second];
  const auto it = img.cells.find(class_id);
  if (it == img.cells.end()) return r;
  std::vector<Outcome> out;
  m.match(img, it->second, iou_threshold, kAll, out);
  const Cell& cell = it->second;
  std::vector<char> taken(cell.gt.size(), 0);
  for (const Outcome& o : out) {
    const DetItem& d = img.dets[static_cast<std::size_t>(o.det)];
    DetectionMatch dm{d.id, std::nullopt, 0.0, d.score};
    if (o.gt > -1) {
      const auto k = static_cast<std::size_t>(o.gt);
      taken[k] = 1;
      dm.gt_id = img.gts[static_cast<std::size_t>(cell.gt[k])].id;
      dm.iou = cell.iou[static_cast<std::size_t>(&o - out.data()) * cell.gt.size() + k];
    }
    r.detections.push_back(dm);
  }
  for (std::size_t k = 0; k < cell.gt.size(); ++k) {
    if (!taken[k]) r.unmatched_gt.push_back(img.gts[static_cast<std::size_t>(cell.gt[k])].id);
  }
  return r;
}

ApResult coco_ap(const Dataset& gt, std::span<const Annotation> dets, int class_id, IouType iou_type,
                 const Taxonomy& taxonomy) {
  EvalOptions opt;
  opt.iou_type = iou_type;
  return Evaluator(gt, dets, taxonomy, opt).evaluate(class_id);
}

std::optional<double> mean_ap(std::span<const std::optional<double>> values) {
  if (values.empty()) throw DataError("mean_ap: empty class subset");
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

EvalReport evaluate_dataset(const Dataset& gt, std::span<const Annotation> dets, const Taxonomy& taxonomy,
                            const Treatment& treatment, const EvalOptions& options, bool with_ladder) {
  Dataset treated = gt;
  treated.annotations = apply_treatment(gt.annotations, treatment, taxonomy);
  const std::vector<Annotation> treated_dets = apply_treatment(dets, treatment, taxonomy);
  const Evaluator ev(treated, treated_dets, taxonomy, options);

  EvalReport rep;
  rep.iou_type = options.iou_type;
  rep.treatment = std::string(to_string(treatment.mode));
  rep.classes = effective_classes(treatment);
  rep.per_class.resize(rep.classes.size());
  if (with_ladder) rep.ladders.resize(rep.classes.size());
  parallel_for(rep.classes.size(), resolve_jobs(options.jobs), [&](std::size_t i) {
    rep.per_class[i] = ev.evaluate(rep.classes[i]);
    if (with_ladder) rep.ladders[i] = ev.diagnose(rep.classes[i]);
  });

  std::vector<std::optional<double>> all;
  std::vector<std::optional<double>> people;
  for (std::size_t i = 0; i < rep.classes.size(); ++i) {
    all.push_back(rep.per_class[i].ap);
    if (taxonomy.super_category(rep.classes[i]) == SuperCategory::people) people.push_back(rep.per_class[i].ap);
  }
  if (!all.empty()) rep.map_overall = mean_ap(all);
  if (!people.empty()) rep.map_people = mean_ap(people);
  if (with_ladder) {
    for (std::size_t r = 0; r < kRungs.size(); ++r) {
      std::vector<std::optional<double>> a;
      std::vector<std::optional<double>> p;
      for (std::size_t i = 0; i < rep.classes.size(); ++i) {
        a.push_back(rep.ladders[i].curves[r].ap);
        if (taxonomy.super_category(rep.classes[i]) == SuperCategory::people) p.push_back(rep.ladders[i].curves[r].ap);
      }
      if (!a.empty()) rep.ladder_overall[r] = mean_ap(a);
      if (!p.empty()) rep.ladder_people[r] = mean_ap(p);
    }
  }
  return rep;
}

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string opt_csv(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }

nlohmann::ordered_json ladder_json(const std::array<std::optional<double>, 7>& aps) {
  nlohmann::ordered_json j;
  for (Rung r : kRungs) j[std::string(to_string(r))] = opt_json(aps[static_cast<std::size_t>(r)]);
  return j;
}

}  // namespace

std::string report_json(const EvalReport& rep, const Taxonomy& taxonomy) {
  nlohmann::ordered_json j;
  j["iou_type"] = std::string(to_string(rep.iou_type));
  j["treatment"] = rep.treatment;
  j["per_class"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < rep.classes.size(); ++i) {
    const ApResult& r = rep.per_class[i];
    nlohmann::ordered_json c;
    c["ap"] = opt_json(r.ap);
    c["ap50"] = opt_json(r.ap50);
    c["ap75"] = opt_json(r.ap75);
    c["ap_s"] = opt_json(r.ap_small);
    c["ap_m"] = opt_json(r.ap_medium);
    c["ap_l"] = opt_json(r.ap_large);
    c["ar100"] = opt_json(r.ar100);
    c["n_gt"] = r.gt_count;
    c["n_det"] = r.det_count;
    j["per_class"][taxonomy.at(rep.classes[i]).name] = c;
  }
  j["map_people"] = opt_json(rep.map_people);
  j["map_overall"] = opt_json(rep.map_overall);
  if (!rep.ladders.empty()) {
    nlohmann::ordered_json l;
    l["overall"] = ladder_json(rep.ladder_overall);
    l["people"] = ladder_json(rep.ladder_people);
    l["per_class"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < rep.classes.size(); ++i) {
      std::array<std::optional<double>, 7> aps;
      for (std::size_t r = 0; r < aps.size(); ++r) aps[r] = rep.ladders[i].curves[r].ap;
      l["per_class"][taxonomy.at(rep.classes[i]).name] = ladder_json(aps);
    }
    j["ladder"] = l;
  }
  return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& rep, const Taxonomy& taxonomy) {
  std::string out = "class,ap,ap50,ap75,ap_s,ap_m,ap_l,ar100,n_gt,n_det\n";
  for (std::size_t i = 0; i < rep.classes.size(); ++i) {
    const ApResult& r = rep.per_class[i];
    out += taxonomy.at(rep.classes[i]).name;
    for (const auto* v : {&r.ap, &r.ap50, &r.ap75, &r.ap_small, &r.ap_medium, &r.ap_large, &r.ar100}) {
      out += ',' + opt_csv(*v);
    }
    out += ',' + std::to_string(r.gt_count) + ',' + std::to_string(r.det_count) + '\n';
  }
  out += "map_people," + opt_csv(rep.map_people) + ",,,,,,,,\n";
  out += "map_overall," + opt_csv(rep.map_overall) + ",,,,,,,,\n";
  return out;
}

std::string pr_curves_csv(const EvalReport& rep, const Taxonomy& taxonomy) {
  std::string out = "class,curve,recall,precision\n";
  auto emit = [&](const std::string& name, std::string_view curve, const PrCurve& c) {
    if (!c.ap) return;
    for (int i = 0; i < kRecallPoints; ++i) {
      out += name + ',' + std::string(curve) + ',' + csv::format_double(recall_threshold(i)) + ',' +
             csv::format_double(c.precision[static_cast<std::size_t>(i)]) + '\n';
    }
  };
  for (std::size_t i = 0; i < rep.ladders.size(); ++i) {
    for (Rung r : kRungs) emit(taxonomy.at(rep.classes[i]).name, to_string(r), rep.ladders[i].curves[static_cast<std::size_t>(r)]);
  }
  return out;
}

// ---------------------------------------------------------------------------

DatasetStats dataset_stats(const Dataset& dataset, const Taxonomy& taxonomy) {
  DatasetStats s;
  s.images = static_cast<std::int64_t>(dataset.images.size());
  std::map<int, std::vector<std::pair<double, double>>> samples;
  std::unordered_map<std::int64_t, const ImageRecord*> images;
  for (const auto& im : dataset.images) images[im.id] = &im;
  for (const auto& a : dataset.annotations) {
    if (!taxonomy.contains(a.category_id)) {
      throw DataError("dataset_stats: annotation " + std::to_string(a.id) + " has unknown class " +
                      std::to_string(a.category_id));
    }
    const double area = a.segmentation.empty() ? a.bbox.area() : polygon_area(a.segmentation);
    const double aspect = a.bbox.w > 0.0 ? a.bbox.h / a.bbox.w : 0.0;
    samples[a.category_id].push_back({area, aspect});
    ++s.annotations;
    if (area < 32.0 * 32.0) ++s.small;
    const auto it = images.find(a.image_id);
    if (it == images.end() || !it->second->extra.is_object()) continue;
    const auto& extra = it->second->extra;
    if (extra.contains("weather") && extra["weather"].is_string()) ++s.weather[extra["weather"].get<std::string>()];
    if (extra.contains("evening") && extra["evening"].is_boolean() && extra["evening"].get<bool>()) ++s.evening;
  }
  for (const auto& c : taxonomy.classes()) {
    ClassStats cs;
    cs.class_id = c.id;
    const auto it = samples.find(c.id);
    if (it != samples.end()) {
      const auto& v = it->second;
      const double n = static_cast<double>(v.size());
      cs.count = static_cast<std::int64_t>(v.size());
      for (const auto& [area, aspect] : v) {
        cs.area_mean += area;
        cs.aspect_mean += aspect;
        if (area < 32.0 * 32.0) ++cs.small;
      }
      cs.area_mean /= n;
      cs.aspect_mean /= n;
      for (const auto& [area, aspect] : v) {
        cs.area_std += (area - cs.area_mean) * (area - cs.area_mean);
        cs.aspect_std += (aspect - cs.aspect_mean) * (aspect - cs.aspect_mean);
      }
      cs.area_std = std::sqrt(cs.area_std / n);
      cs.aspect_std = std::sqrt(cs.aspect_std / n);
    }
    s.per_class.push_back(cs);
  }
  return s;
}

std::string stats_json(const DatasetStats& s, const Taxonomy& taxonomy) {
  nlohmann::ordered_json j;
  j["images"] = s.images;
  j["annotations"] = s.annotations;
  j["small"] = s.small;
  j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : s.per_class) {
    const ClassDef& def = taxonomy.at(c.class_id);
    j["per_class"].push_back({{"class", def.name},
                              {"super_category", std::string(to_string(def.super_category))},
                              {"count", c.count},
                              {"area_mean", c.area_mean},
                              {"area_std", c.area_std},
                              {"aspect_mean", c.aspect_mean},
                              {"aspect_std", c.aspect_std},
                              {"small", c.small}});
  }
  if (!s.weather.empty() || s.evening > 0) {
    j["conditions"] = {{"weather", s.weather}, {"evening", s.evening}};
  }
  return j.dump(2) + "\n";
}

std::string stats_csv(const DatasetStats& s, const Taxonomy& taxonomy) {
  std::string out = "class,super_category,count,area_mean,area_std,aspect_mean,aspect_std,small\n";
  for (const auto& c : s.per_class) {
    const ClassDef& def = taxonomy.at(c.class_id);
    out += def.name + ',' + std::string(to_string(def.super_category)) + ',' + std::to_string(c.count) + ',' +
           csv::format_double(c.area_mean) + ',' + csv::format_double(c.area_std) + ',' +
           csv::format_double(c.aspect_mean) + ',' + csv::format_double(c.aspect_std) + ',' +
           std::to_string(c.small) + '\n';
  }
  return out;
}

}  // namespace possense
