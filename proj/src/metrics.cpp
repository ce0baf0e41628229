#include "srpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace srpose {

std::string to_string(EvalMode mode) {
  return mode == EvalMode::kDetection ? "detection" : "keypoints";
}

EvalMode eval_mode_from_string(const std::string& name) {
  if (name == "detection" || name == "bbox") return EvalMode::kDetection;
  if (name == "keypoints" || name == "keypoint") return EvalMode::kKeypoints;
  throw std::invalid_argument("unknown evaluation mode '" + name + "'");
}

Falloff coco_falloff() {
  Falloff k{};
  for (std::size_t i = 0; i < kNumKeypoints; ++i) k[i] = 2.0 * kCocoKeypointSigmas[i];
  return k;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.50 + 0.05 * i);
  return t;
}

std::vector<AreaRange> coco_area_ranges() {
  return {{"small", 1.0, 32.0 * 32.0},
          {"medium", 32.0 * 32.0, 96.0 * 96.0},
          {"large", 96.0 * 96.0, std::numeric_limits<double>::infinity()}};
}

void EvalConfig::validate() const {
  if (thresholds.empty()) throw std::invalid_argument("empty threshold grid");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0)) {
      throw std::invalid_argument("thresholds must lie in (0, 1]");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw std::invalid_argument("thresholds must be strictly increasing");
    }
  }
  for (const double k : falloff) {
    if (!(k > 0.0)) throw std::invalid_argument("falloff constants must be positive");
  }
  if (max_detections < 1) throw std::invalid_argument("max_detections must be >= 1");
  std::vector<AreaRange> sorted = area_ranges;
  std::sort(sorted.begin(), sorted.end(),
            [](const AreaRange& a, const AreaRange& b) { return a.min < b.min; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i].min < sorted[i].max)) {
      throw std::invalid_argument("empty area range '" + sorted[i].label + "'");
    }
    if (i > 0 && sorted[i].min < sorted[i - 1].max) {
      throw std::invalid_argument("area ranges '" + sorted[i - 1].label + "' and '" +
                                  sorted[i].label + "' overlap");
    }
  }
}

double oks(const PredKeypoints& prediction, const PersonAnnotation& gt,
           const Falloff& falloff) {
  const double scale2 =
      gt.area > 0.0 ? gt.area : std::numeric_limits<double>::epsilon();
  double sum = 0.0;
  int visible = 0;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (gt.keypoints[i].visibility <= 0) continue;
    const double dx = prediction[i].x - gt.keypoints[i].x;
    const double dy = prediction[i].y - gt.keypoints[i].y;
    const double k = falloff[i];
    sum += std::exp(-(dx * dx + dy * dy) / (2.0 * scale2 * k * k));
    ++visible;
  }
  if (visible == 0) {
    throw std::domain_error("OKS undefined: annotation " + std::to_string(gt.id) +
                            " has no visible keypoints");
  }
  return sum / visible;
}

namespace {

double intersection(const BBox& a, const BBox& b) {
  const double w = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double h = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  const double inter = intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double crowd_overlap(const BBox& prediction, const BBox& crowd) {
  const double area = prediction.area();
  return area > 0.0 ? intersection(prediction, crowd) / area : 0.0;
}

std::size_t ImageMatches::counted_gts() const {
  return static_cast<std::size_t>(std::count(gt_ignored.begin(), gt_ignored.end(), false));
}

ImageMatches match_image(std::int64_t image_id, std::span<const PredCandidate> predictions,
                         std::span<const GtCandidate> gts,
                         std::span<const double> similarity, const EvalConfig& config,
                         const std::optional<AreaRange>& prediction_range) {
  const std::size_t np = predictions.size();
  const std::size_t ng = gts.size();
  if (similarity.size() != np * ng) {
    throw std::invalid_argument("similarity matrix does not match input sizes");
  }

  std::vector<std::size_t> gt_order(ng);
  std::iota(gt_order.begin(), gt_order.end(), 0);
  std::stable_sort(gt_order.begin(), gt_order.end(),
                   [&](std::size_t a, std::size_t b) { return gts[a].id < gts[b].id; });

  std::vector<std::size_t> pred_order(np);
  std::iota(pred_order.begin(), pred_order.end(), 0);
  std::stable_sort(pred_order.begin(), pred_order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].score > predictions[b].score;
  });
  if (pred_order.size() > static_cast<std::size_t>(config.max_detections)) {
    pred_order.resize(static_cast<std::size_t>(config.max_detections));
  }

  ImageMatches out;
  out.image_id = image_id;
  for (const std::size_t g : gt_order) {
    out.gt_ids.push_back(gts[g].id);
    out.gt_ignored.push_back(gts[g].ignore);
  }

  std::vector<bool> taken(ng);
  out.per_threshold.resize(config.thresholds.size());
  for (std::size_t t = 0; t < config.thresholds.size(); ++t) {
    const double threshold = config.thresholds[t];
    std::fill(taken.begin(), taken.end(), false);
    auto& entries = out.per_threshold[t];
    entries.reserve(pred_order.size());
    for (const std::size_t p : pred_order) {
      const double* row = similarity.data() + p * ng;
      // Best unmatched counted gt; strict '>' keeps the lowest id on ties.
      auto best_among = [&](bool want_ignored) {
        std::ptrdiff_t best = -1;
        for (const std::size_t g : gt_order) {
          if (gts[g].ignore != want_ignored) continue;
          if (taken[g] && !(want_ignored && gts[g].crowd)) continue;
          if (row[g] < threshold) continue;
          if (best < 0 || row[g] > row[best]) best = static_cast<std::ptrdiff_t>(g);
        }
        return best;
      };
      std::ptrdiff_t g = best_among(false);
      if (g < 0) g = best_among(true);

      MatchEntry e;
      e.prediction = p;
      e.score = predictions[p].score;
      if (g >= 0) {
        const auto gi = static_cast<std::size_t>(g);
        e.gt_id = gts[gi].id;
        e.similarity = row[gi];
        e.ignored = gts[gi].ignore;
        if (!gts[gi].crowd) taken[gi] = true;
      } else if (prediction_range && !prediction_range->contains(predictions[p].area)) {
        e.ignored = true;
      }
      entries.push_back(e);
    }
  }
  return out;
}

namespace {

// Recall sample points 0, 0.01, ..., 1 built the way numpy.linspace does.
const std::array<double, 101>& recall_points() {
  static const std::array<double, 101> points = [] {
    std::array<double, 101> p{};
    const double step = 1.0 / 100.0;
    for (int i = 0; i < 100; ++i) p[static_cast<std::size_t>(i)] = i * step;
    p[100] = 1.0;
    return p;
  }();
  return points;
}

}  // namespace

ApAr average_precision(const MatchTable& table) {
  std::size_t counted = 0;
  for (const auto& im : table.images) counted += im.counted_gts();
  if (counted == 0) return {};

  const auto& recall_grid = recall_points();
  double ap_sum = 0.0;
  double ar_sum = 0.0;
  std::vector<std::pair<double, bool>> ranked;
  std::vector<double> precision;
  std::vector<double> recall;
  for (std::size_t t = 0; t < table.thresholds.size(); ++t) {
    ranked.clear();
    for (const auto& im : table.images) {
      for (const auto& e : im.per_threshold[t]) {
        if (!e.ignored) ranked.emplace_back(e.score, e.true_positive());
      }
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    precision.resize(ranked.size());
    recall.resize(ranked.size());
    double tp = 0.0;
    double fp = 0.0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      (ranked[i].second ? tp : fp) += 1.0;
      recall[i] = tp / static_cast<double>(counted);
      precision[i] = tp / (tp + fp);
    }
    for (std::size_t i = ranked.size(); i-- > 1;) {
      precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }
    double sampled = 0.0;
    for (const double r : recall_grid) {
      const auto it = std::lower_bound(recall.begin(), recall.end(), r);
      if (it != recall.end()) sampled += precision[static_cast<std::size_t>(it - recall.begin())];
    }
    ap_sum += sampled / static_cast<double>(recall_grid.size());
    ar_sum += recall.empty() ? 0.0 : recall.back();
  }
  const double n = static_cast<double>(table.thresholds.size());
  return {ap_sum / n, ar_sum / n};
}

double detection_rate(const MatchTable& table, double threshold) {
  std::size_t t = table.thresholds.size();
  for (std::size_t i = 0; i < table.thresholds.size(); ++i) {
    if (std::abs(table.thresholds[i] - threshold) < 1e-9) t = i;
  }
  if (t == table.thresholds.size()) {
    throw std::invalid_argument("threshold " + std::to_string(threshold) +
                                " is not on the evaluation grid");
  }
  std::size_t counted = 0;
  std::size_t matched = 0;
  for (const auto& im : table.images) {
    counted += im.counted_gts();
    for (const auto& e : im.per_threshold[t]) matched += e.true_positive() ? 1 : 0;
  }
  return counted == 0 ? kNoData : static_cast<double>(matched) / static_cast<double>(counted);
}

namespace {

// Prediction indices per dataset image, ascending image id. Predictions on
// images outside the dataset are dropped.
template <typename Record>
std::vector<std::pair<std::int64_t, std::vector<std::size_t>>> group_by_image(
    const Dataset& dataset, std::span<const Record> predictions) {
  std::unordered_map<std::int64_t, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    by_image[predictions[i].image_id].push_back(i);
  }
  std::vector<std::pair<std::int64_t, std::vector<std::size_t>>> out;
  for (const auto& im : dataset.images()) {
    auto it = by_image.find(im.id);
    out.emplace_back(im.id, it == by_image.end() ? std::vector<std::size_t>{}
                                                 : std::move(it->second));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::vector<const PersonAnnotation*> sorted_gts(const Dataset& dataset, std::int64_t image_id) {
  auto gts = dataset.annotations_for(image_id);
  std::stable_sort(gts.begin(), gts.end(),
                   [](const auto* a, const auto* b) { return a->id < b->id; });
  return gts;
}

bool base_ignore(const PersonAnnotation& gt, EvalMode mode) {
  return gt.iscrowd || (mode == EvalMode::kKeypoints && gt.num_visible() == 0);
}

}  // namespace

Evaluation Evaluation::detections(const Dataset& dataset,
                                  std::span<const DetectionRecord> predictions,
                                  const EvalConfig& config) {
  config.validate();
  Evaluation ev(dataset, config);
  ev.config_.mode = EvalMode::kDetection;
  ev.num_predictions_ = predictions.size();
  for (auto& [image_id, idx] : group_by_image(dataset, predictions)) {
    ImageData data;
    data.image_id = image_id;
    data.gts = sorted_gts(dataset, image_id);
    for (const std::size_t i : idx) {
      const auto& d = predictions[i];
      data.preds.push_back({d.score, d.bbox.area()});
      for (const auto* gt : data.gts) {
        data.similarity.push_back(gt->iscrowd ? crowd_overlap(d.bbox, gt->bbox)
                                              : iou(d.bbox, gt->bbox));
      }
    }
    ev.images_.push_back(std::move(data));
  }
  return ev;
}

Evaluation Evaluation::keypoints(const Dataset& dataset,
                                 std::span<const KeypointRecord> predictions,
                                 const EvalConfig& config) {
  config.validate();
  Evaluation ev(dataset, config);
  ev.config_.mode = EvalMode::kKeypoints;
  ev.num_predictions_ = predictions.size();
  for (auto& [image_id, idx] : group_by_image(dataset, predictions)) {
    ImageData data;
    data.image_id = image_id;
    data.gts = sorted_gts(dataset, image_id);
    for (const std::size_t i : idx) {
      const auto& r = predictions[i];
      data.preds.push_back({r.score, r.extent_area()});
      for (const auto* gt : data.gts) {
        // Ground truths without visible keypoints are always ignore regions
        // in keypoint mode; they get zero similarity.
        data.similarity.push_back(gt->num_visible() > 0
                                      ? oks(r.keypoints, *gt, ev.config_.falloff)
                                      : 0.0);
      }
    }
    ev.images_.push_back(std::move(data));
  }
  return ev;
}

MatchTable Evaluation::match(const GtSelector& selector) const {
  MatchTable table;
  table.thresholds = config_.thresholds;
  table.images.reserve(images_.size());
  std::vector<GtCandidate> candidates;
  for (const auto& im : images_) {
    candidates.clear();
    for (const auto* gt : im.gts) {
      const bool counted = !selector.counts || selector.counts(*gt);
      candidates.push_back({gt->id, gt->iscrowd, base_ignore(*gt, config_.mode) || !counted});
    }
    table.images.push_back(match_image(im.image_id, im.preds, candidates, im.similarity,
                                       config_, selector.prediction_range));
  }
  return table;
}

const GroupScore* MetricReport::range(const std::string& label) const {
  for (const auto& r : ranges) {
    if (r.label == label) return &r;
  }
  return nullptr;
}

MetricReport evaluate(const Evaluation& evaluation, const SizeLabels* pinned) {
  MetricReport report;
  report.mode = evaluation.config().mode;
  report.num_predictions = evaluation.num_predictions();

  const MatchTable overall = evaluation.match();
  const ApAr all = average_precision(overall);
  report.ap = all.ap;
  report.ar = all.ar;
  for (const auto& im : overall.images) report.num_gts += im.counted_gts();

  for (const AreaRange& range : evaluation.config().area_ranges) {
    GtSelector sel;
    sel.label = range.label;
    sel.prediction_range = range;
    if (pinned != nullptr) {
      sel.counts = [pinned, label = range.label](const PersonAnnotation& gt) {
        const auto it = pinned->find(gt.id);
        return it != pinned->end() && it->second == label;
      };
    } else {
      sel.counts = [range](const PersonAnnotation& gt) { return range.contains(gt.area); };
    }
    const MatchTable table = evaluation.match(sel);
    const ApAr score = average_precision(table);
    std::size_t n = 0;
    for (const auto& im : table.images) n += im.counted_gts();
    report.ranges.push_back({range.label, score.ap, score.ar, n});
  }
  return report;
}

}  // namespace srpose
