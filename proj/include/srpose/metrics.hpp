#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "srpose/coco.hpp"

namespace srpose {

// Value reported for a cell that has no ground truth to score against.
inline constexpr double kNoData = -1.0;

enum class EvalMode { kDetection, kKeypoints };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& name);

// Half-open [min, max) range of areas in px^2.
struct AreaRange {
  std::string label;
  double min = 0.0;
  double max = std::numeric_limits<double>::infinity();

  bool contains(double area) const { return area >= min && area < max; }
};

using Falloff = std::array<double, kNumKeypoints>;

// Published COCO per-keypoint sigmas; the falloff constant is k = 2 * sigma.
inline constexpr std::array<double, kNumKeypoints> kCocoKeypointSigmas = {
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072,
    0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089};

Falloff coco_falloff();
std::vector<double> default_thresholds();
std::vector<AreaRange> coco_area_ranges();

struct EvalConfig {
  std::vector<double> thresholds = default_thresholds();
  std::vector<AreaRange> area_ranges = coco_area_ranges();
  Falloff falloff = coco_falloff();
  int max_detections = 20;
  EvalMode mode = EvalMode::kKeypoints;

  // Throws std::invalid_argument on a malformed grid, non-positive falloff
  // or overlapping ranges.
  void validate() const;
};

// Object keypoint similarity against one ground-truth person, using the
// segmentation area as the squared object scale. Throws
// std::domain_error when the ground truth has no visible keypoint.
double oks(const PredKeypoints& prediction, const PersonAnnotation& gt,
           const Falloff& falloff);

double iou(const BBox& a, const BBox& b);
// Overlap with a crowd region: intersection over the prediction's own area.
double crowd_overlap(const BBox& prediction, const BBox& crowd);

struct MatchEntry {
  std::size_t prediction = 0;  // index into the image's prediction list
  std::optional<std::int64_t> gt_id;
  double score = 0.0;
  double similarity = 0.0;
  // Absorbed by an ignore/crowd ground truth, or outside the prediction
  // area range; counts as neither true nor false positive.
  bool ignored = false;

  bool true_positive() const { return gt_id.has_value() && !ignored; }
  bool operator==(const MatchEntry&) const = default;
};

struct ImageMatches {
  std::int64_t image_id = 0;
  std::vector<std::int64_t> gt_ids;  // ascending
  std::vector<bool> gt_ignored;
  // per_threshold[t] lists the retained predictions by descending score.
  std::vector<std::vector<MatchEntry>> per_threshold;

  std::size_t counted_gts() const;
};

struct MatchTable {
  std::vector<double> thresholds;
  std::vector<ImageMatches> images;  // ascending image id
};

// Ground truth as seen by the matcher.
struct GtCandidate {
  std::int64_t id = 0;
  bool crowd = false;
  bool ignore = false;
};

struct PredCandidate {
  double score = 0.0;
  double area = 0.0;
};

// Greedy COCO-style matching for one image. `similarity` is row-major
// predictions x gts (in the order given). Predictions are ranked by
// descending score (stable) and truncated to max_detections; each claims the
// unmatched counted ground truth of highest similarity >= threshold, ties to
// the lowest id. Failing that it may be absorbed by an ignore ground truth
// (crowds absorb any number). Unmatched predictions whose area falls outside
// `prediction_range` are ignored.
ImageMatches match_image(std::int64_t image_id, std::span<const PredCandidate> predictions,
                         std::span<const GtCandidate> gts,
                         std::span<const double> similarity, const EvalConfig& config,
                         const std::optional<AreaRange>& prediction_range = std::nullopt);

struct ApAr {
  double ap = kNoData;
  double ar = kNoData;
};

// 101-point interpolated AP and max-recall AR, averaged over thresholds.
ApAr average_precision(const MatchTable& table);

// Fraction of counted ground truths matched at `threshold` (must be on the
// table's grid); kNoData when there are none.
double detection_rate(const MatchTable& table, double threshold = 0.5);

// Which ground truths count toward a score; everyone else becomes ignore.
struct GtSelector {
  std::string label = "all";
  std::function<bool(const PersonAnnotation&)> counts;  // empty: everyone
  std::optional<AreaRange> prediction_range;
};

// Similarities between one result set and a dataset, computed once and
// re-matched under different selectors.
class Evaluation {
 public:
  static Evaluation detections(const Dataset& dataset,
                               std::span<const DetectionRecord> predictions,
                               const EvalConfig& config);
  static Evaluation keypoints(const Dataset& dataset,
                              std::span<const KeypointRecord> predictions,
                              const EvalConfig& config);

  MatchTable match(const GtSelector& selector = {}) const;
  const EvalConfig& config() const { return config_; }
  const Dataset& dataset() const { return *dataset_; }
  std::size_t num_predictions() const { return num_predictions_; }

 private:
  struct ImageData {
    std::int64_t image_id = 0;
    std::vector<const PersonAnnotation*> gts;  // ascending id
    std::vector<PredCandidate> preds;
    std::vector<double> similarity;
  };
  Evaluation(const Dataset& dataset, const EvalConfig& config)
      : dataset_(&dataset), config_(config) {}

  const Dataset* dataset_;
  EvalConfig config_;
  std::vector<ImageData> images_;
  std::size_t num_predictions_ = 0;
};

struct GroupScore {
  std::string label;
  double ap = kNoData;
  double ar = kNoData;
  std::size_t num_gts = 0;
};

struct MetricReport {
  EvalMode mode = EvalMode::kKeypoints;
  double ap = kNoData;
  double ar = kNoData;
  std::vector<GroupScore> ranges;
  std::vector<GroupScore> subgroups;
  std::size_t num_gts = 0;
  std::size_t num_predictions = 0;

  const GroupScore* range(const std::string& label) const;
};

// Annotation id -> area-range label, fixed on a reference dataset.
using SizeLabels = std::unordered_map<std::int64_t, std::string>;

// Overall and per-area-range scores. With `pinned` given, range membership
// comes from the pinned labels instead of each annotation's own area.
MetricReport evaluate(const Evaluation& evaluation, const SizeLabels* pinned = nullptr);

}  // namespace srpose
