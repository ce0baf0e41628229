#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "srpose/backend.hpp"
#include "srpose/coco.hpp"
#include "srpose/error.hpp"
#include "srpose/image.hpp"

namespace srpose {

inline constexpr double kDefaultAreaThreshold = 3500.0;

enum class Branch { kSuperResolved, kOriginal };
std::string to_string(Branch branch);

struct RouterConfig {
  int upscale_ratio = 4;
  // Person area threshold in original-image px^2; inclusive for the SR
  // branch. +infinity sends everyone through SR, 0 (almost) no one.
  double area_threshold = kDefaultAreaThreshold;
  unsigned workers = 1;
  // A run with more failed images than this fraction is aborted.
  double max_failure_fraction = 0.10;

  void validate() const;
};

struct RouteDecision {
  std::int64_t image_id = 0;
  std::size_t detection_index = 0;
  double score = 0.0;
  double detected_area = 0.0;  // on the super-resolved image
  double initial_area = 0.0;   // detected_area / ratio^2
  bool area_from_mask = true;  // false: fell back to the box area
  double threshold = kDefaultAreaThreshold;
  Branch branch = Branch::kSuperResolved;
  BBox bbox;  // in the chosen branch image's coordinates

  bool operator==(const RouteDecision&) const = default;
};

// Routes detections made on the super-resolved image. Detections without a
// mask area fall back to the box area and are listed in `warnings`.
std::vector<RouteDecision> route(std::span<const DetectionRecord> detections,
                                 const RouterConfig& config,
                                 std::vector<std::string>* warnings = nullptr);

// Lazily loaded pipeline input so large image sets are never all resident.
struct PipelineInput {
  std::int64_t image_id = 0;
  std::function<RasterImage()> load;

  static PipelineInput from_memory(std::int64_t id, RasterImage image);
  static PipelineInput from_file(std::int64_t id, std::filesystem::path path);
};

struct PipelineFailure {
  std::int64_t image_id = 0;
  std::string message;
};

struct PipelineResult {
  // Keypoints in the original (input) image frame, ascending image id.
  std::vector<KeypointRecord> keypoints;
  std::vector<RouteDecision> decisions;
  std::vector<PipelineFailure> failures;
  std::vector<std::string> warnings;
};

class PipelineAborted : public BackendError {
 public:
  PipelineAborted(const std::string& what, std::vector<PipelineFailure> failures)
      : BackendError(what), failures_(std::move(failures)) {}
  const std::vector<PipelineFailure>& failures() const { return failures_; }

 private:
  std::vector<PipelineFailure> failures_;
};

struct Backends {
  SuperResolver* super_resolver = nullptr;  // null: built-in bicubic
  PersonDetector* detector = nullptr;
  KeypointEstimator* keypoints = nullptr;
};

// Threshold-routed top-down pipeline: super-resolve, detect on the SR
// image, then estimate each person's keypoints on the SR image (small
// people) or on the original image with the box divided by the ratio
// (everyone else).
PipelineResult run_pipeline(std::span<const PipelineInput> images, const RouterConfig& config,
                            const Backends& backends);

// Plain top-down pipeline on the inputs as given (no super-resolution).
PipelineResult run_direct_pipeline(std::span<const PipelineInput> images,
                                   const RouterConfig& config, const Backends& backends);

// Keypoints for every non-crowd ground-truth person using its annotated box.
// `images` are at `scale` times the dataset's resolution (1 for the dataset's
// own images); boxes are scaled up on the way in and keypoints back down on
// the way out. The estimator is called once per image with all its boxes.
PipelineResult run_gtbox_eval(const Dataset& dataset, std::span<const PipelineInput> images,
                              double scale, KeypointEstimator& estimator,
                              const RouterConfig& config);

std::string decision_to_json(const RouteDecision& decision);
std::string decisions_to_jsonl(std::span<const RouteDecision> decisions);
std::vector<RouteDecision> decisions_from_jsonl(const std::string& text);

}  // namespace srpose
