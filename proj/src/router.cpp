#include "srpose/router.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "srpose/parallel.hpp"
#include "srpose/resample.hpp"

namespace srpose {

std::string to_string(Branch branch) {
  return branch == Branch::kSuperResolved ? "sr" : "original";
}

void RouterConfig::validate() const {
  if (upscale_ratio < 1) throw std::invalid_argument("upscale ratio must be >= 1");
  if (std::isnan(area_threshold) || area_threshold < 0.0) {
    throw std::invalid_argument("area threshold must be >= 0");
  }
  if (!(max_failure_fraction >= 0.0)) {
    throw std::invalid_argument("max failure fraction must be >= 0");
  }
}

std::vector<RouteDecision> route(std::span<const DetectionRecord> detections,
                                 const RouterConfig& config, std::vector<std::string>* warnings) {
  config.validate();
  const double r = config.upscale_ratio;
  const double r2 = r * r;
  std::vector<RouteDecision> out;
  out.reserve(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const DetectionRecord& d = detections[i];
    RouteDecision dec;
    dec.image_id = d.image_id;
    dec.detection_index = i;
    dec.score = d.score;
    dec.area_from_mask = d.area.has_value();
    dec.detected_area = d.area.value_or(d.bbox.area());
    if (!d.area && warnings != nullptr) {
      warnings->push_back("image " + std::to_string(d.image_id) + " detection " +
                          std::to_string(i) + ": no mask area, using box area");
    }
    dec.initial_area = dec.detected_area / r2;
    dec.threshold = config.area_threshold;
    dec.branch = dec.initial_area <= config.area_threshold ? Branch::kSuperResolved
                                                            : Branch::kOriginal;
    dec.bbox = dec.branch == Branch::kSuperResolved
                   ? d.bbox
                   : BBox{d.bbox.x / r, d.bbox.y / r, d.bbox.w / r, d.bbox.h / r};
    out.push_back(dec);
  }
  return out;
}

PipelineInput PipelineInput::from_memory(std::int64_t id, RasterImage image) {
  return {id, [img = std::move(image)] { return img; }};
}

PipelineInput PipelineInput::from_file(std::int64_t id, std::filesystem::path path) {
  return {id, [p = std::move(path)] { return read_image(p); }};
}

namespace {

struct ImageOutcome {
  std::vector<KeypointRecord> keypoints;
  std::vector<RouteDecision> decisions;
  std::vector<std::string> warnings;
  std::string error;
  bool failed = false;
};

KeypointRecord to_original_frame(KeypointRecord rec, double r) {
  for (auto& k : rec.keypoints) {
    k.x /= r;
    k.y /= r;
  }
  return rec;
}

std::vector<KeypointRecord> estimate_checked(KeypointEstimator& est, const RasterImage& image,
                                             std::int64_t image_id,
                                             std::span<const BBox> boxes) {
  if (boxes.empty()) return {};
  auto recs = est.estimate(image, image_id, boxes);
  if (recs.size() != boxes.size()) {
    throw BackendError(est.id() + " returned " + std::to_string(recs.size()) +
                       " keypoint sets for " + std::to_string(boxes.size()) + " boxes");
  }
  for (auto& r : recs) r.image_id = image_id;
  return recs;
}

// Runs `process` over every input and merges outcomes in ascending image id.
template <typename Process>
PipelineResult run_images(std::span<const PipelineInput> images, const RouterConfig& config,
                          Process&& process) {
  config.validate();
  std::vector<ImageOutcome> outcomes(images.size());
  parallel_for(images.size(), config.workers, [&](std::size_t i) {
    try {
      process(images[i], outcomes[i]);
    } catch (const std::exception& e) {
      outcomes[i] = ImageOutcome{};
      outcomes[i].failed = true;
      outcomes[i].error = e.what();
    }
  });

  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return images[a].image_id < images[b].image_id;
  });

  PipelineResult result;
  for (const std::size_t i : order) {
    ImageOutcome& o = outcomes[i];
    if (o.failed) {
      result.failures.push_back({images[i].image_id, o.error});
      continue;
    }
    std::move(o.keypoints.begin(), o.keypoints.end(), std::back_inserter(result.keypoints));
    std::move(o.decisions.begin(), o.decisions.end(), std::back_inserter(result.decisions));
    std::move(o.warnings.begin(), o.warnings.end(), std::back_inserter(result.warnings));
  }
  const double allowed = config.max_failure_fraction * static_cast<double>(images.size());
  if (static_cast<double>(result.failures.size()) > allowed) {
    throw PipelineAborted(std::to_string(result.failures.size()) + " of " +
                              std::to_string(images.size()) +
                              " images failed; aborting run (first: " +
                              result.failures.front().message + ")",
                          result.failures);
  }
  return result;
}

void require(const Backends& b, bool need_detector) {
  if (b.keypoints == nullptr) throw std::invalid_argument("no keypoint backend configured");
  if (need_detector && b.detector == nullptr) {
    throw std::invalid_argument("no detector backend configured");
  }
}

}  // namespace

PipelineResult run_pipeline(std::span<const PipelineInput> images, const RouterConfig& config,
                            const Backends& backends) {
  require(backends, true);
  BicubicUpscaler builtin;
  SuperResolver& sr = backends.super_resolver ? *backends.super_resolver : builtin;
  const int r = config.upscale_ratio;

  return run_images(images, config, [&](const PipelineInput& in, ImageOutcome& out) {
    const RasterImage original = in.load();
    const RasterImage upscaled = sr.upscale(original, r, in.image_id);
    if (upscaled.width != original.width * r || upscaled.height != original.height * r) {
      throw BackendError(sr.id() + " produced " + std::to_string(upscaled.width) + "x" +
                         std::to_string(upscaled.height) + " for a x" + std::to_string(r) +
                         " upscale of " + std::to_string(original.width) + "x" +
                         std::to_string(original.height));
    }
    auto detections = backends.detector->detect(upscaled, in.image_id);
    for (auto& d : detections) d.image_id = in.image_id;
    out.decisions = route(detections, config, &out.warnings);

    std::vector<BBox> sr_boxes;
    std::vector<BBox> original_boxes;
    for (const auto& dec : out.decisions) {
      (dec.branch == Branch::kSuperResolved ? sr_boxes : original_boxes).push_back(dec.bbox);
    }
    const auto sr_kps = estimate_checked(*backends.keypoints, upscaled, in.image_id, sr_boxes);
    const auto original_kps =
        estimate_checked(*backends.keypoints, original, in.image_id, original_boxes);

    std::size_t next_sr = 0;
    std::size_t next_original = 0;
    const double rd = r;
    for (const auto& dec : out.decisions) {
      const BBox& det = detections[dec.detection_index].bbox;
      KeypointRecord rec = dec.branch == Branch::kSuperResolved
                               ? to_original_frame(sr_kps[next_sr++], rd)
                               : original_kps[next_original++];
      rec.bbox = BBox{det.x / rd, det.y / rd, det.w / rd, det.h / rd};
      out.keypoints.push_back(rec);
    }
  });
}

PipelineResult run_direct_pipeline(std::span<const PipelineInput> images,
                                   const RouterConfig& config, const Backends& backends) {
  require(backends, true);
  return run_images(images, config, [&](const PipelineInput& in, ImageOutcome& out) {
    const RasterImage image = in.load();
    const auto detections = backends.detector->detect(image, in.image_id);
    std::vector<BBox> boxes;
    for (const auto& d : detections) boxes.push_back(d.bbox);
    auto kps = estimate_checked(*backends.keypoints, image, in.image_id, boxes);
    for (std::size_t i = 0; i < kps.size(); ++i) kps[i].bbox = boxes[i];
    out.keypoints = std::move(kps);
  });
}

PipelineResult run_gtbox_eval(const Dataset& dataset, std::span<const PipelineInput> images,
                              double scale, KeypointEstimator& estimator,
                              const RouterConfig& config) {
  if (!(scale > 0.0)) throw std::invalid_argument("gt-box scale must be positive");
  return run_images(images, config, [&](const PipelineInput& in, ImageOutcome& out) {
    if (dataset.find_image(in.image_id) == nullptr) {
      throw ValidationError("image " + std::to_string(in.image_id) + " is not in the dataset",
                            {in.image_id});
    }
    auto gts = dataset.annotations_for(in.image_id);
    std::erase_if(gts, [](const PersonAnnotation* a) { return a->iscrowd; });
    std::stable_sort(gts.begin(), gts.end(), [](auto* a, auto* b) { return a->id < b->id; });
    if (gts.empty()) return;  // no load, no backend call

    std::vector<BBox> boxes;
    for (const auto* gt : gts) {
      boxes.push_back({gt->bbox.x * scale, gt->bbox.y * scale, gt->bbox.w * scale,
                       gt->bbox.h * scale});
    }
    const RasterImage image = in.load();
    const auto kps = estimate_checked(estimator, image, in.image_id, boxes);
    for (std::size_t i = 0; i < kps.size(); ++i) {
      KeypointRecord rec = to_original_frame(kps[i], scale);
      rec.bbox = gts[i]->bbox;
      out.keypoints.push_back(rec);
    }
  });
}

std::string decision_to_json(const RouteDecision& d) {
  nlohmann::json j = {
      {"image_id", d.image_id},
      {"detection_index", d.detection_index},
      {"score", d.score},
      {"detected_area", d.detected_area},
      {"initial_area", d.initial_area},
      {"area_source", d.area_from_mask ? "mask" : "bbox"},
      {"threshold", std::isinf(d.threshold) ? nlohmann::json("inf") : nlohmann::json(d.threshold)},
      {"branch", to_string(d.branch)},
      {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}};
  return j.dump();
}

std::string decisions_to_jsonl(std::span<const RouteDecision> decisions) {
  std::string out;
  for (const auto& d : decisions) {
    out += decision_to_json(d);
    out += '\n';
  }
  return out;
}

std::vector<RouteDecision> decisions_from_jsonl(const std::string& text) {
  std::vector<RouteDecision> out;
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), line_start + e.byte);
    }
    RouteDecision d;
    d.image_id = j.at("image_id").get<std::int64_t>();
    d.detection_index = j.at("detection_index").get<std::size_t>();
    d.score = j.at("score").get<double>();
    d.detected_area = j.at("detected_area").get<double>();
    d.initial_area = j.at("initial_area").get<double>();
    d.area_from_mask = j.at("area_source").get<std::string>() == "mask";
    const auto& t = j.at("threshold");
    d.threshold = t.is_string() ? std::numeric_limits<double>::infinity() : t.get<double>();
    d.branch = j.at("branch").get<std::string>() == "sr" ? Branch::kSuperResolved
                                                         : Branch::kOriginal;
    const auto& b = j.at("bbox");
    d.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
              b.at(3).get<double>()};
    out.push_back(d);
  }
  return out;
}

}  // namespace srpose
