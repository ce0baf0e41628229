#pragma once

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <vector>

#include "srpose/backend.hpp"
#include "srpose/coco.hpp"
#include "srpose/metrics.hpp"
#include "srpose/router.hpp"
#include "srpose/synthetic.hpp"

namespace fixtures {

using namespace srpose;

struct RandomInstance {
  Dataset dataset;
  std::vector<DetectionRecord> detections;
  std::vector<KeypointRecord> keypoints;
};

// Up to `max_images` 640x480 images with up to `max_gts` people and
// `max_preds` predictions each. Boxes sit on a 4 px lattice and scores on a
// 0.1 grid half the time so similarity and score ties are common. Crowds,
// people with no visible keypoints and duplicated people all appear.
inline RandomInstance random_instance(std::mt19937_64& rng, int max_images = 20, int max_gts = 10,
                                      int max_preds = 10) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int n_images = uni(1, max_images);
  std::vector<std::int64_t> image_ids(static_cast<std::size_t>(n_images));
  std::iota(image_ids.begin(), image_ids.end(), 1);
  std::shuffle(image_ids.begin(), image_ids.end(), rng);
  std::vector<std::int64_t> ann_ids(static_cast<std::size_t>(n_images * max_gts));
  std::iota(ann_ids.begin(), ann_ids.end(), 100);
  std::shuffle(ann_ids.begin(), ann_ids.end(), rng);
  std::size_t next_ann = 0;

  RandomInstance out;
  std::vector<ImageRecord> images;
  std::vector<PersonAnnotation> anns;
  for (const std::int64_t img : image_ids) {
    images.push_back({img, 640, 480, std::to_string(img) + ".png"});
    std::vector<PersonAnnotation> mine;
    const int n_gt = uni(0, max_gts);
    for (int g = 0; g < n_gt; ++g) {
      PersonAnnotation a;
      if (!mine.empty() && u01(rng) < 0.1) {
        a = mine[static_cast<std::size_t>(uni(0, static_cast<int>(mine.size()) - 1))];
      } else {
        a.bbox = {4.0 * uni(0, 120), 4.0 * uni(0, 90), 4.0 * uni(1, 35), 4.0 * uni(1, 30)};
        a.area = a.bbox.area() * (0.5 + 0.4 * u01(rng));
        const bool none_visible = u01(rng) < 0.1;
        for (auto& k : a.keypoints) {
          k.x = a.bbox.x + u01(rng) * a.bbox.w;
          k.y = a.bbox.y + u01(rng) * a.bbox.h;
          k.visibility = none_visible ? 0 : (u01(rng) < 0.7 ? 1 + uni(0, 1) : 0);
        }
        if (!none_visible && a.num_visible() == 0) a.keypoints[0].visibility = 2;
        a.iscrowd = u01(rng) < 0.08;
      }
      a.id = ann_ids[next_ann++];
      a.image_id = img;
      mine.push_back(a);
    }

    const int n_pred = uni(0, max_preds);
    for (int p = 0; p < n_pred; ++p) {
      DetectionRecord d;
      KeypointRecord k;
      d.image_id = k.image_id = img;
      const double score = u01(rng) < 0.5 ? 0.1 * uni(1, 10) : u01(rng);
      d.score = k.score = score;
      if (!mine.empty() && u01(rng) < 0.8) {
        const auto& a = mine[static_cast<std::size_t>(uni(0, static_cast<int>(mine.size()) - 1))];
        d.bbox = {a.bbox.x + 4.0 * uni(-2, 2), a.bbox.y + 4.0 * uni(-2, 2),
                  std::max(4.0, a.bbox.w + 4.0 * uni(-2, 2)), std::max(4.0, a.bbox.h + 4.0 * uni(-2, 2))};
        const double noise = std::array<double, 4>{0.0, 1.0, 4.0, 12.0}[static_cast<std::size_t>(uni(0, 3))];
        for (std::size_t i = 0; i < kNumKeypoints; ++i) {
          k.keypoints[i] = {a.keypoints[i].x + noise * gauss(rng), a.keypoints[i].y + noise * gauss(rng),
                            u01(rng)};
        }
      } else {
        d.bbox = {4.0 * uni(0, 120), 4.0 * uni(0, 90), 4.0 * uni(1, 35), 4.0 * uni(1, 30)};
        for (auto& kp : k.keypoints) kp = {d.bbox.x + u01(rng) * d.bbox.w, d.bbox.y + u01(rng) * d.bbox.h, u01(rng)};
      }
      out.detections.push_back(d);
      out.keypoints.push_back(k);
    }
    anns.insert(anns.end(), mine.begin(), mine.end());
  }
  // Records arrive in arbitrary image order, like a real results file.
  std::vector<std::size_t> perm(out.detections.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  RandomInstance shuffled;
  for (const std::size_t i : perm) {
    shuffled.detections.push_back(out.detections[i]);
    shuffled.keypoints.push_back(out.keypoints[i]);
  }
  shuffled.dataset = Dataset(std::move(images), std::move(anns));
  return shuffled;
}

// Three images, four counted people (one per size class plus a second
// medium one), one crowd region and one person without visible keypoints.
inline Dataset three_image_dataset() {
  auto person = [](std::int64_t id, std::int64_t img, BBox box, double area) {
    PersonAnnotation a;
    a.id = id;
    a.image_id = img;
    a.bbox = box;
    a.area = area;
    const auto kps = synth::keypoints_in_box(box);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) a.keypoints[i] = {kps[i].x, kps[i].y, 2};
    return a;
  };
  std::vector<PersonAnnotation> anns;
  anns.push_back(person(1, 1, {10, 10, 20, 40}, 600));     // small
  anns.push_back(person(2, 1, {100, 50, 60, 120}, 5000));  // medium
  anns.push_back(person(3, 2, {20, 20, 150, 300}, 30000)); // large
  anns.push_back(person(4, 3, {200, 100, 50, 100}, 3500)); // medium
  PersonAnnotation crowd = person(5, 2, {300, 10, 200, 200}, 20000);
  crowd.iscrowd = true;
  anns.push_back(crowd);
  PersonAnnotation hidden = person(6, 3, {10, 10, 30, 60}, 1200);
  for (auto& k : hidden.keypoints) k = {0, 0, 0};
  anns.push_back(hidden);
  return Dataset({{1, 640, 480, "a.png"}, {2, 640, 480, "b.png"}, {3, 640, 480, "c.png"}},
                 std::move(anns));
}

// Perfect predictions for every non-crowd person with visible keypoints.
inline std::vector<KeypointRecord> perfect_keypoints(const Dataset& ds) {
  std::vector<KeypointRecord> out;
  for (const auto& a : ds.annotations()) {
    if (a.iscrowd || a.num_visible() == 0) continue;
    KeypointRecord r;
    r.image_id = a.image_id;
    r.score = 0.5 + 0.01 * static_cast<double>(a.id);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      r.keypoints[i] = {a.keypoints[i].x, a.keypoints[i].y, 1.0};
    }
    out.push_back(r);
  }
  return out;
}

inline std::vector<DetectionRecord> perfect_detections(const Dataset& ds) {
  std::vector<DetectionRecord> out;
  for (const auto& a : ds.annotations()) {
    if (a.iscrowd) continue;
    out.push_back({a.image_id, a.bbox, 0.5 + 0.01 * static_cast<double>(a.id), a.area});
  }
  return out;
}

// Nearest-neighbour "identity" super-resolver.
class NearestUpscaler final : public SuperResolver {
 public:
  std::string id() const override { return "nearest"; }
  RasterImage upscale(const RasterImage& img, int r, std::int64_t) override {
    RasterImage out(img.width * r, img.height * r, img.channels);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x / r, y / r, c);
    return out;
  }
};

// Reports each non-crowd ground-truth person of the image, scaled to the
// image it is shown (scale = image width / dataset width).
class OracleDetector final : public PersonDetector {
 public:
  explicit OracleDetector(const Dataset& ds, bool with_area = true) : ds_(ds), with_area_(with_area) {}
  std::string id() const override { return "oracle-detector"; }
  std::vector<DetectionRecord> detect(const RasterImage& image, std::int64_t image_id) override {
    const ImageRecord* rec = ds_.find_image(image_id);
    const double s = static_cast<double>(image.width) / rec->width;
    std::vector<DetectionRecord> out;
    for (const auto* a : ds_.annotations_for(image_id)) {
      if (a->iscrowd) continue;
      DetectionRecord d{image_id, {a->bbox.x * s, a->bbox.y * s, a->bbox.w * s, a->bbox.h * s},
                        0.3 + 0.6 * std::fmod(0.618 * static_cast<double>(a->id), 1.0), std::nullopt};
      if (with_area_) d.area = a->area * s * s;
      out.push_back(d);
    }
    return out;
  }

 private:
  const Dataset& ds_;
  bool with_area_;
};

struct EstimateCall {
  std::int64_t image_id = 0;
  int width = 0;
  int height = 0;
  std::vector<BBox> boxes;
};

// Keypoint estimator that logs every call. Keypoints are the canonical
// layout inside each box, displaced by `error_px(box area in this image,
// scale)` image pixels along a fixed per-keypoint direction, so results
// are exact inverses across scales when the error is zero.
class LoggingEstimator final : public KeypointEstimator {
 public:
  using ErrorModel = std::function<double(double box_area, double scale)>;
  LoggingEstimator(int original_width, ErrorModel error = {})
      : original_width_(original_width), error_(std::move(error)) {}

  std::string id() const override { return "logging-estimator"; }
  std::vector<KeypointRecord> estimate(const RasterImage& image, std::int64_t image_id,
                                       std::span<const BBox> boxes) override {
    {
      std::lock_guard lock(mutex_);
      calls_.push_back({image_id, image.width, image.height, {boxes.begin(), boxes.end()}});
    }
    const double scale = static_cast<double>(image.width) / original_width_;
    std::vector<KeypointRecord> out;
    for (const BBox& b : boxes) {
      KeypointRecord r;
      r.image_id = image_id;
      r.keypoints = synth::keypoints_in_box(b);
      const double e = error_ ? error_(b.area(), scale) : 0.0;
      for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const double angle = 2.399963 * static_cast<double>(i);  // golden-angle spread
        r.keypoints[i].x += e * std::cos(angle);
        r.keypoints[i].y += e * std::sin(angle);
      }
      r.score = 0.9;
      out.push_back(r);
    }
    return out;
  }

  std::vector<EstimateCall> calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

 private:
  int original_width_;
  ErrorModel error_;
  mutable std::mutex mutex_;
  std::vector<EstimateCall> calls_;
};

inline std::vector<PipelineInput> inputs_from(const synth::Fixture& fx) {
  std::vector<PipelineInput> out;
  for (const auto& [id, img] : fx.images) out.push_back(PipelineInput::from_memory(id, img));
  return out;
}

}  // namespace fixtures
