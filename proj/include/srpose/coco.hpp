#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "srpose/geometry.hpp"

namespace srpose {

inline constexpr std::size_t kNumKeypoints = 17;
inline constexpr int kPersonCategoryId = 1;

struct ImageRecord {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
  bool operator==(const ImageRecord&) const = default;
};

// Ground-truth keypoint; visibility is the COCO flag in {0, 1, 2}.
struct GtKeypoint {
  double x = 0.0;
  double y = 0.0;
  int visibility = 0;
  bool operator==(const GtKeypoint&) const = default;
};

// Predicted keypoint with a backend confidence in the third slot.
struct PredKeypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
  bool operator==(const PredKeypoint&) const = default;
};

using GtKeypoints = std::array<GtKeypoint, kNumKeypoints>;
using PredKeypoints = std::array<PredKeypoint, kNumKeypoints>;

struct PersonAnnotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  GtKeypoints keypoints{};
  Segmentation segmentation;
  double area = 0.0;
  BBox bbox;
  bool iscrowd = false;

  int num_visible() const;
  bool operator==(const PersonAnnotation&) const = default;
};

struct DetectionRecord {
  std::int64_t image_id = 0;
  BBox bbox;
  double score = 0.0;
  // Instance mask area, present for segmentation-capable detectors.
  std::optional<double> area;
  bool operator==(const DetectionRecord&) const = default;
};

struct KeypointRecord {
  std::int64_t image_id = 0;
  PredKeypoints keypoints{};
  double score = 0.0;
  std::optional<BBox> bbox;
  bool operator==(const KeypointRecord&) const = default;

  // Area of the tight box around the keypoints, the COCO convention for
  // keypoint results that carry no explicit area.
  double extent_area() const;
};

// Images plus person annotations. Immutable once built; lookups go through
// the indices built by `reindex()`.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<ImageRecord> images,
          std::vector<PersonAnnotation> annotations);

  const std::vector<ImageRecord>& images() const { return images_; }
  const std::vector<PersonAnnotation>& annotations() const {
    return annotations_;
  }

  const ImageRecord* find_image(std::int64_t id) const;
  const PersonAnnotation* find_annotation(std::int64_t id) const;
  // Annotations of one image, in file order.
  std::vector<const PersonAnnotation*> annotations_for(
      std::int64_t image_id) const;

  // Throws ValidationError listing offending annotation ids.
  void validate() const;

  bool operator==(const Dataset& other) const {
    return images_ == other.images_ && annotations_ == other.annotations_;
  }

 private:
  void reindex();

  std::vector<ImageRecord> images_;
  std::vector<PersonAnnotation> annotations_;
  std::unordered_map<std::int64_t, std::size_t> image_index_;
  std::unordered_map<std::int64_t, std::size_t> annotation_index_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> by_image_;
};

// COCO keypoint annotation JSON. Only the person category is retained.
Dataset parse_dataset(const std::filesystem::path& path);
Dataset parse_dataset_text(const std::string& text);
std::string dataset_to_json(const Dataset& dataset);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Multiplies every coordinate by `factor`, scales stored areas by factor^2
// and image dimensions with `scaled_dimension`. RLE masks are resampled
// nearest-neighbour onto the scaled grid.
Dataset scale_annotations(const Dataset& dataset, double factor);

struct ResultSet {
  std::vector<DetectionRecord> detections;
  std::vector<KeypointRecord> keypoints;
  bool operator==(const ResultSet&) const = default;
};

// COCO results JSON: a list of {image_id, category_id, bbox|keypoints, score
// [, area]}. An entry with "keypoints" is a keypoint record, otherwise a
// detection. With `dataset` given, unknown image ids are a ValidationError.
ResultSet parse_results(const std::filesystem::path& path,
                        const Dataset* dataset = nullptr);
ResultSet parse_results_text(const std::string& text,
                             const Dataset* dataset = nullptr);
std::string results_to_json(std::span<const DetectionRecord> detections);
std::string results_to_json(std::span<const KeypointRecord> keypoints);
void write_results(std::span<const DetectionRecord> detections,
                   const std::filesystem::path& path);
void write_results(std::span<const KeypointRecord> keypoints,
                   const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& text);

}  // namespace srpose
