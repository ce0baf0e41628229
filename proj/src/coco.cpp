#include "srpose/coco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "srpose/error.hpp"

namespace srpose {

using json = nlohmann::json;

namespace {

// Keypoints may sit on the far image border after scaling because image
// dimensions are rounded while coordinates are not.
constexpr double kBoundsTolerance = 1.0;

const std::array<const char*, kNumKeypoints> kKeypointNames = {
    "nose",           "left_eye",       "right_eye",   "left_ear",
    "right_ear",      "left_shoulder",  "right_shoulder", "left_elbow",
    "right_elbow",    "left_wrist",     "right_wrist", "left_hip",
    "right_hip",      "left_knee",      "right_knee",  "left_ankle",
    "right_ankle"};

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
}

std::string describe_ids(const std::vector<std::int64_t>& ids) {
  std::ostringstream os;
  const std::size_t shown = std::min<std::size_t>(ids.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) os << (i ? ", " : "") << ids[i];
  if (ids.size() > shown) os << ", ... (" << ids.size() << " total)";
  return os.str();
}

BBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("bbox must have 4 numbers", 0);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

json bbox_to_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

Segmentation segmentation_from_json(const json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.is_array()) {
    if (j.empty()) return std::monostate{};
    PolygonList polys;
    for (const auto& p : j) polys.push_back({p.get<std::vector<double>>()});
    return polys;
  }
  if (j.is_object()) {
    const auto& size = j.at("size");
    Rle rle;
    rle.height = size.at(0).get<int>();
    rle.width = size.at(1).get<int>();
    const auto& counts = j.at("counts");
    if (counts.is_string()) {
      rle.counts = rle_counts_from_string(counts.get<std::string>());
    } else {
      rle.counts = counts.get<std::vector<std::uint32_t>>();
    }
    return rle;
  }
  throw ParseError("unrecognised segmentation encoding", 0);
}

json segmentation_to_json(const Segmentation& seg) {
  if (const auto* polys = std::get_if<PolygonList>(&seg)) {
    json out = json::array();
    for (const auto& p : *polys) out.push_back(p.coords);
    return out;
  }
  if (const auto* rle = std::get_if<Rle>(&seg)) {
    return {{"size", {rle->height, rle->width}}, {"counts", rle->counts}};
  }
  return json::array();
}

template <typename F>
auto with_schema_errors(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    // Type/shape problems have no byte position once the DOM is built.
    throw ParseError(std::string("schema error: ") + e.what(), 0);
  }
}

}  // namespace

int PersonAnnotation::num_visible() const {
  return static_cast<int>(std::count_if(
      keypoints.begin(), keypoints.end(),
      [](const GtKeypoint& k) { return k.visibility > 0; }));
}

double KeypointRecord::extent_area() const {
  double x0 = keypoints[0].x, x1 = x0, y0 = keypoints[0].y, y1 = y0;
  for (const auto& k : keypoints) {
    x0 = std::min(x0, k.x);
    x1 = std::max(x1, k.x);
    y0 = std::min(y0, k.y);
    y1 = std::max(y1, k.y);
  }
  return (x1 - x0) * (y1 - y0);
}

Dataset::Dataset(std::vector<ImageRecord> images,
                 std::vector<PersonAnnotation> annotations)
    : images_(std::move(images)), annotations_(std::move(annotations)) {
  reindex();
}

void Dataset::reindex() {
  image_index_.clear();
  annotation_index_.clear();
  by_image_.clear();
  for (std::size_t i = 0; i < images_.size(); ++i) {
    image_index_.emplace(images_[i].id, i);
  }
  for (std::size_t i = 0; i < annotations_.size(); ++i) {
    annotation_index_.emplace(annotations_[i].id, i);
    by_image_[annotations_[i].image_id].push_back(i);
  }
}

const ImageRecord* Dataset::find_image(std::int64_t id) const {
  const auto it = image_index_.find(id);
  return it == image_index_.end() ? nullptr : &images_[it->second];
}

const PersonAnnotation* Dataset::find_annotation(std::int64_t id) const {
  const auto it = annotation_index_.find(id);
  return it == annotation_index_.end() ? nullptr : &annotations_[it->second];
}

std::vector<const PersonAnnotation*> Dataset::annotations_for(
    std::int64_t image_id) const {
  std::vector<const PersonAnnotation*> out;
  const auto it = by_image_.find(image_id);
  if (it == by_image_.end()) return out;
  out.reserve(it->second.size());
  for (const std::size_t i : it->second) out.push_back(&annotations_[i]);
  return out;
}

void Dataset::validate() const {
  std::vector<std::int64_t> bad_images;
  if (image_index_.size() != images_.size()) {
    std::unordered_set<std::int64_t> seen;
    for (const auto& im : images_) {
      if (!seen.insert(im.id).second) bad_images.push_back(im.id);
    }
  }
  for (const auto& im : images_) {
    if (im.width < 1 || im.height < 1) bad_images.push_back(im.id);
  }
  if (!bad_images.empty()) {
    throw ValidationError("invalid or duplicate images: " + describe_ids(bad_images),
                          bad_images);
  }

  std::vector<std::int64_t> bad;
  std::unordered_set<std::int64_t> seen;
  for (const auto& a : annotations_) {
    const ImageRecord* im = find_image(a.image_id);
    bool ok = im != nullptr && seen.insert(a.id).second;
    ok = ok && std::isfinite(a.area) && a.area >= 0.0;
    ok = ok && a.bbox.w >= 0.0 && a.bbox.h >= 0.0;
    if (ok && !std::holds_alternative<std::monostate>(a.segmentation)) {
      ok = a.area > 0.0;
    }
    for (const auto& k : a.keypoints) {
      if (!ok) break;
      if (k.visibility < 0 || k.visibility > 2) {
        ok = false;
      } else if (k.visibility > 0) {
        ok = k.x >= -kBoundsTolerance && k.y >= -kBoundsTolerance &&
             k.x <= im->width + kBoundsTolerance &&
             k.y <= im->height + kBoundsTolerance;
      }
    }
    if (!ok) bad.push_back(a.id);
  }
  if (!bad.empty()) {
    throw ValidationError("invalid annotations: " + describe_ids(bad), bad);
  }
}

Dataset parse_dataset_text(const std::string& text) {
  const json root = parse_json(text);
  return with_schema_errors([&] {
    int person_id = kPersonCategoryId;
    if (root.contains("categories")) {
      for (const auto& c : root.at("categories")) {
        if (c.value("name", std::string{}) == "person") {
          person_id = c.at("id").get<int>();
        }
      }
    }

    std::vector<ImageRecord> images;
    for (const auto& j : root.at("images")) {
      images.push_back({j.at("id").get<std::int64_t>(), j.at("width").get<int>(),
                        j.at("height").get<int>(),
                        j.value("file_name", std::string{})});
    }

    std::vector<PersonAnnotation> annotations;
    std::vector<std::int64_t> bad_flags;
    for (const auto& j : root.at("annotations")) {
      if (j.value("category_id", person_id) != person_id) continue;
      PersonAnnotation a;
      a.id = j.at("id").get<std::int64_t>();
      a.image_id = j.at("image_id").get<std::int64_t>();
      if (j.contains("keypoints")) {
        const auto kp = j.at("keypoints").get<std::vector<double>>();
        if (kp.size() != 3 * kNumKeypoints) {
          throw ValidationError("annotation " + std::to_string(a.id) +
                                    " has " + std::to_string(kp.size()) +
                                    " keypoint values, expected 51",
                                {a.id});
        }
        for (std::size_t i = 0; i < kNumKeypoints; ++i) {
          const double v = kp[3 * i + 2];
          if (v != std::floor(v)) bad_flags.push_back(a.id);
          a.keypoints[i] = {kp[3 * i], kp[3 * i + 1], static_cast<int>(v)};
        }
      }
      a.segmentation = segmentation_from_json(j.value("segmentation", json()));
      a.area = j.value("area", 0.0);
      a.bbox = j.contains("bbox") ? bbox_from_json(j.at("bbox")) : BBox{};
      a.iscrowd = j.value("iscrowd", 0) != 0;
      annotations.push_back(std::move(a));
    }
    if (!bad_flags.empty()) {
      throw ValidationError("non-integral visibility flags in annotations: " +
                                describe_ids(bad_flags),
                            bad_flags);
    }
    Dataset ds(std::move(images), std::move(annotations));
    ds.validate();
    return ds;
  });
}

Dataset parse_dataset(const std::filesystem::path& path) {
  return parse_dataset_text(read_text_file(path));
}

std::string dataset_to_json(const Dataset& dataset) {
  json images = json::array();
  for (const auto& im : dataset.images()) {
    images.push_back({{"id", im.id},
                      {"width", im.width},
                      {"height", im.height},
                      {"file_name", im.file_name}});
  }
  json annotations = json::array();
  for (const auto& a : dataset.annotations()) {
    json kp = json::array();
    for (const auto& k : a.keypoints) {
      kp.push_back(k.x);
      kp.push_back(k.y);
      kp.push_back(k.visibility);
    }
    annotations.push_back({{"id", a.id},
                           {"image_id", a.image_id},
                           {"category_id", kPersonCategoryId},
                           {"keypoints", kp},
                           {"num_keypoints", a.num_visible()},
                           {"segmentation", segmentation_to_json(a.segmentation)},
                           {"area", a.area},
                           {"bbox", bbox_to_json(a.bbox)},
                           {"iscrowd", a.iscrowd ? 1 : 0}});
  }
  json category = {{"id", kPersonCategoryId},
                   {"name", "person"},
                   {"supercategory", "person"},
                   {"keypoints", kKeypointNames}};
  json root = {{"images", images},
               {"annotations", annotations},
               {"categories", json::array({category})}};
  return root.dump();
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_text_file(path, dataset_to_json(dataset));
}

Dataset scale_annotations(const Dataset& dataset, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw std::invalid_argument("scale factor must be finite and positive");
  }
  std::vector<ImageRecord> images = dataset.images();
  for (auto& im : images) {
    im.width = scaled_dimension(im.width, factor);
    im.height = scaled_dimension(im.height, factor);
  }
  std::vector<PersonAnnotation> annotations = dataset.annotations();
  for (auto& a : annotations) {
    for (auto& k : a.keypoints) {
      k.x *= factor;
      k.y *= factor;
    }
    a.bbox = {a.bbox.x * factor, a.bbox.y * factor, a.bbox.w * factor,
              a.bbox.h * factor};
    a.area *= factor * factor;
    if (auto* polys = std::get_if<PolygonList>(&a.segmentation)) {
      for (auto& p : *polys) {
        for (auto& c : p.coords) c *= factor;
      }
    } else if (auto* rle = std::get_if<Rle>(&a.segmentation)) {
      *rle = rle_rescale(*rle, factor);
    }
  }
  return Dataset(std::move(images), std::move(annotations));
}

ResultSet parse_results_text(const std::string& text, const Dataset* dataset) {
  const json root = parse_json(text);
  if (!root.is_array()) throw ParseError("results file must be a JSON list", 0);
  ResultSet out;
  std::vector<std::int64_t> unknown;
  std::vector<std::int64_t> invalid;
  with_schema_errors([&] {
    for (const auto& j : root) {
      if (j.value("category_id", kPersonCategoryId) != kPersonCategoryId) continue;
      const auto image_id = j.at("image_id").get<std::int64_t>();
      if (dataset != nullptr && dataset->find_image(image_id) == nullptr) {
        unknown.push_back(image_id);
      }
      const double score = j.at("score").get<double>();
      bool ok = std::isfinite(score);
      if (j.contains("keypoints")) {
        KeypointRecord r;
        r.image_id = image_id;
        r.score = score;
        const auto kp = j.at("keypoints").get<std::vector<double>>();
        if (kp.size() != 3 * kNumKeypoints) {
          ok = false;
        } else {
          for (std::size_t i = 0; i < kNumKeypoints; ++i) {
            r.keypoints[i] = {kp[3 * i], kp[3 * i + 1], kp[3 * i + 2]};
            ok = ok && std::isfinite(kp[3 * i]) && std::isfinite(kp[3 * i + 1]) &&
                 std::isfinite(kp[3 * i + 2]);
          }
        }
        if (j.contains("bbox")) r.bbox = bbox_from_json(j.at("bbox"));
        out.keypoints.push_back(r);
      } else {
        DetectionRecord r;
        r.image_id = image_id;
        r.score = score;
        r.bbox = bbox_from_json(j.at("bbox"));
        ok = ok && r.bbox.w >= 0.0 && r.bbox.h >= 0.0;
        if (j.contains("area")) {
          r.area = j.at("area").get<double>();
          ok = ok && std::isfinite(*r.area) && *r.area >= 0.0;
        }
        out.detections.push_back(r);
      }
      if (!ok) invalid.push_back(image_id);
    }
    return 0;
  });
  if (!unknown.empty()) {
    throw ValidationError("results reference unknown image ids: " + describe_ids(unknown),
                          unknown);
  }
  if (!invalid.empty()) {
    throw ValidationError("invalid result records on images: " + describe_ids(invalid),
                          invalid);
  }
  return out;
}

ResultSet parse_results(const std::filesystem::path& path, const Dataset* dataset) {
  return parse_results_text(read_text_file(path), dataset);
}

std::string results_to_json(std::span<const DetectionRecord> detections) {
  json out = json::array();
  for (const auto& d : detections) {
    json j = {{"image_id", d.image_id},
              {"category_id", kPersonCategoryId},
              {"bbox", bbox_to_json(d.bbox)},
              {"score", d.score}};
    if (d.area) j["area"] = *d.area;
    out.push_back(std::move(j));
  }
  return out.dump();
}

std::string results_to_json(std::span<const KeypointRecord> keypoints) {
  json out = json::array();
  for (const auto& r : keypoints) {
    json kp = json::array();
    for (const auto& k : r.keypoints) {
      kp.push_back(k.x);
      kp.push_back(k.y);
      kp.push_back(k.confidence);
    }
    json j = {{"image_id", r.image_id},
              {"category_id", kPersonCategoryId},
              {"keypoints", kp},
              {"score", r.score}};
    if (r.bbox) j["bbox"] = bbox_to_json(*r.bbox);
    out.push_back(std::move(j));
  }
  return out.dump();
}

void write_results(std::span<const DetectionRecord> detections,
                   const std::filesystem::path& path) {
  write_text_file(path, results_to_json(detections));
}

void write_results(std::span<const KeypointRecord> keypoints,
                   const std::filesystem::path& path) {
  write_text_file(path, results_to_json(keypoints));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace srpose
