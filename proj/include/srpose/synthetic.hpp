#pragma once

#include <cstdint>
#include <map>
#include <random>

#include "srpose/coco.hpp"
#include "srpose/image.hpp"

namespace srpose::synth {

// Canonical standing-person keypoint layout scaled into `box`.
PredKeypoints keypoints_in_box(const BBox& box);

struct Spec {
  int num_images = 20;
  int width = 320;
  int height = 240;
  int max_persons = 3;
  double min_area = 250.0;
  double max_area = 12000.0;
  std::uint64_t seed = 0;
};

struct Fixture {
  Dataset dataset;
  std::map<std::int64_t, RasterImage> images;
};

// Smooth-gradient images with elliptical (12-gon) people whose keypoints
// follow keypoints_in_box exactly; areas are log-uniform in
// [min_area, max_area] and people never overlap.
Fixture make_fixture(const Spec& spec);

// Horizontal+vertical gradient with a low-frequency ripple.
RasterImage smooth_gradient(int width, int height, int channels);

}  // namespace srpose::synth
