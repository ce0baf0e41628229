#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "srpose/coco.hpp"
#include "srpose/image.hpp"

namespace srpose {

struct ResampleSpec {
  double factor = 1.0;
  // Cubic convolution sharpness; -0.5 is the Catmull-Rom member.
  double a = -0.5;
};

// Cubic convolution kernel W(x) for sharpness `a`.
double cubic_kernel(double x, double a);

// The four tap weights for a source coordinate with fractional part `t`,
// applied to samples floor(u)-1 .. floor(u)+2.
std::array<double, 4> cubic_weights(double t, double a);

// Source coordinate sampled by output index `dst` (center-aligned).
inline double source_coordinate(int dst, double factor) {
  return (dst + 0.5) / factor - 0.5;
}

// Bicubic resampling. Output size is scaled_dimension() of each input
// dimension; borders are edge-clamped, results clamped to [0, 255] and
// rounded half-up.
RasterImage resample(const RasterImage& image, const ResampleSpec& spec);

// Peak signal-to-noise ratio in dB; +infinity for identical images.
double psnr(const RasterImage& a, const RasterImage& b);

struct ManifestEntry {
  std::string path;
  int width = 0;
  int height = 0;
  double factor = 1.0;
};

struct ImageFailure {
  std::int64_t image_id = 0;
  std::string message;
};

struct LrBuildResult {
  Dataset dataset;
  std::map<std::int64_t, ManifestEntry> manifest;
  std::vector<ImageFailure> failures;
};

// Creates a low-resolution copy of `dataset`: each image under `image_root`
// is resampled by `factor` into `out_dir/images/` and annotations pass
// through scale_annotations. Images that fail to load are reported in
// `failures` and dropped together with their annotations. At factor 1 the
// source files are copied byte for byte.
LrBuildResult build_lr_dataset(const Dataset& dataset,
                               const std::filesystem::path& image_root,
                               double factor,
                               const std::filesystem::path& out_dir,
                               unsigned workers = 1);

std::string manifest_to_json(const std::map<std::int64_t, ManifestEntry>& manifest);

}  // namespace srpose
