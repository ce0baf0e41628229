#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "srpose/coco.hpp"
#include "srpose/image.hpp"

namespace srpose {

// The three model stages of a top-down pose pipeline. Implementations must
// tolerate concurrent calls from pipeline workers.
class SuperResolver {
 public:
  virtual ~SuperResolver() = default;
  virtual std::string id() const = 0;
  virtual RasterImage upscale(const RasterImage& image, int ratio, std::int64_t image_id) = 0;
};

class PersonDetector {
 public:
  virtual ~PersonDetector() = default;
  virtual std::string id() const = 0;
  virtual std::vector<DetectionRecord> detect(const RasterImage& image,
                                              std::int64_t image_id) = 0;
};

class KeypointEstimator {
 public:
  virtual ~KeypointEstimator() = default;
  virtual std::string id() const = 0;
  // Exactly one record per box, in box order, in the image's own frame.
  virtual std::vector<KeypointRecord> estimate(const RasterImage& image, std::int64_t image_id,
                                               std::span<const BBox> boxes) = 0;
};

// Built-in "Bicubic" super-resolution baseline.
class BicubicUpscaler final : public SuperResolver {
 public:
  std::string id() const override { return "bicubic"; }
  RasterImage upscale(const RasterImage& image, int ratio, std::int64_t image_id) override;
};

// Adapter for an external executable speaking the file protocol:
//
//   <exe> --task upscale   --input <png|dir> --output <png|dir> --scale <r>
//   <exe> --task detect    --input <png> --output <results.json>
//   <exe> --task keypoints --input <png> --output <results.json> --boxes <boxes.json>
//
// Single-image inputs are written as <image_id>.png. Results files use the
// COCO results schema; detections should carry "area".
// Exit status 0 is success, anything else a failure reported on stderr.
class SubprocessBackend final : public SuperResolver,
                                public PersonDetector,
                                public KeypointEstimator {
 public:
  explicit SubprocessBackend(std::filesystem::path executable,
                             std::filesystem::path scratch_root = {});

  std::string id() const override;
  const std::filesystem::path& executable() const { return executable_; }

  RasterImage upscale(const RasterImage& image, int ratio, std::int64_t image_id) override;
  std::vector<DetectionRecord> detect(const RasterImage& image, std::int64_t image_id) override;
  std::vector<KeypointRecord> estimate(const RasterImage& image, std::int64_t image_id,
                                       std::span<const BBox> boxes) override;

  // Whole-directory upscale; output filenames mirror the input directory.
  void upscale_directory(const std::filesystem::path& input,
                         const std::filesystem::path& output, int ratio);

 private:
  void invoke(const std::vector<std::string>& args, const std::filesystem::path& workdir);
  std::filesystem::path make_workdir(std::int64_t image_id);

  std::filesystem::path executable_;
  std::filesystem::path scratch_root_;
};

// Runs `argv` (argv[0] is the program) and waits. Returns the exit status;
// combined stdout/stderr of the child lands in `log_path`.
int run_process(const std::vector<std::string>& argv, const std::filesystem::path& log_path);

}  // namespace srpose
