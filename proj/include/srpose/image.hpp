#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace srpose {

// Row-major, interleaved 8-bit image with 1 (gray) or 3 (RGB) channels.
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> samples;

  RasterImage() = default;
  RasterImage(int w, int h, int c, std::uint8_t fill = 0);

  bool valid() const;
  std::uint8_t at(int x, int y, int c) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const RasterImage&) const = default;
};

// Reads PNG or JPEG (chosen by file signature). Colour inputs become RGB,
// grayscale inputs stay single-channel; alpha is dropped.
RasterImage read_image(const std::filesystem::path& path);
void write_png(const RasterImage& image, const std::filesystem::path& path);

}  // namespace srpose
