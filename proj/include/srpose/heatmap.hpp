#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace srpose {

// Row-major confidence map; cell (col, row) covers input pixels
// [col*stride, (col+1)*stride) and is centred at ((col+0.5)*stride, ...).
struct Heatmap {
  int width = 0;
  int height = 0;
  double stride = 1.0;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(int w, int h, double s) : width(w), height(h), stride(s), values(static_cast<std::size_t>(w) * h, 0.0) {}

  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * width + col]; }
  double& at(int col, int row) { return values[static_cast<std::size_t>(row) * width + col]; }
  double center_x(int col) const { return (col + 0.5) * stride; }
  double center_y(int row) const { return (row + 0.5) * stride; }
  bool operator==(const Heatmap&) const = default;
};

struct HeatmapGrid {
  int width = 64;
  int height = 48;
  double stride = 4.0;
};

struct Encoded {
  Heatmap heatmap;
  bool outside = false;  // keypoint off the grid; the Gaussian is truncated
};

// Gaussian target exp(-|center - keypoint|^2 / (2 sigma^2)), sigma in input
// pixels. Throws std::invalid_argument for sigma <= 0.
Encoded encode(double x, double y, double sigma, const HeatmapGrid& grid);

// Typical sigma: two cells.
inline double default_sigma(const HeatmapGrid& grid) { return 2.0 * grid.stride; }

struct Decoded {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
  bool degenerate = false;  // flat map; centre cell returned
};

// Peak location in input pixels. The first maximum in row-major order wins;
// with `refine` it moves a quarter cell toward the larger neighbour on each
// axis.
Decoded decode(const Heatmap& heatmap, bool refine = true);

// Mean squared difference over cells. Throws DimensionError on shape mismatch.
double l2_loss(const Heatmap& predicted, const Heatmap& target);

// Binary interchange: "SRHM" magic, uint32 width, uint32 height, float64
// stride, then width*height float64 values, all little-endian.
std::string serialize(const Heatmap& heatmap);
Heatmap deserialize(const std::string& bytes);

}  // namespace srpose
