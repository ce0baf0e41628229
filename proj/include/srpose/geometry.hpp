#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace srpose {

// Axis-aligned box in pixels, COCO (x, y, w, h) order.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

// Flat (x0, y0, x1, y1, ...) vertex list.
struct Polygon {
  std::vector<double> coords;
  bool operator==(const Polygon&) const = default;
};

// COCO run-length encoding: alternating background/foreground run lengths
// over a column-major height x width grid, starting with background.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;
  bool operator==(const Rle&) const = default;
};

using PolygonList = std::vector<Polygon>;
// monostate: annotation carries no segmentation.
using Segmentation = std::variant<std::monostate, PolygonList, Rle>;

// Absolute shoelace area. Throws GeometryError for fewer than 3 vertices or
// an odd coordinate count.
double polygon_area(std::span<const double> coords);
double polygon_area(const PolygonList& polygons);

// Sum of foreground runs. Throws GeometryError when the counts do not cover
// the grid exactly.
double rle_area(const Rle& rle);

double segmentation_area(const Segmentation& seg);

// Column-major 0/1 mask of size height*width.
std::vector<std::uint8_t> rle_decode(const Rle& rle);
Rle rle_encode(std::span<const std::uint8_t> mask, int height, int width);

// COCO compressed-string counts (as produced by pycocotools' rleToString).
std::vector<std::uint32_t> rle_counts_from_string(const std::string& s);
std::string rle_counts_to_string(std::span<const std::uint32_t> counts);

// Nearest-neighbour resampling of a mask onto a grid scaled by `factor`
// (dimensions rounded half-up, minimum 1), center-aligned.
Rle rle_rescale(const Rle& rle, double factor);

// Half-up rounding of factor*dim with a floor of 1, shared by image and
// annotation scaling so both agree on output dimensions.
int scaled_dimension(int dim, double factor);

}  // namespace srpose
