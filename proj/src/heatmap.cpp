#include "srpose/heatmap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

#include "srpose/error.hpp"

namespace srpose {

Encoded encode(double x, double y, double sigma, const HeatmapGrid& grid) {
  if (!(sigma > 0.0)) throw std::invalid_argument("heatmap sigma must be positive");
  if (grid.width < 1 || grid.height < 1 || !(grid.stride > 0.0)) {
    throw std::invalid_argument("heatmap grid must be non-empty with positive stride");
  }
  Encoded out{Heatmap(grid.width, grid.height, grid.stride), false};
  Heatmap& hm = out.heatmap;
  out.outside = x < 0.0 || y < 0.0 || x >= grid.width * grid.stride ||
                y >= grid.height * grid.stride;
  const double denom = 2.0 * sigma * sigma;
  // exp is separable; evaluate each axis once.
  std::vector<double> gx(static_cast<std::size_t>(grid.width));
  std::vector<double> gy(static_cast<std::size_t>(grid.height));
  for (int c = 0; c < grid.width; ++c) {
    const double d = hm.center_x(c) - x;
    gx[static_cast<std::size_t>(c)] = -d * d / denom;
  }
  for (int r = 0; r < grid.height; ++r) {
    const double d = hm.center_y(r) - y;
    gy[static_cast<std::size_t>(r)] = -d * d / denom;
  }
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      hm.at(c, r) = std::exp(gx[static_cast<std::size_t>(c)] + gy[static_cast<std::size_t>(r)]);
    }
  }
  return out;
}

Decoded decode(const Heatmap& heatmap, bool refine) {
  if (heatmap.width < 1 || heatmap.height < 1 || heatmap.values.empty()) {
    throw std::invalid_argument("cannot decode an empty heatmap");
  }
  const auto [lo, hi] = std::minmax_element(heatmap.values.begin(), heatmap.values.end());
  Decoded out;
  if (*lo == *hi) {
    out.degenerate = true;
    out.x = heatmap.center_x((heatmap.width - 1) / 2);
    out.y = heatmap.center_y((heatmap.height - 1) / 2);
    out.confidence = *hi;
    return out;
  }
  // max_element returns the first maximum: lowest (row, col).
  const auto peak = static_cast<std::size_t>(
      std::max_element(heatmap.values.begin(), heatmap.values.end()) - heatmap.values.begin());
  const int row = static_cast<int>(peak / static_cast<std::size_t>(heatmap.width));
  const int col = static_cast<int>(peak % static_cast<std::size_t>(heatmap.width));
  double fx = col;
  double fy = row;
  if (refine) {
    if (col > 0 && col + 1 < heatmap.width) {
      const double diff = heatmap.at(col + 1, row) - heatmap.at(col - 1, row);
      if (diff != 0.0) fx += diff > 0.0 ? 0.25 : -0.25;
    }
    if (row > 0 && row + 1 < heatmap.height) {
      const double diff = heatmap.at(col, row + 1) - heatmap.at(col, row - 1);
      if (diff != 0.0) fy += diff > 0.0 ? 0.25 : -0.25;
    }
  }
  out.x = (fx + 0.5) * heatmap.stride;
  out.y = (fy + 0.5) * heatmap.stride;
  out.confidence = heatmap.values[peak];
  return out;
}

double l2_loss(const Heatmap& predicted, const Heatmap& target) {
  if (predicted.width != target.width || predicted.height != target.height ||
      predicted.values.size() != target.values.size()) {
    throw DimensionError("l2_loss: heatmaps differ in shape");
  }
  if (predicted.values.empty()) throw DimensionError("l2_loss: empty heatmaps");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.values.size(); ++i) {
    const double d = predicted.values[i] - target.values[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predicted.values.size());
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "heatmap serialization assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'R', 'H', 'M'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("truncated heatmap", pos);
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string serialize(const Heatmap& heatmap) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(heatmap.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(heatmap.height));
  put<double>(out, heatmap.stride);
  for (const double v : heatmap.values) put<double>(out, v);
  return out;
}

Heatmap deserialize(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ParseError("not a heatmap: bad magic", 0);
  }
  std::size_t pos = 4;
  const auto w = take<std::uint32_t>(bytes, pos);
  const auto h = take<std::uint32_t>(bytes, pos);
  const auto stride = take<double>(bytes, pos);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != pos + n * sizeof(double)) {
    throw ParseError("heatmap payload size does not match header", pos);
  }
  Heatmap hm(static_cast<int>(w), static_cast<int>(h), stride);
  for (std::size_t i = 0; i < n; ++i) {
    hm.values[i] = take<double>(bytes, pos);
    if (!std::isfinite(hm.values[i])) throw ParseError("non-finite heatmap value", pos);
  }
  return hm;
}

}  // namespace srpose
