#include "srpose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "srpose/error.hpp"

namespace srpose {

double polygon_area(std::span<const double> coords) {
  if (coords.size() % 2 != 0) {
    throw GeometryError("polygon has an odd number of coordinates");
  }
  const std::size_t n = coords.size() / 2;
  if (n < 3) {
    throw GeometryError("polygon needs at least 3 vertices, got " +
                        std::to_string(n));
  }
  // Translate to the first vertex before the cross products; keeps the sum
  // well conditioned for polygons far from the origin.
  const double ox = coords[0];
  const double oy = coords[1];
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const double xi = coords[2 * i] - ox;
    const double yi = coords[2 * i + 1] - oy;
    const double xj = coords[2 * j] - ox;
    const double yj = coords[2 * j + 1] - oy;
    twice += xi * yj - xj * yi;
  }
  return std::abs(twice) * 0.5;
}

double polygon_area(const PolygonList& polygons) {
  double total = 0.0;
  for (const auto& p : polygons) total += polygon_area(p.coords);
  return total;
}

double rle_area(const Rle& rle) {
  if (rle.height < 0 || rle.width < 0) {
    throw GeometryError("negative RLE grid size");
  }
  const std::uint64_t grid =
      static_cast<std::uint64_t>(rle.height) * static_cast<std::uint64_t>(rle.width);
  std::uint64_t covered = 0;
  std::uint64_t foreground = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    covered += rle.counts[i];
    if (i % 2 == 1) foreground += rle.counts[i];
    if (covered > grid) {
      throw GeometryError("RLE counts overflow the " +
                          std::to_string(rle.height) + "x" +
                          std::to_string(rle.width) + " grid");
    }
  }
  if (covered != grid) {
    throw GeometryError("RLE counts cover " + std::to_string(covered) +
                        " of " + std::to_string(grid) + " pixels");
  }
  return static_cast<double>(foreground);
}

double segmentation_area(const Segmentation& seg) {
  if (const auto* polys = std::get_if<PolygonList>(&seg)) {
    return polygon_area(*polys);
  }
  if (const auto* rle = std::get_if<Rle>(&seg)) return rle_area(*rle);
  return 0.0;
}

std::vector<std::uint8_t> rle_decode(const Rle& rle) {
  rle_area(rle);  // validates coverage
  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(rle.height) * static_cast<std::size_t>(rle.width), 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::size_t end = pos + rle.counts[i];
    if (i % 2 == 1) std::fill(mask.begin() + pos, mask.begin() + end, 1);
    pos = end;
  }
  return mask;
}

Rle rle_encode(std::span<const std::uint8_t> mask, int height, int width) {
  if (mask.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw GeometryError("mask size does not match grid");
  }
  Rle rle{height, width, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (const std::uint8_t v : mask) {
    const std::uint8_t bit = v != 0 ? 1 : 0;
    if (bit != current) {
      rle.counts.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

std::vector<std::uint32_t> rle_counts_from_string(const std::string& s) {
  std::vector<std::uint32_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw ParseError("truncated compressed RLE string", p);
      const int c = static_cast<int>(s[p]) - 48;
      if (c < 0 || c > 63) throw ParseError("invalid compressed RLE character", p);
      x |= static_cast<std::int64_t>(c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10) != 0) x |= -(static_cast<std::int64_t>(1) << (5 * k));
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    if (x < 0) throw ParseError("negative run in compressed RLE", p);
    counts.push_back(static_cast<std::uint32_t>(x));
  }
  return counts;
}

std::string rle_counts_to_string(std::span<const std::uint32_t> counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::int64_t x = counts[i];
    if (i > 2) x -= counts[i - 2];
    bool more = true;
    while (more) {
      int c = static_cast<int>(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) != 0 ? x != -1 : x != 0;
      if (more) c |= 0x20;
      out.push_back(static_cast<char>(c + 48));
    }
  }
  return out;
}

int scaled_dimension(int dim, double factor) {
  const double scaled = std::floor(static_cast<double>(dim) * factor + 0.5);
  return std::max(1, static_cast<int>(scaled));
}

Rle rle_rescale(const Rle& rle, double factor) {
  const auto src = rle_decode(rle);
  const int h = scaled_dimension(rle.height, factor);
  const int w = scaled_dimension(rle.width, factor);
  auto nearest = [factor](int dst, int limit) {
    const int s = static_cast<int>(std::floor((dst + 0.5) / factor));
    return std::clamp(s, 0, limit - 1);
  };
  std::vector<std::uint8_t> dst(static_cast<std::size_t>(h) * w, 0);
  if (rle.height > 0 && rle.width > 0) {
    for (int c = 0; c < w; ++c) {
      const int sc = nearest(c, rle.width);
      for (int r = 0; r < h; ++r) {
        const int sr = nearest(r, rle.height);
        dst[static_cast<std::size_t>(c) * h + r] =
            src[static_cast<std::size_t>(sc) * rle.height + sr];
      }
    }
  }
  return rle_encode(dst, h, w);
}

}  // namespace srpose
