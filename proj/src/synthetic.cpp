#include "srpose/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace srpose::synth {

namespace {

// (x, y) as fractions of the person box: nose, eyes, ears, shoulders,
// elbows, wrists, hips, knees, ankles.
constexpr std::array<std::array<double, 2>, kNumKeypoints> kLayout = {{
    {0.50, 0.08}, {0.45, 0.06}, {0.55, 0.06}, {0.40, 0.08}, {0.60, 0.08},
    {0.30, 0.22}, {0.70, 0.22}, {0.22, 0.38}, {0.78, 0.38}, {0.18, 0.52},
    {0.82, 0.52}, {0.38, 0.55}, {0.62, 0.55}, {0.36, 0.75}, {0.64, 0.75},
    {0.35, 0.95}, {0.65, 0.95},
}};

constexpr int kPolygonSides = 12;

Polygon ellipse_polygon(const BBox& b) {
  Polygon p;
  const double cx = b.x + b.w / 2.0;
  const double cy = b.y + b.h / 2.0;
  for (int i = 0; i < kPolygonSides; ++i) {
    const double t = 2.0 * std::numbers::pi * i / kPolygonSides;
    p.coords.push_back(cx + b.w / 2.0 * std::cos(t));
    p.coords.push_back(cy + b.h / 2.0 * std::sin(t));
  }
  return p;
}

bool inside(const Polygon& p, double x, double y) {
  bool in = false;
  const std::size_t n = p.coords.size() / 2;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = p.coords[2 * i], yi = p.coords[2 * i + 1];
    const double xj = p.coords[2 * j], yj = p.coords[2 * j + 1];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

}  // namespace

PredKeypoints keypoints_in_box(const BBox& box) {
  PredKeypoints out{};
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    out[i] = {box.x + kLayout[i][0] * box.w, box.y + kLayout[i][1] * box.h, 1.0};
  }
  return out;
}

RasterImage smooth_gradient(int width, int height, int channels) {
  RasterImage img(width, height, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / std::max(1, width - 1);
      const double v = static_cast<double>(y) / std::max(1, height - 1);
      for (int c = 0; c < channels; ++c) {
        const double ripple = 12.0 * std::sin(2.0 * std::numbers::pi * (u * 1.5 + v + 0.2 * c));
        const double val = 40.0 + 120.0 * u + 60.0 * v + ripple;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
    }
  }
  return img;
}

Fixture make_fixture(const Spec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(spec.min_area);
  const double log_hi = std::log(spec.max_area);
  // 12-gon inscribed in a w x 2w box has area 0.75 * w * 2w.
  const double polygon_fill = 0.5 * kPolygonSides * std::sin(2.0 * std::numbers::pi / kPolygonSides) / 4.0;

  Fixture fx;
  std::vector<ImageRecord> images;
  std::vector<PersonAnnotation> annotations;
  std::int64_t next_ann = 1;
  for (int i = 0; i < spec.num_images; ++i) {
    const std::int64_t image_id = i + 1;
    char name[32];
    std::snprintf(name, sizeof(name), "%012lld.png", static_cast<long long>(image_id));
    images.push_back({image_id, spec.width, spec.height, name});
    RasterImage img = smooth_gradient(spec.width, spec.height, 3);

    const int wanted = 1 + static_cast<int>(unit(rng) * spec.max_persons) % spec.max_persons;
    double cursor = 4.0;
    for (int p = 0; p < wanted; ++p) {
      const double area = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
      const double w = std::sqrt(area / (2.0 * polygon_fill));
      const double h = 2.0 * w;
      if (cursor + w + 4.0 > spec.width || h + 8.0 > spec.height) break;
      const double y = 4.0 + unit(rng) * (spec.height - h - 8.0);
      const BBox box{cursor, y, w, h};
      cursor += w + 6.0;

      PersonAnnotation a;
      a.id = next_ann++;
      a.image_id = image_id;
      a.bbox = box;
      const Polygon poly = ellipse_polygon(box);
      a.segmentation = PolygonList{poly};
      a.area = segmentation_area(a.segmentation);
      const auto kps = keypoints_in_box(box);
      for (std::size_t k = 0; k < kNumKeypoints; ++k) a.keypoints[k] = {kps[k].x, kps[k].y, 2};
      annotations.push_back(a);

      const std::array<std::uint8_t, 3> color = {
          static_cast<std::uint8_t>(60 + 40 * p), static_cast<std::uint8_t>(200 - 30 * p),
          static_cast<std::uint8_t>(90 + 50 * p)};
      const int x0 = std::max(0, static_cast<int>(box.x));
      const int x1 = std::min(spec.width - 1, static_cast<int>(box.x + box.w) + 1);
      const int y0 = std::max(0, static_cast<int>(box.y));
      const int y1 = std::min(spec.height - 1, static_cast<int>(box.y + box.h) + 1);
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
          if (!inside(poly, xx + 0.5, yy + 0.5)) continue;
          for (int c = 0; c < 3; ++c) img.at(xx, yy, c) = color[static_cast<std::size_t>(c)];
        }
      }
    }
    fx.images.emplace(image_id, std::move(img));
  }
  fx.dataset = Dataset(std::move(images), std::move(annotations));
  return fx;
}

}  // namespace srpose::synth
