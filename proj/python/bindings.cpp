#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "srpose/coco.hpp"
#include "srpose/error.hpp"
#include "srpose/geometry.hpp"
#include "srpose/heatmap.hpp"
#include "srpose/metrics.hpp"
#include "srpose/report.hpp"
#include "srpose/resample.hpp"
#include "srpose/router.hpp"
#include "srpose/subgroups.hpp"

namespace py = pybind11;
using namespace srpose;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

BBox to_box(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

RasterImage to_image(const U8Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionError("image must be HxW or HxWxC");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  RasterImage img(w, h, c);
  std::memcpy(img.samples.data(), a.data(), img.samples.size());
  return img;
}

U8Array from_image(const RasterImage& img) {
  U8Array out({img.height, img.width, img.channels});
  std::memcpy(out.mutable_data(), img.samples.data(), img.samples.size());
  return out;
}

// keypoints: (17, 2) or (17, 3) array; the third column is visibility for
// ground truth and ignored for predictions.
PersonAnnotation to_gt(const F64Array& kps, double area) {
  if (kps.ndim() != 2 || kps.shape(0) != static_cast<py::ssize_t>(kNumKeypoints) || kps.shape(1) != 3) {
    throw DimensionError("ground truth keypoints must be a (17, 3) array");
  }
  PersonAnnotation gt;
  gt.area = area;
  auto r = kps.unchecked<2>();
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    gt.keypoints[i] = {r(i, 0), r(i, 1), static_cast<int>(r(i, 2))};
  }
  return gt;
}

PredKeypoints to_pred(const F64Array& kps) {
  if (kps.ndim() != 2 || kps.shape(0) != static_cast<py::ssize_t>(kNumKeypoints) || kps.shape(1) < 2) {
    throw DimensionError("predicted keypoints must be a (17, 2) or (17, 3) array");
  }
  PredKeypoints p{};
  auto r = kps.unchecked<2>();
  for (std::size_t i = 0; i < kNumKeypoints; ++i) p[i] = {r(i, 0), r(i, 1), kps.shape(1) > 2 ? r(i, 2) : 1.0};
  return p;
}

Heatmap to_heatmap(const F64Array& a, double stride) {
  if (a.ndim() != 2) throw DimensionError("heatmap must be 2-D");
  Heatmap h(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), stride);
  std::memcpy(h.values.data(), a.data(), h.values.size() * sizeof(double));
  return h;
}

F64Array from_heatmap(const Heatmap& h) {
  F64Array out({h.height, h.width});
  std::memcpy(out.mutable_data(), h.values.data(), h.values.size() * sizeof(double));
  return out;
}

}  // namespace

PYBIND11_MODULE(_srpose, m) {
  m.doc() = "Native core of srpose";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);

  m.def("oks", [](const F64Array& pred, const F64Array& gt, double area) {
    return oks(to_pred(pred), to_gt(gt, area), coco_falloff());
  }, py::arg("prediction"), py::arg("ground_truth"), py::arg("area"));
  m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
    return iou(to_box(a), to_box(b));
  });
  m.def("crowd_overlap", [](const std::array<double, 4>& p, const std::array<double, 4>& c) {
    return crowd_overlap(to_box(p), to_box(c));
  });
  m.def("polygon_area", [](const std::vector<double>& coords) { return polygon_area(coords); });
  m.def("rle_area", [](int height, int width, const std::vector<std::uint32_t>& counts) {
    return rle_area(Rle{height, width, counts});
  }, py::arg("height"), py::arg("width"), py::arg("counts"));
  m.def("scaled_dimension", &scaled_dimension);

  m.def("resample", [](const U8Array& img, double factor, double a) {
    return from_image(resample(to_image(img), {factor, a}));
  }, py::arg("image"), py::arg("factor"), py::arg("a") = -0.5);
  m.def("psnr", [](const U8Array& a, const U8Array& b) { return psnr(to_image(a), to_image(b)); });
  m.def("cubic_weights", &cubic_weights, py::arg("t"), py::arg("a") = -0.5);

  m.def("subgroup_of", [](double area, double bin_width, int bin_count) {
    SubgroupSpec spec;
    spec.bin_width = bin_width;
    spec.bin_count = bin_count;
    spec.validate();
    return subgroup_of(area, spec);
  }, py::arg("area"), py::arg("bin_width") = 500.0, py::arg("bin_count") = 24);
  m.def("percent_change", &percent_change);

  m.def("route", [](const std::vector<std::tuple<std::array<double, 4>, double, std::optional<double>>>& dets,
                    double threshold, int ratio) {
    std::vector<DetectionRecord> records;
    for (const auto& [box, score, area] : dets) records.push_back({0, to_box(box), score, area});
    RouterConfig cfg;
    cfg.area_threshold = threshold;
    cfg.upscale_ratio = ratio;
    std::vector<std::string> warnings;
    py::list out;
    for (const auto& d : route(records, cfg, &warnings)) {
      py::dict row;
      row["branch"] = to_string(d.branch);
      row["initial_area"] = d.initial_area;
      row["area_from_mask"] = d.area_from_mask;
      row["bbox"] = std::array<double, 4>{d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h};
      out.append(row);
    }
    return py::make_tuple(out, warnings);
  }, py::arg("detections"), py::arg("threshold") = kDefaultAreaThreshold, py::arg("ratio") = 4);

  m.def("heatmap_encode", [](double x, double y, double sigma, int width, int height, double stride) {
    const Encoded e = encode(x, y, sigma, {width, height, stride});
    return py::make_tuple(from_heatmap(e.heatmap), e.outside);
  }, py::arg("x"), py::arg("y"), py::arg("sigma"), py::arg("width") = 64, py::arg("height") = 48,
     py::arg("stride") = 4.0);
  m.def("heatmap_decode", [](const F64Array& h, double stride, bool refine) {
    const Decoded d = decode(to_heatmap(h, stride), refine);
    return py::make_tuple(d.x, d.y, d.confidence, d.degenerate);
  }, py::arg("heatmap"), py::arg("stride") = 4.0, py::arg("refine") = true);
  m.def("heatmap_l2", [](const F64Array& a, const F64Array& b) {
    return l2_loss(to_heatmap(a, 1.0), to_heatmap(b, 1.0));
  });

  m.def("evaluate_files", [](const std::string& annotations, const std::string& results, const std::string& mode) {
    const Dataset ds = parse_dataset(annotations);
    const ResultSet rs = parse_results(results, &ds);
    EvalConfig cfg;
    cfg.mode = eval_mode_from_string(mode);
    const Evaluation ev = cfg.mode == EvalMode::kKeypoints ? Evaluation::keypoints(ds, rs.keypoints, cfg)
                                                          : Evaluation::detections(ds, rs.detections, cfg);
    return report_to_json(evaluate(ev));
  }, py::arg("annotations"), py::arg("results"), py::arg("mode") = "keypoints");
}
