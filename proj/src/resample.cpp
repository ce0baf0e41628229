#include "srpose/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "srpose/error.hpp"
#include "srpose/parallel.hpp"

namespace srpose {

double cubic_kernel(double x, double a) {
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

std::array<double, 4> cubic_weights(double t, double a) {
  return {cubic_kernel(1.0 + t, a), cubic_kernel(t, a), cubic_kernel(1.0 - t, a),
          cubic_kernel(2.0 - t, a)};
}

namespace {

struct Taps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

std::vector<Taps> axis_taps(int in_size, int out_size, double factor, double a) {
  std::vector<Taps> taps(static_cast<std::size_t>(out_size));
  for (int d = 0; d < out_size; ++d) {
    const double u = source_coordinate(d, factor);
    const double base = std::floor(u);
    const int i0 = static_cast<int>(base);
    Taps& t = taps[static_cast<std::size_t>(d)];
    t.weight = cubic_weights(u - base, a);
    for (int k = 0; k < 4; ++k) t.index[k] = std::clamp(i0 - 1 + k, 0, in_size - 1);
  }
  return taps;
}

std::uint8_t to_code_value(double v) {
  v = std::clamp(v, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

}  // namespace

RasterImage resample(const RasterImage& image, const ResampleSpec& spec) {
  if (!image.valid()) throw std::invalid_argument("resample: invalid image");
  if (!(spec.factor > 0.0) || !std::isfinite(spec.factor)) {
    throw std::invalid_argument("resample: factor must be finite and positive");
  }
  const int in_w = image.width;
  const int in_h = image.height;
  const int ch = image.channels;
  const int out_w = scaled_dimension(in_w, spec.factor);
  const int out_h = scaled_dimension(in_h, spec.factor);

  const auto xtaps = axis_taps(in_w, out_w, spec.factor, spec.a);
  const auto ytaps = axis_taps(in_h, out_h, spec.factor, spec.a);

  // Horizontal pass over every source row, kept in double.
  std::vector<double> rows(static_cast<std::size_t>(in_h) * out_w * ch);
  for (int y = 0; y < in_h; ++y) {
    const std::uint8_t* src = image.samples.data() + static_cast<std::size_t>(y) * in_w * ch;
    double* dst = rows.data() + static_cast<std::size_t>(y) * out_w * ch;
    for (int x = 0; x < out_w; ++x) {
      const Taps& t = xtaps[static_cast<std::size_t>(x)];
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += t.weight[k] * src[t.index[k] * ch + c];
        dst[x * ch + c] = acc;
      }
    }
  }

  RasterImage out(out_w, out_h, ch);
  const std::size_t row_len = static_cast<std::size_t>(out_w) * ch;
  for (int y = 0; y < out_h; ++y) {
    const Taps& t = ytaps[static_cast<std::size_t>(y)];
    const double* r0 = rows.data() + t.index[0] * row_len;
    const double* r1 = rows.data() + t.index[1] * row_len;
    const double* r2 = rows.data() + t.index[2] * row_len;
    const double* r3 = rows.data() + t.index[3] * row_len;
    std::uint8_t* dst = out.samples.data() + static_cast<std::size_t>(y) * row_len;
    for (std::size_t i = 0; i < row_len; ++i) {
      dst[i] = to_code_value(t.weight[0] * r0[i] + t.weight[1] * r1[i] +
                             t.weight[2] * r2[i] + t.weight[3] * r3[i]);
    }
  }
  return out;
}

double psnr(const RasterImage& a, const RasterImage& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels ||
      a.samples.size() != b.samples.size()) {
    throw DimensionError("psnr: images differ in size or channel count");
  }
  if (a.samples.empty()) throw DimensionError("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.samples.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

LrBuildResult build_lr_dataset(const Dataset& dataset,
                               const std::filesystem::path& image_root,
                               double factor, const std::filesystem::path& out_dir,
                               unsigned workers) {
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw std::invalid_argument("build_lr_dataset: factor must be in (0, 1]");
  }
  namespace fs = std::filesystem;
  const Dataset scaled = scale_annotations(dataset, factor);
  const auto& images = scaled.images();
  const fs::path image_dir = out_dir / "images";
  fs::create_directories(image_dir);

  struct Slot {
    ImageRecord record;
    std::string error;
  };
  std::vector<Slot> slots(images.size());
  parallel_for(images.size(), workers, [&](std::size_t i) {
    const ImageRecord& original = dataset.images()[i];
    Slot& slot = slots[i];
    slot.record = images[i];
    try {
      const fs::path src = image_root / original.file_name;
      if (factor == 1.0) {
        if (!fs::exists(src)) throw ImageIoError("missing image " + src.string());
        const fs::path dst = image_dir / original.file_name;
        fs::create_directories(dst.parent_path());
        fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
        return;
      }
      const RasterImage lr = resample(read_image(src), {factor, -0.5});
      fs::path name = fs::path(original.file_name).replace_extension(".png");
      write_png(lr, image_dir / name);
      slot.record.file_name = name.generic_string();
      slot.record.width = lr.width;
      slot.record.height = lr.height;
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  });

  LrBuildResult result;
  std::vector<ImageRecord> kept;
  std::unordered_set<std::int64_t> dropped;
  for (const Slot& slot : slots) {
    if (!slot.error.empty()) {
      result.failures.push_back({slot.record.id, slot.error});
      dropped.insert(slot.record.id);
      continue;
    }
    kept.push_back(slot.record);
    result.manifest[slot.record.id] = {
        (fs::path("images") / slot.record.file_name).generic_string(),
        slot.record.width, slot.record.height, factor};
  }
  std::vector<PersonAnnotation> annotations;
  for (const auto& a : scaled.annotations()) {
    if (!dropped.contains(a.image_id)) annotations.push_back(a);
  }
  result.dataset = Dataset(std::move(kept), std::move(annotations));
  write_dataset(result.dataset, out_dir / "annotations.json");
  write_text_file(out_dir / "manifest.json", manifest_to_json(result.manifest));
  return result;
}

std::string manifest_to_json(const std::map<std::int64_t, ManifestEntry>& manifest) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, e] : manifest) {
    j[std::to_string(id)] = {{"path", e.path},
                             {"width", e.width},
                             {"height", e.height},
                             {"factor", e.factor}};
  }
  return j.dump(2);
}

}  // namespace srpose
