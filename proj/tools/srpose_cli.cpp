// srpose: dataset generation, super-resolution, evaluation, subgroup
// analysis and threshold-routed pose runs.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 backend error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "srpose/backend.hpp"
#include "srpose/coco.hpp"
#include "srpose/error.hpp"
#include "srpose/image.hpp"
#include "srpose/metrics.hpp"
#include "srpose/parallel.hpp"
#include "srpose/report.hpp"
#include "srpose/resample.hpp"
#include "srpose/router.hpp"
#include "srpose/subgroups.hpp"
#include "srpose/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace srpose;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;

// --config reader. Top-level scalars configure the main command; objects
// name a subcommand: {"workers": 2, "route": {"threshold": 3500}}. A run
// manifest is accepted as-is, so any command can be replayed from one.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError("config", e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config", "top level must be an object");
    if (j.contains("run_id") && j.contains("config")) {
      json replay = j.at("config");
      if (j.contains("workers")) replay["workers"] = j.at("workers");
      j = replay;
    }
    std::vector<CLI::ConfigItem> items;
    add(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void add(const json& obj, const std::vector<std::string>& parents,
                  std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto deeper = parents;
        deeper.push_back(key);
        add(value, deeper, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(item);
    }
  }
};

std::string hex(const unsigned char* p, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < n; ++i) {
    out += digits[p[i] >> 4];
    out += digits[p[i] & 15];
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) { EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr); }
  void update(const std::string& bytes) { EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size()); }
  void update_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot read " + path.string());
    char buf[1 << 16];
    while (in) {
      in.read(buf, sizeof(buf));
      EVP_DigestUpdate(ctx_.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
  }
  std::string hexdigest() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &n);
    return hex(md, n);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string file_sha256(const fs::path& p) {
  Sha256 h;
  h.update_file(p);
  return h.hexdigest();
}

// Files under `p` in name order (or `p` itself), relative names folded into
// the hash so renames show up.
void hash_input(Sha256& h, const fs::path& p) {
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      h.update(fs::relative(f, p).generic_string());
      h.update_file(f);
    }
  } else {
    h.update(p.filename().generic_string());
    h.update_file(p);
  }
}

// Everything needed to re-run a command: its option values (in the --config
// format), a hash over its inputs, backend identities and each output.
class RunManifest {
 public:
  RunManifest(const CLI::App& sub, unsigned workers) : command_(sub.get_name()) {
    json opts = json::object();
    for (const CLI::Option* o : sub.get_options()) {
      const std::string name = o->get_single_name();
      if (name.empty() || name == "help" || o->get_lnames().empty()) continue;
      const auto& r = o->results();
      if (r.empty()) continue;
      if (o->get_items_expected_max() > 1) {
        opts[name] = r;
      } else {
        opts[name] = r.back();
      }
    }
    config_ = {{command_, opts}};
    workers_ = workers;
  }

  void input(const fs::path& p) {
    if (!p.empty()) inputs_.push_back(p);
  }
  void backend(const std::string& role, const std::string& id, const fs::path& exe = {}) {
    json b = {{"role", role}, {"id", id}};
    if (!exe.empty()) b["sha256"] = file_sha256(exe);
    backends_.push_back(b);
  }
  void output(const fs::path& p) { outputs_.push_back(p); }

  void write(const fs::path& path) {
    Sha256 in;
    for (const auto& p : inputs_) hash_input(in, p);
    const std::string input_hash = in.hexdigest();
    Sha256 id;
    id.update(config_.dump());
    id.update(input_hash);
    for (const auto& b : backends_) id.update(b.dump());
    json outs = json::array();
    for (const auto& p : outputs_) {
      json o = {{"path", p.generic_string()}};
      if (fs::is_regular_file(p)) o["sha256"] = file_sha256(p);
      outs.push_back(o);
    }
    json j = {{"run_id", id.hexdigest().substr(0, 16)},
              {"command", command_},
              {"config", config_},
              {"workers", workers_},
              {"input_sha256", input_hash},
              {"backends", backends_},
              {"outputs", outs}};
    write_text_file(path, j.dump(2) + "\n");
    std::cerr << "manifest: " << path.string() << "\n";
  }

 private:
  std::string command_;
  json config_;
  unsigned workers_ = 1;
  std::vector<fs::path> inputs_;
  json backends_ = json::array();
  std::vector<fs::path> outputs_;
};

double parse_threshold(const std::string& s) {
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size() || !(v >= 0.0)) throw CLI::ValidationError("--threshold", "must be >= 0 or 'inf'");
  return v;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

EvalConfig eval_config(const std::string& mode, int max_dets) {
  EvalConfig cfg;
  cfg.mode = eval_mode_from_string(mode);
  cfg.max_detections = max_dets;
  if (cfg.mode == EvalMode::kKeypoints) {
    cfg.area_ranges.erase(std::remove_if(cfg.area_ranges.begin(), cfg.area_ranges.end(),
                                         [](const AreaRange& r) { return r.label == "small"; }),
                          cfg.area_ranges.end());
  }
  cfg.validate();
  return cfg;
}

Evaluation make_evaluation(const Dataset& ds, const ResultSet& results, const EvalConfig& cfg) {
  if (cfg.mode == EvalMode::kKeypoints) {
    if (results.keypoints.empty() && !results.detections.empty()) {
      throw ValidationError("keypoint evaluation needs keypoint results", {});
    }
    return Evaluation::keypoints(ds, results.keypoints, cfg);
  }
  if (results.detections.empty() && !results.keypoints.empty()) {
    throw ValidationError("detection evaluation needs box results", {});
  }
  return Evaluation::detections(ds, results.detections, cfg);
}

// ---- options ----

struct Global {
  unsigned workers = default_workers();
};

struct DownsampleOpts {
  std::string annotations, images, out;
  double factor = 0.5;
};

struct UpscaleOpts {
  std::string images, out, backend;
  int scale = 4;
};

struct EvalOpts {
  std::string annotations, results, mode = "keypoints", reference, out, csv, subgroups_out, label = "run";
  bool subgroups = false;
  double bin_width = 500.0;
  int bin_count = 24;
  int max_dets = 20;
};

struct SubgroupOpts {
  std::string reference, baseline, treated, baseline_annotations, treated_annotations, mode = "keypoints",
              metric = "ap", out;
  double bin_width = 500.0;
  int bin_count = 24;
  int max_dets = 20;
};

struct RouteOpts {
  std::string annotations, images, out, sr_backend, detector, keypoints, threshold = "3500";
  int ratio = 4;
  double max_failures = 0.10;
  int max_dets = 20;
};

struct ReportOpts {
  std::vector<std::string> inputs;
  std::string csv;
};

struct SynthOpts {
  std::string out;
  int images = 20, width = 320, height = 240, max_persons = 3;
  double min_area = 250.0, max_area = 12000.0;
  std::uint64_t seed = 0;
};

// ---- commands ----

int cmd_downsample(const CLI::App& sub, const DownsampleOpts& o, const Global& g) {
  const Dataset ds = parse_dataset(o.annotations);
  const LrBuildResult res = build_lr_dataset(ds, o.images, o.factor, o.out, g.workers);
  for (const auto& f : res.failures) std::cerr << "warning: image " << f.image_id << ": " << f.message << "\n";
  RunManifest m(sub, g.workers);
  m.input(o.annotations);
  m.input(o.images);
  m.backend("resampler", "bicubic-a-0.5");
  m.output(fs::path(o.out) / "annotations.json");
  m.output(fs::path(o.out) / "manifest.json");
  for (const auto& [id, e] : res.manifest) m.output(fs::path(o.out) / e.path);
  m.write(fs::path(o.out) / "run_manifest.json");
  std::cout << res.dataset.images().size() << " images, " << res.dataset.annotations().size()
            << " people written to " << o.out << " (" << res.failures.size() << " failed)\n";
  return 0;
}

int cmd_upscale(const CLI::App& sub, const UpscaleOpts& o, const Global& g) {
  const fs::path in(o.images), out(o.out);
  fs::create_directories(out);
  RunManifest m(sub, g.workers);
  m.input(in);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  if (!o.backend.empty()) {
    SubprocessBackend backend(o.backend, out / ".work");
    backend.upscale_directory(in, out, o.scale);
    fs::remove_all(out / ".work");
    m.backend("super_resolver", backend.id(), o.backend);
    for (const auto& f : files) m.output(out / fs::path(f.filename()).replace_extension(".png"));
  } else if (o.scale == 1) {
    for (const auto& f : files) {
      fs::copy_file(f, out / f.filename(), fs::copy_options::overwrite_existing);
      m.output(out / f.filename());
    }
    m.backend("super_resolver", "copy");
  } else {
    BicubicUpscaler bicubic;
    parallel_for(files.size(), g.workers, [&](std::size_t i) {
      write_png(bicubic.upscale(read_image(files[i]), o.scale, 0),
                out / fs::path(files[i].filename()).replace_extension(".png"));
    });
    for (const auto& f : files) m.output(out / fs::path(f.filename()).replace_extension(".png"));
    m.backend("super_resolver", bicubic.id());
  }
  m.write(out / "run_manifest.json");
  std::cout << files.size() << " images upscaled x" << o.scale << " into " << o.out << "\n";
  return 0;
}

int cmd_eval(const CLI::App& sub, const EvalOpts& o, const Global& g) {
  const Dataset ds = parse_dataset(o.annotations);
  const ResultSet results = parse_results(o.results, &ds);
  const EvalConfig cfg = eval_config(o.mode, o.max_dets);
  const Evaluation ev = make_evaluation(ds, results, cfg);

  SubgroupSpec spec;
  spec.bin_width = o.bin_width;
  spec.bin_count = o.bin_count;
  spec.reference = o.reference.empty() ? o.annotations : o.reference;
  spec.validate();
  const Dataset reference = o.reference.empty() ? ds : parse_dataset(o.reference);
  const PinnedLabels pinned = assign_subgroups(reference, spec, cfg);
  for (const auto id : pinned.warnings) std::cerr << "warning: annotation " << id << " has no positive area\n";

  MetricReport rep = evaluate(ev, o.reference.empty() ? nullptr : &pinned.sizes);
  std::cout << format_table({{o.label, rep}});

  RunManifest m(sub, g.workers);
  m.input(o.annotations);
  m.input(o.results);
  m.input(o.reference);
  if (o.subgroups) {
    const auto groups = per_subgroup_metrics(ev, pinned);
    for (const auto& grp : groups) {
      char label[64];
      std::snprintf(label, sizeof(label), "%g-%g", spec.label_low(grp.index), spec.label_high(grp.index));
      rep.subgroups.push_back({label, grp.ap, grp.ar, grp.num_persons});
    }
    if (!o.subgroups_out.empty()) {
      write_text_file(o.subgroups_out, subgroups_to_json(groups) + "\n");
      m.output(o.subgroups_out);
    } else {
      std::cout << subgroups_to_json(groups) << "\n";
    }
  }
  if (!o.out.empty()) {
    write_text_file(o.out, report_to_json(rep) + "\n");
    m.output(o.out);
  }
  if (!o.csv.empty()) {
    write_text_file(o.csv, format_table_csv({{o.label, rep}}));
    m.output(o.csv);
  }
  if (!o.out.empty()) m.write(fs::path(o.out).replace_extension(".manifest.json"));
  return 0;
}

int cmd_subgroups(const CLI::App& sub, const SubgroupOpts& o, const Global& g) {
  const Dataset reference = parse_dataset(o.reference);
  const Dataset base_ds = o.baseline_annotations.empty() ? reference : parse_dataset(o.baseline_annotations);
  const Dataset treat_ds = o.treated_annotations.empty() ? reference : parse_dataset(o.treated_annotations);
  const EvalConfig cfg = eval_config(o.mode, o.max_dets);
  SubgroupSpec spec;
  spec.bin_width = o.bin_width;
  spec.bin_count = o.bin_count;
  spec.reference = o.reference;
  spec.validate();
  const PinnedLabels pinned = assign_subgroups(reference, spec, cfg);
  for (const auto id : pinned.warnings) std::cerr << "warning: annotation " << id << " has no positive area\n";

  const ResultSet base_res = parse_results(o.baseline, &base_ds);
  const ResultSet treat_res = parse_results(o.treated, &treat_ds);
  const auto base = per_subgroup_metrics(make_evaluation(base_ds, base_res, cfg), pinned);
  const auto treat = per_subgroup_metrics(make_evaluation(treat_ds, treat_res, cfg), pinned);
  const std::string csv = subgroup_csv(base, treat, subgroup_metric_from_string(o.metric));

  RunManifest m(sub, g.workers);
  for (const auto& p : {o.reference, o.baseline, o.treated, o.baseline_annotations, o.treated_annotations}) m.input(p);
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(o.out, csv);
    m.output(o.out);
    m.write(fs::path(o.out).replace_extension(".manifest.json"));
  }
  return 0;
}

int cmd_route(const CLI::App& sub, const RouteOpts& o, const Global& g) {
  const Dataset ds = parse_dataset(o.annotations);
  RouterConfig cfg;
  cfg.upscale_ratio = o.ratio;
  cfg.area_threshold = parse_threshold(o.threshold);
  cfg.workers = g.workers;
  cfg.max_failure_fraction = o.max_failures;
  cfg.validate();

  const fs::path out(o.out);
  fs::create_directories(out);
  std::vector<PipelineInput> inputs;
  for (const auto& im : ds.images()) inputs.push_back(PipelineInput::from_file(im.id, fs::path(o.images) / im.file_name));

  RunManifest m(sub, g.workers);
  m.input(o.annotations);
  m.input(o.images);
  std::unique_ptr<SubprocessBackend> sr, det, kp;
  if (!o.sr_backend.empty()) {
    sr = std::make_unique<SubprocessBackend>(o.sr_backend, out / ".work" / "sr");
    m.backend("super_resolver", sr->id(), o.sr_backend);
  } else {
    m.backend("super_resolver", BicubicUpscaler().id());
  }
  det = std::make_unique<SubprocessBackend>(o.detector, out / ".work" / "detect");
  kp = std::make_unique<SubprocessBackend>(o.keypoints, out / ".work" / "keypoints");
  m.backend("detector", det->id(), o.detector);
  m.backend("keypoints", kp->id(), o.keypoints);

  const PipelineResult res = run_pipeline(inputs, cfg, {sr.get(), det.get(), kp.get()});
  fs::remove_all(out / ".work");
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& f : res.failures) std::cerr << "warning: image " << f.image_id << " skipped: " << f.message << "\n";

  write_results(res.keypoints, out / "keypoints.json");
  write_text_file(out / "decisions.jsonl", decisions_to_jsonl(res.decisions));
  const EvalConfig ecfg = eval_config("keypoints", o.max_dets);
  const MetricReport rep = evaluate(Evaluation::keypoints(ds, res.keypoints, ecfg));
  write_text_file(out / "report.json", report_to_json(rep) + "\n");
  for (const char* f : {"keypoints.json", "decisions.jsonl", "report.json"}) m.output(out / f);
  m.write(out / "run_manifest.json");

  std::size_t n_sr = 0;
  for (const auto& d : res.decisions) n_sr += d.branch == Branch::kSuperResolved;
  std::cout << res.decisions.size() << " people routed (" << n_sr << " super-resolved, "
            << res.decisions.size() - n_sr << " original), " << res.failures.size() << " images skipped\n";
  std::cout << format_table({{"T=" + o.threshold, rep}});
  return 0;
}

int cmd_report(const ReportOpts& o) {
  std::vector<std::pair<std::string, MetricReport>> rows;
  for (const auto& spec : o.inputs) {
    const auto eq = spec.find('=');
    const std::string label = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    rows.emplace_back(label, report_from_json(read_text_file(path)));
  }
  std::cout << format_table(rows);
  if (!o.csv.empty()) write_text_file(o.csv, format_table_csv(rows));
  return 0;
}

int cmd_synth(const CLI::App& sub, const SynthOpts& o, const Global& g) {
  synth::Spec spec;
  spec.num_images = o.images;
  spec.width = o.width;
  spec.height = o.height;
  spec.max_persons = o.max_persons;
  spec.min_area = o.min_area;
  spec.max_area = o.max_area;
  spec.seed = o.seed;
  const synth::Fixture fx = synth::make_fixture(spec);
  const fs::path out(o.out);
  fs::create_directories(out / "images");
  RunManifest m(sub, g.workers);
  for (const auto& im : fx.dataset.images()) {
    write_png(fx.images.at(im.id), out / "images" / im.file_name);
    m.output(out / "images" / im.file_name);
  }
  write_dataset(fx.dataset, out / "annotations.json");
  m.output(out / "annotations.json");
  m.write(out / "run_manifest.json");
  std::cout << fx.dataset.images().size() << " images, " << fx.dataset.annotations().size() << " people\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Super-resolution and human pose estimation experiments"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config; command-line flags win");
  Global g;
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);

  DownsampleOpts ds;
  auto* c_ds = app.add_subcommand("downsample", "Build a bicubic low-resolution copy of a dataset");
  c_ds->add_option("--annotations", ds.annotations, "COCO keypoint annotations")->required()->check(CLI::ExistingFile);
  c_ds->add_option("--images", ds.images, "Image directory")->required()->check(CLI::ExistingDirectory);
  c_ds->add_option("--factor", ds.factor, "Scale factor in (0, 1]")->capture_default_str();
  c_ds->add_option("--out", ds.out, "Output directory")->required();

  UpscaleOpts up;
  auto* c_up = app.add_subcommand("upscale", "Super-resolve a directory of images");
  c_up->add_option("--images", up.images, "Image directory")->required()->check(CLI::ExistingDirectory);
  c_up->add_option("--out", up.out, "Output directory")->required();
  c_up->add_option("--scale", up.scale, "Integer ratio")->capture_default_str()->check(CLI::PositiveNumber);
  c_up->add_option("--backend", up.backend, "Protocol executable (default: built-in bicubic)");

  EvalOpts ev;
  auto* c_ev = app.add_subcommand("eval", "Score results against annotations");
  c_ev->add_option("--annotations", ev.annotations)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--results", ev.results)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--mode", ev.mode)->capture_default_str()->check(CLI::IsMember({"keypoints", "detection"}));
  c_ev->add_option("--reference", ev.reference, "Dataset that pins size labels (default: --annotations)")->check(CLI::ExistingFile);
  c_ev->add_flag("--subgroups", ev.subgroups, "Also score every area subgroup");
  c_ev->add_option("--bin-width", ev.bin_width)->capture_default_str();
  c_ev->add_option("--bin-count", ev.bin_count)->capture_default_str();
  c_ev->add_option("--max-dets", ev.max_dets)->capture_default_str();
  c_ev->add_option("--label", ev.label, "Row label in the table")->capture_default_str();
  c_ev->add_option("--out", ev.out, "Report JSON");
  c_ev->add_option("--csv", ev.csv, "Table CSV");
  c_ev->add_option("--subgroups-out", ev.subgroups_out, "Subgroup JSON");

  SubgroupOpts sg;
  auto* c_sg = app.add_subcommand("subgroups", "Per-subgroup comparison of two runs");
  c_sg->add_option("--reference", sg.reference, "Dataset that pins the subgroup labels")->required()->check(CLI::ExistingFile);
  c_sg->add_option("--baseline", sg.baseline, "Baseline results")->required()->check(CLI::ExistingFile);
  c_sg->add_option("--treated", sg.treated, "Treated results")->required()->check(CLI::ExistingFile);
  c_sg->add_option("--baseline-annotations", sg.baseline_annotations)->check(CLI::ExistingFile);
  c_sg->add_option("--treated-annotations", sg.treated_annotations)->check(CLI::ExistingFile);
  c_sg->add_option("--mode", sg.mode)->capture_default_str()->check(CLI::IsMember({"keypoints", "detection"}));
  c_sg->add_option("--metric", sg.metric)->capture_default_str()->check(CLI::IsMember({"ap", "ar", "detection_rate"}));
  c_sg->add_option("--bin-width", sg.bin_width)->capture_default_str();
  c_sg->add_option("--bin-count", sg.bin_count)->capture_default_str();
  c_sg->add_option("--max-dets", sg.max_dets)->capture_default_str();
  c_sg->add_option("--out", sg.out, "CSV output (default: stdout)");

  RouteOpts rt;
  auto* c_rt = app.add_subcommand("route", "Threshold-routed pose estimation run");
  c_rt->add_option("--annotations", rt.annotations)->required()->check(CLI::ExistingFile);
  c_rt->add_option("--images", rt.images)->required()->check(CLI::ExistingDirectory);
  c_rt->add_option("--out", rt.out, "Output directory")->required();
  c_rt->add_option("--threshold", rt.threshold, "Person area threshold in original px^2, or 'inf'")->capture_default_str();
  c_rt->add_option("--ratio", rt.ratio)->capture_default_str();
  c_rt->add_option("--sr-backend", rt.sr_backend, "Protocol executable (default: built-in bicubic)");
  c_rt->add_option("--detector", rt.detector, "Protocol executable")->required();
  c_rt->add_option("--keypoints", rt.keypoints, "Protocol executable")->required();
  c_rt->add_option("--max-failures", rt.max_failures, "Abort above this failed-image fraction")->capture_default_str();
  c_rt->add_option("--max-dets", rt.max_dets)->capture_default_str();

  ReportOpts rp;
  auto* c_rp = app.add_subcommand("report", "Tabulate report JSON files");
  c_rp->add_option("inputs", rp.inputs, "label=report.json ...")->required();
  c_rp->add_option("--csv", rp.csv);

  SynthOpts sy;
  auto* c_sy = app.add_subcommand("synth", "Write a seeded synthetic person dataset");
  c_sy->add_option("--out", sy.out)->required();
  c_sy->add_option("--images", sy.images)->capture_default_str();
  c_sy->add_option("--width", sy.width)->capture_default_str();
  c_sy->add_option("--height", sy.height)->capture_default_str();
  c_sy->add_option("--max-persons", sy.max_persons)->capture_default_str();
  c_sy->add_option("--min-area", sy.min_area)->capture_default_str();
  c_sy->add_option("--max-area", sy.max_area)->capture_default_str();
  c_sy->add_option("--seed", sy.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_ds) return cmd_downsample(*c_ds, ds, g);
    if (*c_up) return cmd_upscale(*c_up, up, g);
    if (*c_ev) return cmd_eval(*c_ev, ev, g);
    if (*c_sg) return cmd_subgroups(*c_sg, sg, g);
    if (*c_rt) return cmd_route(*c_rt, rt, g);
    if (*c_rp) return cmd_report(rp);
    if (*c_sy) return cmd_synth(*c_sy, sy, g);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
