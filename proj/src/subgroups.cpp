#include "srpose/subgroups.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace srpose {

void SubgroupSpec::validate() const {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
    throw std::invalid_argument("subgroup bin width must be positive");
  }
  if (bin_count < 1) throw std::invalid_argument("subgroup bin count must be >= 1");
}

std::optional<int> subgroup_of(double area, const SubgroupSpec& spec) {
  if (!(area > 0.0) || !std::isfinite(area)) return std::nullopt;
  const double k = std::ceil(area / spec.bin_width);
  if (k < 1.0 || k > spec.bin_count) return std::nullopt;
  return static_cast<int>(k);
}

std::optional<int> PinnedLabels::bin_of(std::int64_t annotation_id) const {
  const auto it = bins.find(annotation_id);
  return it == bins.end() ? std::nullopt : it->second;
}

std::vector<std::size_t> PinnedLabels::bin_populations() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(spec.bin_count), 0);
  for (const auto& [id, bin] : bins) {
    if (bin) ++counts[static_cast<std::size_t>(*bin - 1)];
  }
  return counts;
}

PinnedLabels assign_subgroups(const Dataset& reference, const SubgroupSpec& spec,
                              const EvalConfig& config) {
  spec.validate();
  PinnedLabels labels;
  labels.spec = spec;
  for (const auto& a : reference.annotations()) {
    if (!(a.area > 0.0)) labels.warnings.push_back(a.id);
    labels.bins[a.id] = subgroup_of(a.area, spec);
    for (const auto& range : config.area_ranges) {
      if (range.contains(a.area)) labels.sizes[a.id] = range.label;
    }
  }
  return labels;
}

std::vector<SubgroupMetrics> per_subgroup_metrics(const Evaluation& evaluation,
                                                  const PinnedLabels& labels) {
  std::vector<SubgroupMetrics> out;
  const bool detection = evaluation.config().mode == EvalMode::kDetection;
  for (int k = 1; k <= labels.spec.bin_count; ++k) {
    GtSelector sel;
    sel.label = "subgroup " + std::to_string(k);
    sel.counts = [&labels, k](const PersonAnnotation& gt) { return labels.bin_of(gt.id) == k; };
    const MatchTable table = evaluation.match(sel);
    const ApAr score = average_precision(table);
    SubgroupMetrics m;
    m.index = k;
    m.area_lo = labels.spec.label_low(k);
    m.area_hi = labels.spec.label_high(k);
    m.ap = score.ap;
    m.ar = score.ar;
    for (const auto& im : table.images) m.num_persons += im.counted_gts();
    if (detection && m.num_persons > 0) m.detection_rate = detection_rate(table, 0.5);
    out.push_back(m);
  }
  return out;
}

std::vector<std::optional<double>> percent_change(const std::vector<double>& baseline,
                                                  const std::vector<double>& treated) {
  if (baseline.size() != treated.size()) {
    throw std::invalid_argument("percent_change: vectors differ in length");
  }
  std::vector<std::optional<double>> out(baseline.size());
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const double b = baseline[i];
    const double t = treated[i];
    if (b == kNoData || t == kNoData || b == 0.0) continue;
    out[i] = 100.0 * (t - b) / b;
  }
  return out;
}

SubgroupMetric subgroup_metric_from_string(const std::string& name) {
  if (name == "ap") return SubgroupMetric::kAp;
  if (name == "ar") return SubgroupMetric::kAr;
  if (name == "rate" || name == "detection_rate") return SubgroupMetric::kDetectionRate;
  throw std::invalid_argument("unknown subgroup metric '" + name + "'");
}

double metric_value(const SubgroupMetrics& m, SubgroupMetric metric) {
  switch (metric) {
    case SubgroupMetric::kAp:
      return m.ap;
    case SubgroupMetric::kAr:
      return m.ar;
    case SubgroupMetric::kDetectionRate:
      return m.detection_rate;
  }
  return kNoData;
}

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string metric_cell(double v) {
  return (v == kNoData || !std::isfinite(v)) ? std::string() : fixed6(v);
}

std::string bound(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

}  // namespace

std::string subgroup_csv(const std::vector<SubgroupMetrics>& baseline,
                         const std::vector<SubgroupMetrics>& treated,
                         SubgroupMetric metric) {
  if (baseline.size() != treated.size()) {
    throw std::invalid_argument("subgroup_csv: runs have different bin counts");
  }
  std::vector<double> b;
  std::vector<double> t;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    b.push_back(metric_value(baseline[i], metric));
    t.push_back(metric_value(treated[i], metric));
  }
  const auto change = percent_change(b, t);
  std::ostringstream os;
  os << "subgroup_index,area_lo,area_hi,metric_baseline,metric_treated,percent_change,"
        "n_persons\n";
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    os << baseline[i].index << ',' << bound(baseline[i].area_lo) << ','
       << bound(baseline[i].area_hi) << ',' << metric_cell(b[i]) << ',' << metric_cell(t[i])
       << ',' << (change[i] ? fixed6(*change[i]) : std::string()) << ','
       << baseline[i].num_persons << '\n';
  }
  return os.str();
}

}  // namespace srpose
