#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "srpose/coco.hpp"
#include "srpose/metrics.hpp"

namespace srpose {

// Fixed-width segmentation-area bins ((k-1)*w, k*w] for k = 1..count.
struct SubgroupSpec {
  double bin_width = 500.0;
  int bin_count = 24;
  std::string reference;  // id of the dataset that pins the labels

  void validate() const;
  // Bin bounds as whole-pixel labels: lower = (k-1)*w + 1, upper = k*w.
  double label_low(int bin) const { return (bin - 1) * bin_width + 1.0; }
  double label_high(int bin) const { return bin * bin_width; }
};

// 1-based bin for `area`, or nullopt when non-positive or past the last bin.
std::optional<int> subgroup_of(double area, const SubgroupSpec& spec);

// Labels computed once on the reference (low-resolution) dataset and reused
// when scoring any run derived from it, so a person keeps its group even
// after super-resolution changes its pixel area.
struct PinnedLabels {
  SubgroupSpec spec;
  std::unordered_map<std::int64_t, std::optional<int>> bins;
  SizeLabels sizes;
  std::vector<std::int64_t> warnings;  // annotations with non-positive area

  std::optional<int> bin_of(std::int64_t annotation_id) const;
  // Persons per bin, index 0 = bin 1.
  std::vector<std::size_t> bin_populations() const;
};

PinnedLabels assign_subgroups(const Dataset& reference, const SubgroupSpec& spec,
                              const EvalConfig& config = {});

struct SubgroupMetrics {
  int index = 0;
  double area_lo = 0.0;
  double area_hi = 0.0;
  double ap = kNoData;
  double ar = kNoData;
  double detection_rate = kNoData;
  std::size_t num_persons = 0;
};

// One entry per bin; persons outside the bin are treated as ignore.
// detection_rate is filled in detection mode (IoU 0.5) only.
std::vector<SubgroupMetrics> per_subgroup_metrics(const Evaluation& evaluation,
                                                  const PinnedLabels& labels);

// 100 * (treated - baseline) / baseline per entry; nullopt where either side
// is a no-data sentinel or the baseline is zero.
std::vector<std::optional<double>> percent_change(const std::vector<double>& baseline,
                                                  const std::vector<double>& treated);

enum class SubgroupMetric { kAp, kAr, kDetectionRate };
SubgroupMetric subgroup_metric_from_string(const std::string& name);
double metric_value(const SubgroupMetrics& m, SubgroupMetric metric);

// Plot data: subgroup_index, area_lo, area_hi, metric_baseline,
// metric_treated, percent_change, n_persons.
std::string subgroup_csv(const std::vector<SubgroupMetrics>& baseline,
                         const std::vector<SubgroupMetrics>& treated,
                         SubgroupMetric metric);

}  // namespace srpose
