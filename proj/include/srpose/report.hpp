#pragma once

#include <string>
#include <utility>
#include <vector>

#include "srpose/metrics.hpp"
#include "srpose/subgroups.hpp"

namespace srpose {

std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);

// Aligned text table, one row per labelled run. Detection mode shows
// AP, AP_S, AP_M, AP_L, AR, AR_S, AR_M, AR_L; keypoint mode drops the
// small-person columns. No-data cells print as "-".
std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

// Same rows as CSV (label first, then the table columns).
std::string format_table_csv(const std::vector<std::pair<std::string, MetricReport>>& rows);

std::string subgroups_to_json(const std::vector<SubgroupMetrics>& groups);

}  // namespace srpose
