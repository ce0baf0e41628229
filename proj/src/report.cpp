#include "srpose/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "srpose/error.hpp"

namespace srpose {

using json = nlohmann::json;

namespace {

json group_json(const GroupScore& g) {
  return {{"label", g.label}, {"ap", g.ap}, {"ar", g.ar}, {"num_gts", g.num_gts}};
}

GroupScore group_from(const json& j) {
  return {j.at("label").get<std::string>(), j.at("ap").get<double>(), j.at("ar").get<double>(),
          j.at("num_gts").get<std::size_t>()};
}

struct Column {
  std::string name;
  std::string range;  // empty: overall
  bool ap = true;
};

std::vector<Column> columns_for(EvalMode mode) {
  std::vector<std::string> ranges = {"small", "medium", "large"};
  if (mode == EvalMode::kKeypoints) ranges = {"medium", "large"};
  std::vector<Column> cols;
  for (const bool ap : {true, false}) {
    const std::string base = ap ? "AP" : "AR";
    cols.push_back({base, "", ap});
    for (const auto& r : ranges) {
      cols.push_back({base + "_" + static_cast<char>(std::toupper(r[0])), r, ap});
    }
  }
  return cols;
}

std::string cell(const MetricReport& rep, const Column& col) {
  double v = kNoData;
  if (col.range.empty()) {
    v = col.ap ? rep.ap : rep.ar;
  } else if (const GroupScore* g = rep.range(col.range)) {
    v = col.ap ? g->ap : g->ar;
  }
  if (v == kNoData) return "-";
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

EvalMode table_mode(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  if (rows.empty()) return EvalMode::kKeypoints;
  const EvalMode mode = rows.front().second.mode;
  for (const auto& [label, rep] : rows) {
    if (rep.mode != mode) throw std::invalid_argument("cannot tabulate mixed evaluation modes");
  }
  return mode;
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
  json ranges = json::array();
  for (const auto& g : report.ranges) ranges.push_back(group_json(g));
  json subgroups = json::array();
  for (const auto& g : report.subgroups) subgroups.push_back(group_json(g));
  json j = {{"mode", to_string(report.mode)},
            {"ap", report.ap},
            {"ar", report.ar},
            {"ranges", ranges},
            {"subgroups", subgroups},
            {"num_gts", report.num_gts},
            {"num_predictions", report.num_predictions}};
  return j.dump(2);
}

MetricReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  try {
    MetricReport r;
    r.mode = eval_mode_from_string(j.at("mode").get<std::string>());
    r.ap = j.at("ap").get<double>();
    r.ar = j.at("ar").get<double>();
    for (const auto& g : j.at("ranges")) r.ranges.push_back(group_from(g));
    for (const auto& g : j.value("subgroups", json::array())) r.subgroups.push_back(group_from(g));
    r.num_gts = j.value("num_gts", std::size_t{0});
    r.num_predictions = j.value("num_predictions", std::size_t{0});
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema error: ") + e.what(), 0);
  }
}

std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  const auto cols = columns_for(table_mode(rows));
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Dataset"};
  for (const auto& c : cols) header.push_back(c.name);
  grid.push_back(header);
  for (const auto& [label, rep] : rows) {
    std::vector<std::string> line{label};
    for (const auto& c : cols) line.push_back(cell(rep, c));
    grid.push_back(line);
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], line[i].size());
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t i = 0; i < grid[r].size(); ++i) {
      const auto& s = grid[r][i];
      if (i == 0) {
        os << s << std::string(widths[i] - s.size(), ' ');
      } else {
        os << "  " << std::string(widths[i] - s.size(), ' ') << s;
      }
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = widths[0];
      for (std::size_t i = 1; i < widths.size(); ++i) total += widths[i] + 2;
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

std::string format_table_csv(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  const auto cols = columns_for(table_mode(rows));
  std::ostringstream os;
  os << "dataset";
  for (const auto& c : cols) os << ',' << c.name;
  os << '\n';
  for (const auto& [label, rep] : rows) {
    os << label;
    for (const auto& c : cols) {
      const std::string v = cell(rep, c);
      os << ',' << (v == "-" ? "" : v);
    }
    os << '\n';
  }
  return os.str();
}

std::string subgroups_to_json(const std::vector<SubgroupMetrics>& groups) {
  json out = json::array();
  for (const auto& g : groups) {
    out.push_back({{"subgroup_index", g.index},
                   {"area_lo", g.area_lo},
                   {"area_hi", g.area_hi},
                   {"ap", g.ap},
                   {"ar", g.ar},
                   {"detection_rate", g.detection_rate},
                   {"n_persons", g.num_persons}});
  }
  return out.dump(2);
}

}  // namespace srpose
