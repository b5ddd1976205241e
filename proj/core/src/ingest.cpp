#include "addcat/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "text_util.hpp"

namespace addcat::ingest {

namespace {

using detail::format_double;
using detail::parse_double;
using detail::split_csv_line;
using detail::to_lower;
using detail::trim;

constexpr std::array<ColumnRole, kColumnRoleCount> kWriteOrder = {
    ColumnRole::Latitude, ColumnRole::Longitude, ColumnRole::Timestamp, ColumnRole::Speed,
    ColumnRole::GsenX,    ColumnRole::GsenY,     ColumnRole::GsenZ,     ColumnRole::GyroX,
    ColumnRole::GyroY,    ColumnRole::GyroZ,
};

const char* role_name(ColumnRole role) {
  switch (role) {
    case ColumnRole::Timestamp: return "timestamp";
    case ColumnRole::Latitude: return "latitude";
    case ColumnRole::Longitude: return "longitude";
    case ColumnRole::Speed: return "speed";
    case ColumnRole::GsenX: return "gsen_x";
    case ColumnRole::GsenY: return "gsen_y";
    case ColumnRole::GsenZ: return "gsen_z";
    case ColumnRole::GyroX: return "gyro_x";
    case ColumnRole::GyroY: return "gyro_y";
    case ColumnRole::GyroZ: return "gyro_z";
  }
  return "?";
}

double& field_ref(RawSample& s, ColumnRole role) {
  switch (role) {
    case ColumnRole::Timestamp: return s.timestamp;
    case ColumnRole::Latitude: return s.latitude;
    case ColumnRole::Longitude: return s.longitude;
    case ColumnRole::Speed: return s.speed;
    case ColumnRole::GsenX: return s.gsen_x;
    case ColumnRole::GsenY: return s.gsen_y;
    case ColumnRole::GsenZ: return s.gsen_z;
    case ColumnRole::GyroX: return s.gyro_x;
    case ColumnRole::GyroY: return s.gyro_y;
    case ColumnRole::GyroZ: return s.gyro_z;
  }
  throw std::logic_error("bad column role");
}

double field_value(const RawSample& s, ColumnRole role) {
  return field_ref(const_cast<RawSample&>(s), role);
}

// Strips a UTF-8 BOM and a trailing carriage return.
std::string_view clean_line(std::string_view line, bool first) {
  if (first && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::optional<bool> parse_flag(std::string_view cell) {
  const std::string v = to_lower(trim(cell));
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  return std::nullopt;
}

}  // namespace

ColumnMap ColumnMap::defaults() {
  ColumnMap map;
  for (ColumnRole role : kWriteOrder) map.names[role] = role_name(role);
  return map;
}

TripParseResult parse_trip(std::istream& source, const ColumnMap& columns,
                           const ParseOptions& options) {
  std::string line;
  if (!std::getline(source, line)) throw std::runtime_error("parse_trip: no data rows");
  const std::string_view header = clean_line(line, true);

  std::map<std::string, std::size_t> header_index;
  {
    const auto cells = split_csv_line(header);
    for (std::size_t i = 0; i < cells.size(); ++i) header_index[to_lower(trim(cells[i]))] = i;
  }

  std::array<std::size_t, kColumnRoleCount> role_col{};
  std::size_t max_col = 0;
  for (ColumnRole role : kWriteOrder) {
    const auto it = columns.names.find(role);
    if (it == columns.names.end())
      throw std::runtime_error(std::string("parse_trip: column map lacks role ") + role_name(role));
    const auto hit = header_index.find(to_lower(trim(it->second)));
    if (hit == header_index.end())
      throw std::runtime_error("parse_trip: missing required column '" + it->second + "'");
    role_col[static_cast<int>(role)] = hit->second;
    max_col = std::max(max_col, hit->second);
  }

  TripParseResult result;
  std::size_t line_no = 1;
  bool monotone_warned = false;
  while (std::getline(source, line)) {
    ++line_no;
    const std::string_view row = clean_line(line, false);
    if (trim(row).empty()) continue;
    ++result.data_rows;

    const auto cells = split_csv_line(row);
    if (cells.size() <= max_col) {
      result.rejected.push_back({line_no, "too few columns"});
      continue;
    }

    RawSample sample;
    bool ok = true;
    for (ColumnRole role : kWriteOrder) {
      const auto value = parse_double(cells[role_col[static_cast<int>(role)]]);
      if (!value || !std::isfinite(*value)) {
        result.rejected.push_back(
            {line_no, std::string("non-numeric or non-finite ") + role_name(role)});
        ok = false;
        break;
      }
      field_ref(sample, role) = *value;
    }
    if (!ok) continue;

    if (sample.speed < 0.0) {
      result.rejected.push_back({line_no, "negative speed"});
      continue;
    }
    if (!result.samples.empty() && sample.timestamp < result.samples.back().timestamp) {
      if (options.strict)
        throw std::runtime_error("parse_trip: non-monotone timestamp at line " +
                                 std::to_string(line_no));
      if (!monotone_warned) {
        result.warnings.push_back("non-monotone timestamps, first at line " +
                                  std::to_string(line_no));
        monotone_warned = true;
      }
    }
    result.samples.push_back(sample);
  }

  if (result.data_rows == 0) throw std::runtime_error("parse_trip: no data rows");

  if (result.samples.size() >= 2) {
    std::vector<double> gaps;
    gaps.reserve(result.samples.size() - 1);
    for (std::size_t i = 1; i < result.samples.size(); ++i)
      gaps.push_back(result.samples[i].timestamp - result.samples[i - 1].timestamp);
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    const double median_gap = gaps[gaps.size() / 2];
    if (std::abs(median_gap - 0.2) > 0.05) {
      std::ostringstream msg;
      msg << "median inter-sample gap " << median_gap << " s deviates from the expected 0.2 s";
      result.warnings.push_back(msg.str());
    }
  }
  return result;
}

void write_trip_csv(std::ostream& out, const std::vector<RawSample>& samples,
                    const ColumnMap& columns) {
  bool first = true;
  for (ColumnRole role : kWriteOrder) {
    const auto it = columns.names.find(role);
    out << (first ? "" : ",") << (it != columns.names.end() ? it->second : role_name(role));
    first = false;
  }
  out << "\n";
  for (const RawSample& s : samples) {
    first = true;
    for (ColumnRole role : kWriteOrder) {
      out << (first ? "" : ",") << format_double(field_value(s, role));
      first = false;
    }
    out << "\n";
  }
}

bool GroundTruth::window_is_pothole(std::int64_t event_index, double t_start, double t_end) const {
  for (const TruthIndex& e : indices)
    if (e.event_index == event_index && e.is_pothole) return true;
  for (const TruthRange& r : ranges)
    if (r.is_pothole && r.t_start <= t_end && r.t_end >= t_start) return true;
  return false;
}

GroundTruth parse_ground_truth(std::istream& source) {
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(source, line)) {
    ++line_no;
    const std::string_view row = clean_line(line, line_no == 1);
    const std::string_view stripped = trim(row);
    if (stripped.empty() || stripped.front() == '#') continue;

    const auto cells = split_csv_line(row);
    if (first_content_line && !parse_double(cells[0])) {
      first_content_line = false;  // header line
      continue;
    }
    first_content_line = false;

    const auto fail = [&](const char* what) {
      throw std::runtime_error("parse_ground_truth: " + std::string(what) + " at line " +
                               std::to_string(line_no));
    };

    if (cells.size() == 2) {
      const auto idx = parse_double(cells[0]);
      const auto flag = parse_flag(cells[1]);
      if (!idx || !flag || *idx != std::floor(*idx) || *idx < 0) fail("malformed index record");
      truth.indices.push_back({static_cast<std::int64_t>(*idx), *flag});
    } else if (cells.size() == 3) {
      const auto t0 = parse_double(cells[0]);
      const auto t1 = parse_double(cells[1]);
      const auto flag = parse_flag(cells[2]);
      if (!t0 || !t1 || !flag || !(*t0 <= *t1)) fail("malformed range record");
      truth.ranges.push_back({*t0, *t1, *flag});
    } else {
      fail("expected 2 or 3 fields");
    }
  }

  std::vector<std::int64_t> seen;
  for (const TruthIndex& e : truth.indices) seen.push_back(e.event_index);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw std::runtime_error("parse_ground_truth: duplicate event index");

  // Shared endpoints are fine; overlap of positive length is not.
  auto sorted = truth.ranges;
  std::sort(sorted.begin(), sorted.end(),
            [](const TruthRange& a, const TruthRange& b) { return a.t_start < b.t_start; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].t_start < sorted[i - 1].t_end)
      throw std::runtime_error("parse_ground_truth: overlapping ranges");

  return truth;
}

void write_ground_truth_csv(std::ostream& out, const GroundTruth& truth) {
  for (const TruthIndex& e : truth.indices)
    out << e.event_index << "," << (e.is_pothole ? 1 : 0) << "\n";
  for (const TruthRange& r : truth.ranges)
    out << format_double(r.t_start) << "," << format_double(r.t_end) << ","
        << (r.is_pothole ? 1 : 0) << "\n";
}

}  // namespace addcat::ingest
