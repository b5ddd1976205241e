#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace addcat::ingest {

// One 5 Hz sensor reading. Axes: X forward/backward, Y lateral, Z vertical.
struct RawSample {
  double timestamp = 0.0;  // Unix seconds, fractional allowed
  double latitude = 0.0;   // degrees
  double longitude = 0.0;  // degrees
  double speed = 0.0;      // m/s, >= 0
  double gsen_x = 0.0;     // m/s^2
  double gsen_y = 0.0;
  double gsen_z = 0.0;
  double gyro_x = 0.0;     // rad/s
  double gyro_y = 0.0;
  double gyro_z = 0.0;
};

enum class ColumnRole {
  Timestamp,
  Latitude,
  Longitude,
  Speed,
  GsenX,
  GsenY,
  GsenZ,
  GyroX,
  GyroY,
  GyroZ,
};

constexpr int kColumnRoleCount = 10;

// Maps each required role to the header name carrying it. Matching is
// case-insensitive with surrounding whitespace ignored.
struct ColumnMap {
  std::map<ColumnRole, std::string> names;

  static ColumnMap defaults();
};

struct RowError {
  std::size_t line;  // 1-based line number in the source
  std::string message;
};

struct TripParseResult {
  std::vector<RawSample> samples;
  std::vector<RowError> rejected;
  std::vector<std::string> warnings;
  std::size_t data_rows = 0;  // rows seen after the header
};

struct ParseOptions {
  bool strict = false;  // promote non-monotone timestamps to an error
};

// Parses a comma-delimited trip table with a header row. Every data row
// either yields a sample or a located entry in `rejected`.
// Throws std::runtime_error on a missing required column or when no data
// rows are present.
TripParseResult parse_trip(std::istream& source, const ColumnMap& columns = ColumnMap::defaults(),
                           const ParseOptions& options = {});

// Serializes samples in the same column order parse_trip consumes by
// default, with shortest round-trip number formatting.
void write_trip_csv(std::ostream& out, const std::vector<RawSample>& samples,
                    const ColumnMap& columns = ColumnMap::defaults());

struct TruthRange {
  double t_start = 0.0;
  double t_end = 0.0;
  bool is_pothole = false;
};

struct TruthIndex {
  std::int64_t event_index = 0;
  bool is_pothole = false;
};

// Pothole labels as either event indices or timestamp ranges.
struct GroundTruth {
  std::vector<TruthIndex> indices;
  std::vector<TruthRange> ranges;

  bool empty() const { return indices.empty() && ranges.empty(); }

  // A window [t_start, t_end] is positive iff a flagged range intersects
  // it or its event index is flagged.
  bool window_is_pothole(std::int64_t event_index, double t_start, double t_end) const;
};

// One record per line: `event_index,flag` or `t_start,t_end,flag`.
// A header line is skipped when its first cell is not numeric.
// Throws on malformed lines, duplicate indices, or overlapping ranges.
GroundTruth parse_ground_truth(std::istream& source);

void write_ground_truth_csv(std::ostream& out, const GroundTruth& truth);

}  // namespace addcat::ingest
