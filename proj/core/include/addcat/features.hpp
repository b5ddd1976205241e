#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "addcat/ingest.hpp"
#include "addcat/stats.hpp"

namespace addcat::features {

// Fixed layout of the 20 per-window aggregate statistics.
enum AsIndex : int {
  kSpeedMean = 0,
  kSpeedStd = 1,
  kGsenXMax = 2,
  kGsenYMax = 3,
  kGsenZMax = 4,
  kGsenXMin = 5,
  kGsenYMin = 6,
  kGsenZMin = 7,
  kGsenXStd = 8,
  kGsenYStd = 9,
  kGsenZStd = 10,
  kGyroXMax = 11,
  kGyroYMax = 12,
  kGyroZMax = 13,
  kGyroXMin = 14,
  kGyroYMin = 15,
  kGyroZMin = 16,
  kGyroXStd = 17,
  kGyroYStd = 18,
  kGyroZStd = 19,
};

constexpr int kAsCount = 20;

using AsVector = std::array<double, kAsCount>;

// Column names in layout order, used by the events dump and reports.
const std::array<std::string, kAsCount>& as_names();

// One 10-sample window. Window stds use ddof = 1; z-scores use ddof = 0.
struct Event {
  std::size_t index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  AsVector raw_as{};
  AsVector calibrated_as{};
  AsVector normalized_as{};
  bool is_pothole = false;
};

// Groups consecutive samples into fixed windows and computes the 20
// aggregate statistics per window. The trailing partial window is
// discarded. Fewer than window_size samples yields no events plus a
// warning in *warnings.
std::vector<Event> window(const std::vector<ingest::RawSample>& samples,
                          std::size_t window_size = 10,
                          std::vector<std::string>* warnings = nullptr);

// Per-feature linear fit against mean speed, plus the policy switches
// controlling which features are calibrated and the low-speed floor.
struct CalibrationModel {
  std::array<stats::LinearFit, kAsCount> fits{};
  std::array<bool, kAsCount> calibrated{};      // which features get calibrated
  std::array<bool, kAsCount> residual_only{};   // |slope| too small, fall back to y - b
  double epsilon_speed = 0.5;                   // m/s floor for the denominator

  static std::array<bool, kAsCount> default_calibrated_set();
};

constexpr double kDegenerateSlope = 1e-12;

// OLS of one aggregate statistic against speed_mean over the events.
// Throws when fewer than two events or all speeds identical.
stats::LinearFit fit_speed_model(const std::vector<Event>& events, int feature);

// Fits every feature in the calibrated set. Features whose fit is
// degenerate (all speeds identical, or |slope| < kDegenerateSlope) are
// marked residual_only with a warning naming the feature.
CalibrationModel fit_calibration(const std::vector<Event>& events,
                                 double epsilon_speed = 0.5,
                                 std::vector<std::string>* warnings = nullptr);

// c = (y - b) / (a * max(x, epsilon_speed)) per calibrated feature, where
// x is the event's speed_mean. Residual-only features use c = y - b.
// Uncalibrated features copy through unchanged.
void calibrate(std::vector<Event>& events, const CalibrationModel& model);

// Column-wise z-score of calibrated_as into normalized_as (population
// std). Constant columns map to all zeros with a warning. Throws when
// fewer than two events.
void zscore(std::vector<Event>& events, std::vector<std::string>* warnings = nullptr);

// Debug dump, one row per event with raw, calibrated and normalized
// values in layout order.
void write_events_csv(std::ostream& out, const std::vector<Event>& events);

// Reads the format write_events_csv emits. Throws on malformed rows or an
// unexpected header.
std::vector<Event> read_events_csv(std::istream& in);

}  // namespace addcat::features
