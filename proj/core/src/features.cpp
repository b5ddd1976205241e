#include "addcat/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "text_util.hpp"

namespace addcat::features {

namespace {

double channel_value(const ingest::RawSample& s, int channel) {
  switch (channel) {
    case 0: return s.gsen_x;
    case 1: return s.gsen_y;
    case 2: return s.gsen_z;
    case 3: return s.gyro_x;
    case 4: return s.gyro_y;
    case 5: return s.gyro_z;
  }
  throw std::logic_error("bad channel");
}

}  // namespace

const std::array<std::string, kAsCount>& as_names() {
  static const std::array<std::string, kAsCount> names = {
      "speed_mean", "speed_std",  "gsenX_max",  "gsenY_max",  "gsenZ_max",
      "gsenX_min",  "gsenY_min",  "gsenZ_min",  "gsenX_std",  "gsenY_std",
      "gsenZ_std",  "gyroX_max",  "gyroY_max",  "gyroZ_max",  "gyroX_min",
      "gyroY_min",  "gyroZ_min",  "gyroX_std",  "gyroY_std",  "gyroZ_std",
  };
  return names;
}

std::vector<Event> window(const std::vector<ingest::RawSample>& samples, std::size_t window_size,
                          std::vector<std::string>* warnings) {
  if (window_size < 2) throw std::invalid_argument("window: window_size must be >= 2");

  const std::size_t n_events = samples.size() / window_size;
  if (n_events == 0) {
    if (warnings)
      warnings->push_back("window: fewer than " + std::to_string(window_size) +
                          " samples, no events produced");
    return {};
  }

  std::vector<Event> events;
  events.reserve(n_events);
  std::vector<double> speeds(window_size);
  std::vector<double> channel(window_size);

  for (std::size_t e = 0; e < n_events; ++e) {
    const std::size_t base = e * window_size;
    Event ev;
    ev.index = e;
    ev.t_start = samples[base].timestamp;
    ev.t_end = samples[base + window_size - 1].timestamp;

    for (std::size_t i = 0; i < window_size; ++i) speeds[i] = samples[base + i].speed;
    ev.raw_as[kSpeedMean] = stats::mean(speeds);
    ev.raw_as[kSpeedStd] = stats::sample_std(speeds);

    // Channels in axis order: gsen X/Y/Z then gyro X/Y/Z, matching the
    // max/min/std blocks of the layout.
    for (int c = 0; c < 6; ++c) {
      for (std::size_t i = 0; i < window_size; ++i)
        channel[i] = channel_value(samples[base + i], c);
      const auto [mn, mx] = std::minmax_element(channel.begin(), channel.end());
      const int block = c < 3 ? 0 : 1;  // 0 = gsen, 1 = gyro
      const int axis = c % 3;
      const int max_idx = block == 0 ? kGsenXMax + axis : kGyroXMax + axis;
      const int min_idx = block == 0 ? kGsenXMin + axis : kGyroXMin + axis;
      const int std_idx = block == 0 ? kGsenXStd + axis : kGyroXStd + axis;
      ev.raw_as[max_idx] = *mx;
      ev.raw_as[min_idx] = *mn;
      ev.raw_as[std_idx] = stats::sample_std(channel);
    }

    ev.calibrated_as = ev.raw_as;
    events.push_back(ev);
  }
  return events;
}

std::array<bool, kAsCount> CalibrationModel::default_calibrated_set() {
  std::array<bool, kAsCount> set{};
  set.fill(true);
  set[kSpeedMean] = false;  // speed itself is only z-scored
  return set;
}

stats::LinearFit fit_speed_model(const std::vector<Event>& events, int feature) {
  if (feature < 0 || feature >= kAsCount) throw std::invalid_argument("fit_speed_model: bad feature");
  if (events.size() < 2) throw std::invalid_argument("fit_speed_model: need at least two events");
  std::vector<double> x(events.size());
  std::vector<double> y(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    x[i] = events[i].raw_as[kSpeedMean];
    y[i] = events[i].raw_as[feature];
  }
  return stats::ols_fit(x, y);  // throws on identical speeds
}

CalibrationModel fit_calibration(const std::vector<Event>& events, double epsilon_speed,
                                 std::vector<std::string>* warnings) {
  if (epsilon_speed <= 0.0) throw std::invalid_argument("fit_calibration: epsilon_speed must be > 0");
  CalibrationModel model;
  model.epsilon_speed = epsilon_speed;
  model.calibrated = CalibrationModel::default_calibrated_set();

  for (int f = 0; f < kAsCount; ++f) {
    if (!model.calibrated[f]) continue;
    bool degenerate = false;
    try {
      model.fits[f] = fit_speed_model(events, f);
    } catch (const std::invalid_argument&) {
      degenerate = true;  // identical speeds, no usable slope
    }
    if (degenerate || std::abs(model.fits[f].slope) < kDegenerateSlope) {
      if (degenerate) {
        std::vector<double> y(events.size());
        for (std::size_t i = 0; i < events.size(); ++i) y[i] = events[i].raw_as[f];
        model.fits[f] = {0.0, events.empty() ? 0.0 : stats::mean(y)};
      }
      model.residual_only[f] = true;
      if (warnings)
        warnings->push_back("calibration: degenerate speed fit for " + as_names()[f] +
                            ", using residual y - b");
    }
  }
  return model;
}

void calibrate(std::vector<Event>& events, const CalibrationModel& model) {
  for (Event& ev : events) {
    const double x = std::max(ev.raw_as[kSpeedMean], model.epsilon_speed);
    for (int f = 0; f < kAsCount; ++f) {
      const double y = ev.raw_as[f];
      if (!model.calibrated[f]) {
        ev.calibrated_as[f] = y;
      } else if (model.residual_only[f]) {
        ev.calibrated_as[f] = y - model.fits[f].intercept;
      } else {
        ev.calibrated_as[f] = (y - model.fits[f].intercept) / (model.fits[f].slope * x);
      }
    }
  }
}

void zscore(std::vector<Event>& events, std::vector<std::string>* warnings) {
  if (events.size() < 2) throw std::invalid_argument("zscore: need at least two events");
  std::vector<double> column(events.size());
  for (int f = 0; f < kAsCount; ++f) {
    for (std::size_t i = 0; i < events.size(); ++i) column[i] = events[i].calibrated_as[f];
    const double m = stats::mean(column);
    const double sd = stats::population_std(column);
    if (sd == 0.0) {
      for (Event& ev : events) ev.normalized_as[f] = 0.0;
      if (warnings) warnings->push_back("zscore: constant column " + as_names()[f] + ", mapped to zeros");
      continue;
    }
    for (std::size_t i = 0; i < events.size(); ++i)
      events[i].normalized_as[f] = (events[i].calibrated_as[f] - m) / sd;
  }
}

void write_events_csv(std::ostream& out, const std::vector<Event>& events) {
  out << "index,t_start,t_end,is_pothole";
  for (const auto& name : as_names()) out << ",raw_" << name;
  for (const auto& name : as_names()) out << ",cal_" << name;
  for (const auto& name : as_names()) out << ",norm_" << name;
  out << "\n";
  for (const Event& ev : events) {
    out << ev.index << "," << detail::format_double(ev.t_start) << ","
        << detail::format_double(ev.t_end) << "," << (ev.is_pothole ? 1 : 0);
    for (double v : ev.raw_as) out << "," << detail::format_double(v);
    for (double v : ev.calibrated_as) out << "," << detail::format_double(v);
    for (double v : ev.normalized_as) out << "," << detail::format_double(v);
    out << "\n";
  }
}

std::vector<Event> read_events_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("events csv: empty file");
  }
  const std::size_t expected_cols = 4 + 3 * kAsCount;
  {
    const auto header = detail::split_csv_line(line);
    if (header.size() != expected_cols || header[0] != "index") {
      throw std::runtime_error("events csv: unexpected header");
    }
  }
  std::vector<Event> events;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != expected_cols) {
      throw std::runtime_error("events csv: wrong column count at line " +
                               std::to_string(line_no));
    }
    auto cell = [&](std::size_t i) {
      const auto v = detail::parse_double(cells[i]);
      if (!v) {
        throw std::runtime_error("events csv: bad number at line " +
                                 std::to_string(line_no));
      }
      return *v;
    };
    Event ev;
    ev.index = static_cast<std::size_t>(cell(0));
    ev.t_start = cell(1);
    ev.t_end = cell(2);
    ev.is_pothole = cell(3) != 0.0;
    for (std::size_t f = 0; f < kAsCount; ++f) {
      ev.raw_as[f] = cell(4 + f);
      ev.calibrated_as[f] = cell(4 + kAsCount + f);
      ev.normalized_as[f] = cell(4 + 2 * kAsCount + f);
    }
    events.push_back(ev);
  }
  return events;
}

}  // namespace addcat::features
