#include "addcat/eval.hpp"

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "addcat/stats.hpp"
#include "text_util.hpp"

namespace addcat::eval {
namespace {

std::string label_key(int label) {
  return label < 0 ? std::string("noise") : "label_" + std::to_string(label);
}

void accumulate_row(TpFnRow& row, const std::vector<double>& tp_values,
                    const std::vector<double>& fn_values) {
  if (!tp_values.empty()) {
    row.tp_available = true;
    row.tp_mean = stats::mean(tp_values);
  }
  if (!fn_values.empty()) {
    row.fn_available = true;
    row.fn_mean = stats::mean(fn_values);
  }
}

}  // namespace

double ConfusionMatrix::accuracy() const {
  const std::size_t n = total();
  if (n == 0) return 0.0;
  return static_cast<double>(tp + tn) / static_cast<double>(n);
}

void apply_ground_truth(std::vector<features::Event>& events,
                        const ingest::GroundTruth& truth) {
  for (auto& ev : events) {
    ev.is_pothole = truth.window_is_pothole(ev.index, ev.t_start, ev.t_end);
  }
}

void apply_ground_truth(std::vector<pipeline::EventDetection>& per_event,
                        const ingest::GroundTruth& truth) {
  for (auto& det : per_event) {
    det.is_pothole = truth.window_is_pothole(det.index, det.t_start, det.t_end);
  }
}

ConfusionMatrix confusion(const std::vector<pipeline::EventDetection>& per_event) {
  ConfusionMatrix m;
  for (const auto& det : per_event) {
    if (det.is_pothole) {
      det.is_anomaly ? ++m.tp : ++m.fn;
    } else {
      det.is_anomaly ? ++m.fp : ++m.tn;
    }
  }
  return m;
}

ConfusionMatrix confusion(const pipeline::DetectionResult& detection,
                          const ingest::GroundTruth& truth) {
  if (truth.empty()) {
    throw std::runtime_error("evaluation unavailable: ground truth is empty");
  }
  auto per_event = detection.per_event;
  apply_ground_truth(per_event, truth);
  return confusion(per_event);
}

std::map<int, SpeedStats> cluster_stats(const std::vector<int>& labels,
                                        const std::vector<double>& speeds_ms) {
  if (labels.size() != speeds_ms.size()) {
    throw std::invalid_argument("cluster_stats: labels and speeds differ in length");
  }
  std::map<int, std::vector<double>> grouped;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    grouped[labels[i]].push_back(speeds_ms[i]);
  }
  std::map<int, SpeedStats> out;
  for (const auto& [label, values] : grouped) {
    SpeedStats s;
    s.count = values.size();
    s.mean_ms = stats::mean(values);
    s.single = values.size() < 2;
    s.std_ms = s.single ? 0.0 : stats::sample_std(values);
    out[label] = s;
  }
  return out;
}

std::vector<TpFnRow> tp_fn_comparison(
    const std::vector<pipeline::EventDetection>& per_event,
    const std::vector<features::Event>* events) {
  if (events) {
    if (events->size() != per_event.size()) {
      throw std::invalid_argument("tp_fn_comparison: events do not match detections");
    }
    for (std::size_t i = 0; i < per_event.size(); ++i) {
      if ((*events)[i].index != per_event[i].index) {
        throw std::invalid_argument("tp_fn_comparison: event order mismatch");
      }
    }
  }

  std::vector<TpFnRow> rows;

  TpFnRow speed_row;
  speed_row.feature = "speed_kph";
  {
    std::vector<double> tp_values;
    std::vector<double> fn_values;
    for (const auto& det : per_event) {
      if (!det.is_pothole) continue;
      (det.is_anomaly ? tp_values : fn_values).push_back(det.speed_mean * kKphPerMs);
    }
    accumulate_row(speed_row, tp_values, fn_values);
  }
  rows.push_back(speed_row);

  if (events) {
    using features::AsIndex;
    static constexpr AsIndex kFeatures[] = {
        AsIndex::kGsenZStd, AsIndex::kGsenZMax, AsIndex::kGsenZMin,
        AsIndex::kGyroXStd, AsIndex::kGyroYStd};
    const auto names = features::as_names();
    for (const AsIndex feature : kFeatures) {
      TpFnRow row;
      row.feature = names[static_cast<std::size_t>(feature)] + std::string("_c");
      std::vector<double> tp_values;
      std::vector<double> fn_values;
      for (std::size_t i = 0; i < per_event.size(); ++i) {
        const auto& det = per_event[i];
        if (!det.is_pothole) continue;
        const double value =
            (*events)[i].calibrated_as[static_cast<std::size_t>(feature)];
        (det.is_anomaly ? tp_values : fn_values).push_back(value);
      }
      accumulate_row(row, tp_values, fn_values);
      rows.push_back(row);
    }
  }
  return rows;
}

EvalReport build_report(const pipeline::DetectionResult& detection,
                        const std::vector<features::Event>* events) {
  EvalReport report;
  report.confusion = confusion(detection.per_event);
  report.accuracy = report.confusion.accuracy();
  const auto& m = report.confusion;
  if (m.tp + m.fp > 0) {
    report.precision_defined = true;
    report.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  }
  if (m.tp + m.fn > 0) {
    report.recall_defined = true;
    report.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  }

  std::vector<double> all_speeds(detection.per_event.size());
  for (std::size_t i = 0; i < detection.per_event.size(); ++i) {
    all_speeds[i] = detection.per_event[i].speed_mean;
  }
  report.cluster_speed_stats["stage1"] =
      cluster_stats(detection.stage1.labeling.labels, all_speeds);

  for (const auto& run : detection.stage2) {
    if (run.event_indices.empty()) continue;
    std::vector<double> speeds(run.event_indices.size());
    for (std::size_t i = 0; i < run.event_indices.size(); ++i) {
      speeds[i] = detection.per_event[run.event_indices[i]].speed_mean;
    }
    const std::string key = std::string("stage2_") +
                            pipeline::group_name(run.group) + "_" +
                            pipeline::axis_name(run.axis);
    report.cluster_speed_stats[key] = cluster_stats(run.labeling.labels, speeds);
  }

  report.tp_fn = tp_fn_comparison(detection.per_event, events);
  return report;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  nlohmann::ordered_json j;
  const auto& m = report.confusion;
  j["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn},
                    {"tn", m.tn}, {"total", m.total()}};
  j["metrics"]["accuracy"] = report.accuracy;
  j["metrics"]["precision"] = report.precision_defined
                                  ? nlohmann::ordered_json(report.precision)
                                  : nlohmann::ordered_json(nullptr);
  j["metrics"]["recall"] = report.recall_defined
                               ? nlohmann::ordered_json(report.recall)
                               : nlohmann::ordered_json(nullptr);

  j["cluster_speed_stats"] = nlohmann::ordered_json::object();
  for (const auto& [key, stats_map] : report.cluster_speed_stats) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [label, s] : stats_map) {
      arr.push_back({{"label", label},
                     {"count", s.count},
                     {"speed_mean_ms", s.mean_ms},
                     {"speed_std_ms", s.single ? nlohmann::ordered_json(nullptr)
                                               : nlohmann::ordered_json(s.std_ms)},
                     {"speed_mean_kph", s.mean_kph()},
                     {"speed_std_kph", s.single
                                           ? nlohmann::ordered_json(nullptr)
                                           : nlohmann::ordered_json(s.std_kph())},
                     {"single_event", s.single}});
    }
    j["cluster_speed_stats"][key] = std::move(arr);
  }

  j["tp_fn"] = nlohmann::ordered_json::array();
  for (const auto& row : report.tp_fn) {
    j["tp_fn"].push_back(
        {{"feature", row.feature},
         {"tp_mean", row.tp_available ? nlohmann::ordered_json(row.tp_mean)
                                      : nlohmann::ordered_json(nullptr)},
         {"fn_mean", row.fn_available ? nlohmann::ordered_json(row.fn_mean)
                                      : nlohmann::ordered_json(nullptr)}});
  }

  out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  using detail::format_double;
  out << "metric,value\n";
  const auto& m = report.confusion;
  out << "confusion.tp," << m.tp << '\n';
  out << "confusion.fp," << m.fp << '\n';
  out << "confusion.fn," << m.fn << '\n';
  out << "confusion.tn," << m.tn << '\n';
  out << "confusion.total," << m.total() << '\n';
  out << "accuracy," << format_double(report.accuracy) << '\n';
  out << "precision,"
      << (report.precision_defined ? format_double(report.precision)
                                   : std::string("unavailable"))
      << '\n';
  out << "recall,"
      << (report.recall_defined ? format_double(report.recall)
                                : std::string("unavailable"))
      << '\n';
  for (const auto& [key, stats_map] : report.cluster_speed_stats) {
    for (const auto& [label, s] : stats_map) {
      const std::string prefix = key + "." + label_key(label) + ".";
      out << prefix << "count," << s.count << '\n';
      out << prefix << "speed_mean_ms," << format_double(s.mean_ms) << '\n';
      out << prefix << "speed_std_ms,"
          << (s.single ? std::string("unavailable") : format_double(s.std_ms))
          << '\n';
      out << prefix << "speed_mean_kph," << format_double(s.mean_kph()) << '\n';
      out << prefix << "speed_std_kph,"
          << (s.single ? std::string("unavailable") : format_double(s.std_kph()))
          << '\n';
    }
  }
  for (const auto& row : report.tp_fn) {
    out << "tp_fn." << row.feature << ".tp_mean,"
        << (row.tp_available ? format_double(row.tp_mean)
                             : std::string("unavailable"))
        << '\n';
    out << "tp_fn." << row.feature << ".fn_mean,"
        << (row.fn_available ? format_double(row.fn_mean)
                             : std::string("unavailable"))
        << '\n';
  }
}

}  // namespace addcat::eval
