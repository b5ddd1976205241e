#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "addcat/features.hpp"
#include "addcat/ingest.hpp"
#include "addcat/pipeline.hpp"

namespace addcat::eval {

constexpr double kKphPerMs = 3.6;

// Positive class: a pothole event flagged as an anomaly.
struct ConfusionMatrix {
  std::size_t tp = 0;  // pothole, flagged
  std::size_t fp = 0;  // clean, flagged
  std::size_t fn = 0;  // pothole, missed
  std::size_t tn = 0;  // clean, not flagged

  std::size_t total() const { return tp + fp + fn + tn; }
  double accuracy() const;
};

struct SpeedStats {
  std::size_t count = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;  // sample std, 0 for a single event
  bool single = false;  // std is not meaningful
  double mean_kph() const { return mean_ms * kKphPerMs; }
  double std_kph() const { return std_ms * kKphPerMs; }
};

// Mean of one feature over true positives vs false negatives. A side with no
// events is marked unavailable instead of carrying a fake number.
struct TpFnRow {
  std::string feature;
  bool tp_available = false;
  double tp_mean = 0.0;
  bool fn_available = false;
  double fn_mean = 0.0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  bool precision_defined = false;
  double precision = 0.0;
  bool recall_defined = false;
  double recall = 0.0;
  // "stage1", "stage2_largest_cluster_x", ... -> label (-1 = noise) -> stats.
  std::map<std::string, std::map<int, SpeedStats>> cluster_speed_stats;
  std::vector<TpFnRow> tp_fn;
};

// Stamps per-event pothole flags from the truth's index entries and time
// ranges (window/range overlap).
void apply_ground_truth(std::vector<features::Event>& events,
                        const ingest::GroundTruth& truth);
void apply_ground_truth(std::vector<pipeline::EventDetection>& per_event,
                        const ingest::GroundTruth& truth);

// Counts over already-stamped events.
ConfusionMatrix confusion(const std::vector<pipeline::EventDetection>& per_event);

// Joins and counts; throws "evaluation unavailable" on empty truth.
ConfusionMatrix confusion(const pipeline::DetectionResult& detection,
                          const ingest::GroundTruth& truth);

// Per-label speed mean/std for one clustering; labels align with speeds.
std::map<int, SpeedStats> cluster_stats(const std::vector<int>& labels,
                                        const std::vector<double>& speeds_ms);

// Feature means over TP vs FN events: speed in kph, then the calibrated
// Z-axis g-sensor trio and the X/Y gyro stds. Needs the events for the
// calibrated vectors; pass nullptr to skip those rows.
std::vector<TpFnRow> tp_fn_comparison(
    const std::vector<pipeline::EventDetection>& per_event,
    const std::vector<features::Event>* events);

// Full report over stamped detections. Caller guarantees truth was loaded.
EvalReport build_report(const pipeline::DetectionResult& detection,
                        const std::vector<features::Event>* events);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_report_csv(std::ostream& out, const EvalReport& report);

}  // namespace addcat::eval
