#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "addcat/features.hpp"
#include "addcat/hdbscan.hpp"
#include "addcat/ingest.hpp"

namespace addcat::pipeline {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Axis { X = 0, Y = 1, Z = 2 };

const char* axis_name(Axis axis);

// Normalized feature columns fed to one second-stage run.
struct AxisFeatureSet {
  Axis axis;
  std::array<int, 3> features;
};

// X: gsenX_std, gyroX_std, gyroY_std; Y: gsenY_std, gyroX_std, gyroZ_std;
// Z: gsenZ_std, gyroX_std, gyroY_std.
const std::array<AxisFeatureSet, 3>& axis_feature_sets();

// First-stage outcome for an event.
enum class Group { LargestCluster, Outliers, MinorCluster };

const char* group_name(Group group);

struct Params {
  std::size_t window_size = 10;
  double epsilon_speed = 0.5;
  hdbscan::Params hdbscan;  // shared by all seven runs unless overridden
  std::optional<hdbscan::Params> stage1;
  // Indexed group*3 + axis; group 0 = largest cluster, 1 = outliers.
  std::array<std::optional<hdbscan::Params>, 6> stage2;

  hdbscan::Params stage1_params() const;
  hdbscan::Params stage2_params(int group, Axis axis) const;
};

struct StageOneResult {
  hdbscan::Labeling labeling;         // over all events, event order
  hdbscan::CondensedTree condensed;   // empty when the trivial path fired
  int largest_label = -1;             // largest non-noise cluster, ties -> lowest label
  bool trivial = false;               // identical-rows shortcut, no tree built
};

struct StageTwoRun {
  Group group = Group::LargestCluster;
  Axis axis = Axis::X;
  std::vector<std::size_t> event_indices;  // members, ascending event index
  hdbscan::Labeling labeling;              // aligned with event_indices
  int dominant_label = -1;                 // -1 when the run produced no cluster
  hdbscan::CondensedTree condensed;
  bool degenerate = false;  // too few events to cluster, all noise
  bool trivial = false;
};

struct EventDetection {
  std::size_t index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  double speed_mean = 0.0;
  int stage1_label = -1;
  Group group = Group::MinorCluster;
  bool has_stage2 = false;                     // false for minor-cluster events
  std::array<int, 3> stage2_labels{-1, -1, -1};  // per axis when has_stage2
  bool is_anomaly = false;
  bool is_pothole = false;  // carried from ground truth when present
};

struct DetectionResult {
  std::vector<EventDetection> per_event;
  StageOneResult stage1;
  std::array<StageTwoRun, 6> stage2;  // group*3 + axis
  std::size_t anomaly_count = 0;
};

struct RunOutput {
  std::vector<features::Event> events;  // raw, calibrated, normalized vectors
  features::CalibrationModel calibration;
  DetectionResult detection;
  std::vector<std::string> warnings;
};

// Clusters all events on the full normalized vector. Throws PipelineError
// ("no dominant cluster") when every event lands in noise.
StageOneResult first_stage(const std::vector<features::Event>& events,
                           const hdbscan::Params& params);

// Re-clusters one first-stage group on one axis's features. Groups too small
// to cluster come back all-noise and degenerate.
StageTwoRun second_stage(const std::vector<features::Event>& events,
                         const std::vector<std::size_t>& member_indices,
                         Group group, const AxisFeatureSet& axis,
                         const hdbscan::Params& params,
                         std::vector<std::string>* warnings);

// Folds stage-1 and the six stage-2 runs into per-event verdicts. An event is
// normal only when it sits in the dominant cluster of all three axis runs of
// its group; minor-cluster events are anomalies outright.
DetectionResult classify(const std::vector<features::Event>& events,
                         StageOneResult stage1,
                         std::array<StageTwoRun, 6> stage2,
                         std::vector<std::string>* warnings);

// Whole method: window -> calibrate -> z-score -> two-stage clustering.
RunOutput run_addcat(const std::vector<ingest::RawSample>& samples,
                     const Params& params);

// Deterministic result document; identical runs give identical bytes.
void write_result_json(std::ostream& out, const RunOutput& output,
                       const Params& params, bool include_pothole);

// Rebuilds a DetectionResult from a result document (condensed trees are not
// stored there and come back empty). Throws on malformed input.
DetectionResult read_result_json(std::istream& in);

}  // namespace addcat::pipeline
