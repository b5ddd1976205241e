#include "addcat/pipeline.hpp"

#include <algorithm>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>

#include <json.hpp>

namespace addcat::pipeline {
namespace {

bool rows_identical(const hdbscan::Points& points) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i] != points[0]) return false;
  }
  return true;
}

// Zero-diameter groups: every pairwise distance ties at zero, so density
// split order is meaningless. Treat the group as one cluster when it is big
// enough to count as one instead of letting ties shred it into noise.
hdbscan::Labeling single_cluster_labeling(std::size_t n) {
  hdbscan::Labeling labeling;
  labeling.labels.assign(n, 0);
  labeling.cluster_sizes = {{0, n}};
  labeling.stabilities = {{0, 0.0}};
  return labeling;
}

hdbscan::Labeling all_noise_labeling(std::size_t n) {
  hdbscan::Labeling labeling;
  labeling.labels.assign(n, -1);
  return labeling;
}

// Largest cluster wins; the ascending map walk keeps the lowest label on
// ties.
int dominant_label(const hdbscan::Labeling& labeling) {
  int best = -1;
  std::size_t best_size = 0;
  for (const auto& [label, size] : labeling.cluster_sizes) {
    if (size > best_size) {
      best_size = size;
      best = label;
    }
  }
  return best;
}

nlohmann::ordered_json cluster_sizes_array(const hdbscan::Labeling& labeling) {
  auto arr = nlohmann::ordered_json::array();
  for (int label = 0; label < labeling.cluster_count(); ++label) {
    arr.push_back(labeling.cluster_sizes.at(label));
  }
  return arr;
}

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

nlohmann::ordered_json hdbscan_params_json(const hdbscan::Params& p) {
  return {{"min_cluster_size", p.min_cluster_size},
          {"min_samples", p.effective_min_samples()},
          {"allow_single_cluster", p.allow_single_cluster}};
}

}  // namespace

const char* axis_name(Axis axis) {
  switch (axis) {
    case Axis::X:
      return "x";
    case Axis::Y:
      return "y";
    case Axis::Z:
      return "z";
  }
  return "?";
}

const char* group_name(Group group) {
  switch (group) {
    case Group::LargestCluster:
      return "largest_cluster";
    case Group::Outliers:
      return "outliers";
    case Group::MinorCluster:
      return "minor_cluster";
  }
  return "?";
}

const std::array<AxisFeatureSet, 3>& axis_feature_sets() {
  using features::AsIndex;
  static const std::array<AxisFeatureSet, 3> kSets = {{
      {Axis::X, {AsIndex::kGsenXStd, AsIndex::kGyroXStd, AsIndex::kGyroYStd}},
      {Axis::Y, {AsIndex::kGsenYStd, AsIndex::kGyroXStd, AsIndex::kGyroZStd}},
      {Axis::Z, {AsIndex::kGsenZStd, AsIndex::kGyroXStd, AsIndex::kGyroYStd}},
  }};
  return kSets;
}

hdbscan::Params Params::stage1_params() const {
  return stage1 ? *stage1 : hdbscan;
}

hdbscan::Params Params::stage2_params(int group, Axis axis) const {
  const auto idx =
      static_cast<std::size_t>(group * 3 + static_cast<int>(axis));
  return stage2[idx] ? *stage2[idx] : hdbscan;
}

StageOneResult first_stage(const std::vector<features::Event>& events,
                           const hdbscan::Params& params) {
  const std::size_t n = events.size();
  const auto needed = std::max<std::size_t>(
      2, static_cast<std::size_t>(params.effective_min_samples()));
  if (n < needed) {
    throw PipelineError("first stage: " + std::to_string(n) +
                        " events, need at least " + std::to_string(needed));
  }

  hdbscan::Points points(n);
  for (std::size_t i = 0; i < n; ++i) {
    points[i].assign(events[i].normalized_as.begin(),
                     events[i].normalized_as.end());
  }

  StageOneResult result;
  if (rows_identical(points) &&
      n >= static_cast<std::size_t>(params.min_cluster_size)) {
    result.labeling = single_cluster_labeling(n);
    result.largest_label = 0;
    result.trivial = true;
    return result;
  }

  auto run = hdbscan::run(points, params);
  if (run.labeling.cluster_count() == 0) {
    throw PipelineError("first stage: no dominant cluster, every event is noise");
  }
  result.labeling = std::move(run.labeling);
  result.condensed = std::move(run.condensed);
  result.largest_label = dominant_label(result.labeling);
  return result;
}

StageTwoRun second_stage(const std::vector<features::Event>& events,
                         const std::vector<std::size_t>& member_indices,
                         Group group, const AxisFeatureSet& axis,
                         const hdbscan::Params& params,
                         std::vector<std::string>* warnings) {
  StageTwoRun run;
  run.group = group;
  run.axis = axis.axis;
  run.event_indices = member_indices;

  const std::size_t m = member_indices.size();
  const std::size_t needed =
      std::max({std::size_t{2}, static_cast<std::size_t>(params.min_cluster_size),
                static_cast<std::size_t>(params.effective_min_samples())});
  if (m < needed) {
    run.labeling = all_noise_labeling(m);
    run.degenerate = true;
    if (m > 0) {
      warn(warnings, std::string("second stage (") + group_name(group) + ", " +
                         axis_name(axis.axis) + "): only " + std::to_string(m) +
                         " events, need " + std::to_string(needed) +
                         "; all marked noise");
    }
    return run;
  }

  hdbscan::Points points(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& vec = events[member_indices[i]].normalized_as;
    points[i] = {vec[static_cast<std::size_t>(axis.features[0])],
                 vec[static_cast<std::size_t>(axis.features[1])],
                 vec[static_cast<std::size_t>(axis.features[2])]};
  }

  if (rows_identical(points) &&
      m >= static_cast<std::size_t>(params.min_cluster_size)) {
    run.labeling = single_cluster_labeling(m);
    run.dominant_label = 0;
    run.trivial = true;
    return run;
  }

  auto result = hdbscan::run(points, params);
  run.labeling = std::move(result.labeling);
  run.condensed = std::move(result.condensed);
  run.dominant_label = dominant_label(run.labeling);
  return run;
}

DetectionResult classify(const std::vector<features::Event>& events,
                         StageOneResult stage1,
                         std::array<StageTwoRun, 6> stage2,
                         std::vector<std::string>* warnings) {
  const std::size_t n = events.size();

  // Event index -> position inside each run's member list.
  std::array<std::vector<int>, 6> position;
  for (std::size_t r = 0; r < 6; ++r) {
    position[r].assign(n, -1);
    for (std::size_t i = 0; i < stage2[r].event_indices.size(); ++i) {
      position[r][stage2[r].event_indices[i]] = static_cast<int>(i);
    }
    if (!stage2[r].degenerate && stage2[r].dominant_label < 0 &&
        !stage2[r].event_indices.empty()) {
      warn(warnings, std::string("second stage (") +
                         group_name(stage2[r].group) + ", " +
                         axis_name(stage2[r].axis) +
                         "): no cluster found; whole group flagged anomalous");
    }
  }

  DetectionResult result;
  result.per_event.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& det = result.per_event[i];
    const auto& ev = events[i];
    det.index = ev.index;
    det.t_start = ev.t_start;
    det.t_end = ev.t_end;
    det.speed_mean = ev.raw_as[features::kSpeedMean];
    det.stage1_label = stage1.labeling.labels[i];
    det.is_pothole = ev.is_pothole;

    if (det.stage1_label == stage1.largest_label) {
      det.group = Group::LargestCluster;
    } else if (det.stage1_label == -1) {
      det.group = Group::Outliers;
    } else {
      det.group = Group::MinorCluster;
      det.is_anomaly = true;
      continue;
    }

    det.has_stage2 = true;
    const int g = det.group == Group::LargestCluster ? 0 : 1;
    bool normal = true;
    for (int a = 0; a < 3; ++a) {
      const auto r = static_cast<std::size_t>(g * 3 + a);
      const int pos = position[r][i];
      const int label = stage2[r].labeling.labels[static_cast<std::size_t>(pos)];
      det.stage2_labels[static_cast<std::size_t>(a)] = label;
      if (stage2[r].dominant_label < 0 || label != stage2[r].dominant_label) {
        normal = false;
      }
    }
    det.is_anomaly = !normal;
  }

  for (const auto& det : result.per_event) {
    if (det.is_anomaly) ++result.anomaly_count;
  }
  result.stage1 = std::move(stage1);
  result.stage2 = std::move(stage2);
  return result;
}

RunOutput run_addcat(const std::vector<ingest::RawSample>& samples,
                     const Params& params) {
  RunOutput out;
  out.events = features::window(samples, params.window_size, &out.warnings);
  if (out.events.size() < 2) {
    throw PipelineError("pipeline: " + std::to_string(out.events.size()) +
                        " events from " + std::to_string(samples.size()) +
                        " samples; need at least 2");
  }

  out.calibration =
      features::fit_calibration(out.events, params.epsilon_speed, &out.warnings);
  features::calibrate(out.events, out.calibration);
  features::zscore(out.events, &out.warnings);

  StageOneResult stage1 = first_stage(out.events, params.stage1_params());

  std::vector<std::size_t> largest_members;
  std::vector<std::size_t> outlier_members;
  for (std::size_t i = 0; i < out.events.size(); ++i) {
    const int label = stage1.labeling.labels[i];
    if (label == stage1.largest_label) {
      largest_members.push_back(i);
    } else if (label == -1) {
      outlier_members.push_back(i);
    }
  }
  if (outlier_members.empty()) {
    out.warnings.push_back("first stage: outlier group is empty");
  }

  std::array<StageTwoRun, 6> runs;
  for (int g = 0; g < 2; ++g) {
    const auto& members = g == 0 ? largest_members : outlier_members;
    const Group group = g == 0 ? Group::LargestCluster : Group::Outliers;
    for (int a = 0; a < 3; ++a) {
      const auto& axis = axis_feature_sets()[static_cast<std::size_t>(a)];
      runs[static_cast<std::size_t>(g * 3 + a)] =
          second_stage(out.events, members, group, axis,
                       params.stage2_params(g, static_cast<Axis>(a)),
                       &out.warnings);
    }
  }

  out.detection = classify(out.events, std::move(stage1), std::move(runs),
                           &out.warnings);
  return out;
}

void write_result_json(std::ostream& out, const RunOutput& output,
                       const Params& params, bool include_pothole) {
  nlohmann::ordered_json j;
  const auto& det = output.detection;

  j["summary"] = {{"event_count", det.per_event.size()},
                  {"anomaly_count", det.anomaly_count},
                  {"window_size", params.window_size},
                  {"epsilon_speed", params.epsilon_speed},
                  {"calibration_residual_only", output.calibration.residual_only}};

  j["params"]["hdbscan"] = hdbscan_params_json(params.hdbscan);
  j["params"]["stage1"] =
      params.stage1 ? hdbscan_params_json(*params.stage1)
                    : nlohmann::ordered_json(nullptr);
  j["params"]["stage2"] = nlohmann::ordered_json::array();
  for (const auto& override_params : params.stage2) {
    j["params"]["stage2"].push_back(
        override_params ? hdbscan_params_json(*override_params)
                        : nlohmann::ordered_json(nullptr));
  }

  j["stage1"] = {{"largest_label", det.stage1.largest_label},
                 {"cluster_sizes", cluster_sizes_array(det.stage1.labeling)},
                 {"noise_count", det.stage1.labeling.noise_count()},
                 {"trivial", det.stage1.trivial}};

  j["stage2"] = nlohmann::ordered_json::array();
  for (const auto& run : det.stage2) {
    j["stage2"].push_back({{"group", group_name(run.group)},
                           {"axis", axis_name(run.axis)},
                           {"event_count", run.event_indices.size()},
                           {"dominant_label", run.dominant_label},
                           {"cluster_sizes", cluster_sizes_array(run.labeling)},
                           {"noise_count", run.labeling.noise_count()},
                           {"degenerate", run.degenerate},
                           {"trivial", run.trivial}});
  }

  j["events"] = nlohmann::ordered_json::array();
  for (const auto& ev : det.per_event) {
    nlohmann::ordered_json e = {{"index", ev.index},
                                {"t_start", ev.t_start},
                                {"t_end", ev.t_end},
                                {"speed_mean", ev.speed_mean},
                                {"stage1_label", ev.stage1_label},
                                {"group", group_name(ev.group)}};
    for (int a = 0; a < 3; ++a) {
      const std::string key =
          std::string("stage2_") + axis_name(static_cast<Axis>(a));
      if (ev.has_stage2) {
        e[key] = ev.stage2_labels[static_cast<std::size_t>(a)];
      } else {
        e[key] = nullptr;
      }
    }
    e["anomaly"] = ev.is_anomaly;
    if (include_pothole) {
      e["pothole"] = ev.is_pothole;
    }
    j["events"].push_back(std::move(e));
  }

  out << j.dump(2) << '\n';
}

namespace {

Group group_from_name(const std::string& name) {
  if (name == "largest_cluster") return Group::LargestCluster;
  if (name == "outliers") return Group::Outliers;
  if (name == "minor_cluster") return Group::MinorCluster;
  throw std::runtime_error("result json: unknown group '" + name + "'");
}

Axis axis_from_name(const std::string& name) {
  if (name == "x") return Axis::X;
  if (name == "y") return Axis::Y;
  if (name == "z") return Axis::Z;
  throw std::runtime_error("result json: unknown axis '" + name + "'");
}

}  // namespace

DetectionResult read_result_json(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("result json: invalid JSON: ") + e.what());
  }
  try {
    DetectionResult det;
    for (const auto& e : j.at("events")) {
      EventDetection ev;
      ev.index = e.at("index").get<std::size_t>();
      ev.t_start = e.at("t_start").get<double>();
      ev.t_end = e.at("t_end").get<double>();
      ev.speed_mean = e.at("speed_mean").get<double>();
      ev.stage1_label = e.at("stage1_label").get<int>();
      ev.group = group_from_name(e.at("group").get<std::string>());
      ev.has_stage2 = !e.at("stage2_x").is_null();
      if (ev.has_stage2) {
        ev.stage2_labels = {e.at("stage2_x").get<int>(),
                            e.at("stage2_y").get<int>(),
                            e.at("stage2_z").get<int>()};
      }
      ev.is_anomaly = e.at("anomaly").get<bool>();
      if (e.contains("pothole")) {
        ev.is_pothole = e.at("pothole").get<bool>();
      }
      det.per_event.push_back(ev);
      if (ev.is_anomaly) ++det.anomaly_count;
    }

    const auto read_sizes = [](const nlohmann::json& arr) {
      std::map<int, std::size_t> sizes;
      int label = 0;
      for (const auto& v : arr) sizes[label++] = v.get<std::size_t>();
      return sizes;
    };

    const auto& s1 = j.at("stage1");
    det.stage1.largest_label = s1.at("largest_label").get<int>();
    det.stage1.trivial = s1.value("trivial", false);
    det.stage1.labeling.cluster_sizes = read_sizes(s1.at("cluster_sizes"));
    det.stage1.labeling.labels.reserve(det.per_event.size());
    for (const auto& ev : det.per_event) {
      det.stage1.labeling.labels.push_back(ev.stage1_label);
    }

    const auto& s2 = j.at("stage2");
    if (s2.size() != det.stage2.size()) {
      throw std::runtime_error("result json: expected 6 stage2 runs");
    }
    for (std::size_t r = 0; r < det.stage2.size(); ++r) {
      auto& run = det.stage2[r];
      run.group = group_from_name(s2[r].at("group").get<std::string>());
      run.axis = axis_from_name(s2[r].at("axis").get<std::string>());
      run.dominant_label = s2[r].at("dominant_label").get<int>();
      run.labeling.cluster_sizes = read_sizes(s2[r].at("cluster_sizes"));
      run.degenerate = s2[r].value("degenerate", false);
      run.trivial = s2[r].value("trivial", false);
      const int axis_pos = static_cast<int>(run.axis);
      for (std::size_t i = 0; i < det.per_event.size(); ++i) {
        const auto& ev = det.per_event[i];
        if (!ev.has_stage2 || ev.group != run.group) continue;
        run.event_indices.push_back(i);
        run.labeling.labels.push_back(
            ev.stage2_labels[static_cast<std::size_t>(axis_pos)]);
      }
      if (run.event_indices.size() !=
          s2[r].at("event_count").get<std::size_t>()) {
        throw std::runtime_error("result json: stage2 membership mismatch");
      }
    }
    return det;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("result json: missing or mistyped field: ") +
                             e.what());
  }
}

}  // namespace addcat::pipeline
