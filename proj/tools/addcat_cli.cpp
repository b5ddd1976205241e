// Command line front end: synthesize drives, run detection, evaluate
// against ground truth.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "addcat/eval.hpp"
#include "addcat/features.hpp"
#include "addcat/hdbscan.hpp"
#include "addcat/ingest.hpp"
#include "addcat/pipeline.hpp"
#include "addcat/synth.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitPipeline = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One bag of settings for every subcommand; a config file fills it first,
// flags override field by field.
struct CliConfig {
  std::string config_path;
  std::string input;
  std::string labels;
  std::string out;  // empty: "addcat_out", or --from for evaluate
  std::string from;
  std::string scenario;
  std::size_t window_size = 10;
  int min_cluster_size = 5;
  int min_samples = 0;  // 0: same as min_cluster_size
  double epsilon_speed = 0.5;
  bool allow_single_cluster = false;
  bool strict = false;
  bool emit_events = false;
  bool emit_trees = false;
  json stage1_override;  // null or object
  json stage2_override;  // null or object keyed by run name
};

const std::array<const char*, 6> kRunKeys = {
    "largest_cluster_x", "largest_cluster_y", "largest_cluster_z",
    "outliers_x",        "outliers_y",        "outliers_z"};

void load_config_file(CliConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path + ": invalid JSON: " + e.what());
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "input") cfg.input = value.get<std::string>();
      else if (key == "labels") cfg.labels = value.get<std::string>();
      else if (key == "out") cfg.out = value.get<std::string>();
      else if (key == "from") cfg.from = value.get<std::string>();
      else if (key == "scenario") cfg.scenario = value.get<std::string>();
      else if (key == "window_size") cfg.window_size = value.get<std::size_t>();
      else if (key == "min_cluster_size") cfg.min_cluster_size = value.get<int>();
      else if (key == "min_samples") cfg.min_samples = value.get<int>();
      else if (key == "epsilon_speed") cfg.epsilon_speed = value.get<double>();
      else if (key == "allow_single_cluster") cfg.allow_single_cluster = value.get<bool>();
      else if (key == "strict") cfg.strict = value.get<bool>();
      else if (key == "emit_events") cfg.emit_events = value.get<bool>();
      else if (key == "emit_trees") cfg.emit_trees = value.get<bool>();
      else if (key == "stage1") cfg.stage1_override = value;
      else if (key == "stage2") cfg.stage2_override = value;
      else throw UsageError("config " + path + ": unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw UsageError("config " + path + ": mistyped value: " + e.what());
  }
}

addcat::hdbscan::Params apply_override(addcat::hdbscan::Params base, const json& o,
                                       const std::string& what) {
  try {
    if (o.contains("min_cluster_size")) base.min_cluster_size = o.at("min_cluster_size").get<int>();
    if (o.contains("min_samples")) base.min_samples = o.at("min_samples").get<int>();
    if (o.contains("allow_single_cluster"))
      base.allow_single_cluster = o.at("allow_single_cluster").get<bool>();
  } catch (const json::exception& e) {
    throw UsageError("config: bad " + what + " override: " + e.what());
  }
  for (const auto& [key, value] : o.items()) {
    (void)value;
    if (key != "min_cluster_size" && key != "min_samples" && key != "allow_single_cluster") {
      throw UsageError("config: unknown key '" + key + "' in " + what + " override");
    }
  }
  return base;
}

addcat::pipeline::Params build_params(const CliConfig& cfg) {
  if (cfg.window_size < 2) throw UsageError("--window-size must be >= 2");
  if (cfg.min_cluster_size < 2) throw UsageError("--min-cluster-size must be >= 2");
  if (cfg.min_samples < 0) throw UsageError("--min-samples must be >= 0");
  if (!(cfg.epsilon_speed > 0.0)) throw UsageError("--epsilon-speed must be > 0");

  addcat::pipeline::Params p;
  p.window_size = cfg.window_size;
  p.epsilon_speed = cfg.epsilon_speed;
  p.hdbscan.min_cluster_size = cfg.min_cluster_size;
  p.hdbscan.min_samples = cfg.min_samples;
  p.hdbscan.allow_single_cluster = cfg.allow_single_cluster;

  if (cfg.stage1_override.is_object()) {
    p.stage1 = apply_override(p.hdbscan, cfg.stage1_override, "stage1");
  } else if (!cfg.stage1_override.is_null()) {
    throw UsageError("config: stage1 override must be an object");
  }
  if (cfg.stage2_override.is_object()) {
    for (const auto& [key, value] : cfg.stage2_override.items()) {
      bool known = false;
      for (std::size_t r = 0; r < kRunKeys.size(); ++r) {
        if (key == kRunKeys[r]) {
          p.stage2[r] = apply_override(p.hdbscan, value, key);
          known = true;
          break;
        }
      }
      if (!known) throw UsageError("config: unknown stage2 run '" + key + "'");
    }
  } else if (!cfg.stage2_override.is_null()) {
    throw UsageError("config: stage2 override must be an object");
  }
  return p;
}

ordered_json params_json(const addcat::hdbscan::Params& p) {
  return {{"min_cluster_size", p.min_cluster_size},
          {"min_samples", p.effective_min_samples()},
          {"allow_single_cluster", p.allow_single_cluster}};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void write_resolved_config(const std::string& dir, const std::string& command,
                           const CliConfig& cfg, const addcat::pipeline::Params* params) {
  ordered_json j;
  j["command"] = command;
  if (!cfg.input.empty()) j["input"] = cfg.input;
  if (!cfg.labels.empty()) j["labels"] = cfg.labels;
  if (!cfg.from.empty()) j["from"] = cfg.from;
  if (!cfg.scenario.empty()) j["scenario"] = cfg.scenario;
  j["out"] = dir;
  if (params) {
    j["window_size"] = params->window_size;
    j["epsilon_speed"] = params->epsilon_speed;
    j["strict"] = cfg.strict;
    j["emit_events"] = cfg.emit_events;
    j["emit_trees"] = cfg.emit_trees;
    j["hdbscan"] = params_json(params->hdbscan);
    j["stage1"] = params_json(params->stage1_params());
    j["stage2"] = ordered_json::object();
    for (std::size_t r = 0; r < kRunKeys.size(); ++r) {
      j["stage2"][kRunKeys[r]] = params_json(
          params->stage2_params(static_cast<int>(r) / 3,
                                static_cast<addcat::pipeline::Axis>(r % 3)));
    }
  }
  auto out = open_out(dir + "/resolved_config.json");
  out << j.dump(2) << '\n';
}

std::vector<addcat::ingest::RawSample> load_trip(const CliConfig& cfg,
                                                 std::vector<std::string>* warnings) {
  std::ifstream in(cfg.input);
  if (!in) throw IoError("cannot open input " + cfg.input);
  try {
    addcat::ingest::ParseOptions opts;
    opts.strict = cfg.strict;
    auto parsed = addcat::ingest::parse_trip(in, addcat::ingest::ColumnMap::defaults(), opts);
    if (warnings) {
      warnings->insert(warnings->end(), parsed.warnings.begin(), parsed.warnings.end());
      for (const auto& rej : parsed.rejected) {
        warnings->push_back("input line " + std::to_string(rej.line) + ": " + rej.message);
      }
    }
    return parsed.samples;
  } catch (const std::exception& e) {
    throw IoError("input " + cfg.input + ": " + e.what());
  }
}

addcat::ingest::GroundTruth load_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels " + path);
  try {
    return addcat::ingest::parse_ground_truth(in);
  } catch (const std::exception& e) {
    throw IoError("labels " + path + ": " + e.what());
  }
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::string percent(std::size_t part, std::size_t whole) {
  char buf[32];
  const double pct = whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) /
                                            static_cast<double>(whole);
  std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
  return buf;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string resolve_out(const CliConfig& cfg, const std::string& fallback) {
  if (!cfg.out.empty()) return cfg.out;
  return fallback.empty() ? std::string("addcat_out") : fallback;
}

void emit_detection_files(const std::string& dir, const addcat::pipeline::RunOutput& run,
                          const addcat::pipeline::Params& params, const CliConfig& cfg,
                          bool with_pothole) {
  ensure_dir(dir);
  {
    auto out = open_out(dir + "/result.json");
    addcat::pipeline::write_result_json(out, run, params, with_pothole);
  }
  if (cfg.emit_events) {
    auto out = open_out(dir + "/events.csv");
    addcat::features::write_events_csv(out, run.events);
  }
  if (cfg.emit_trees) {
    ensure_dir(dir + "/trees");
    if (run.detection.stage1.condensed.n_points > 0) {
      auto out = open_out(dir + "/trees/stage1.json");
      run.detection.stage1.condensed.write_json(out);
    }
    for (std::size_t r = 0; r < run.detection.stage2.size(); ++r) {
      const auto& tree = run.detection.stage2[r].condensed;
      if (tree.n_points == 0) continue;
      auto out = open_out(dir + "/trees/stage2_" + std::string(kRunKeys[r]) + ".json");
      tree.write_json(out);
    }
  }
}

void emit_report_files(const std::string& dir, const addcat::eval::EvalReport& report) {
  ensure_dir(dir);
  {
    auto out = open_out(dir + "/report.json");
    addcat::eval::write_report_json(out, report);
  }
  {
    auto out = open_out(dir + "/report.csv");
    addcat::eval::write_report_csv(out, report);
  }
}

void print_report_summary(const addcat::eval::EvalReport& report) {
  const auto& m = report.confusion;
  std::cout << "tp/fp/fn/tn: " << m.tp << '/' << m.fp << '/' << m.fn << '/' << m.tn
            << '\n';
  std::cout << "accuracy: " << fixed4(report.accuracy) << '\n';
  if (report.precision_defined) std::cout << "precision: " << fixed4(report.precision) << '\n';
  if (report.recall_defined) std::cout << "recall: " << fixed4(report.recall) << '\n';
}

int cmd_detect(const CliConfig& cfg, bool with_eval) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto params = build_params(cfg);
  std::vector<std::string> warnings;
  const auto samples = load_trip(cfg, &warnings);

  auto run = addcat::pipeline::run_addcat(samples, params);
  warnings.insert(warnings.end(), run.warnings.begin(), run.warnings.end());
  run.warnings = warnings;

  addcat::ingest::GroundTruth truth;
  const bool with_labels = !cfg.labels.empty();
  if (with_labels) {
    truth = load_truth(cfg.labels);
    if (truth.empty()) {
      run.warnings.push_back("labels " + cfg.labels + ": no usable entries");
    }
    addcat::eval::apply_ground_truth(run.events, truth);
    addcat::eval::apply_ground_truth(run.detection.per_event, truth);
  }

  const std::string dir = resolve_out(cfg, "");
  emit_detection_files(dir, run, params, cfg, with_labels);
  write_resolved_config(dir, with_eval ? "pipeline" : "detect", cfg, &params);

  if (with_eval) {
    if (truth.empty()) {
      throw UsageError("evaluation unavailable: ground truth is empty (" + cfg.labels + ")");
    }
    const auto report = addcat::eval::build_report(run.detection, &run.events);
    emit_report_files(dir, report);
    print_report_summary(report);
  }

  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
  print_warnings(run.warnings);
  const auto& det = run.detection;
  std::cout << "events: " << det.per_event.size() << '\n';
  std::cout << "anomalies: " << det.anomaly_count << " ("
            << percent(det.anomaly_count, det.per_event.size()) << ")\n";
  std::cout << "largest cluster: label " << det.stage1.largest_label << " ("
            << det.stage1.labeling.cluster_sizes.at(det.stage1.largest_label)
            << " events)\n";
  std::cout << "elapsed_ms: " << elapsed << '\n';
  std::cout << "wrote: " << dir << "/result.json\n";
  return kExitOk;
}

int cmd_evaluate(const CliConfig& cfg) {
  const auto truth = load_truth(cfg.labels);
  if (truth.empty()) {
    throw UsageError("evaluation unavailable: ground truth is empty (" + cfg.labels + ")");
  }

  const std::string result_path = cfg.from + "/result.json";
  std::ifstream in(result_path);
  if (!in) throw IoError("cannot open " + result_path + " (run detect first)");
  addcat::pipeline::DetectionResult det;
  try {
    det = addcat::pipeline::read_result_json(in);
  } catch (const std::exception& e) {
    throw IoError(result_path + ": " + e.what());
  }
  addcat::eval::apply_ground_truth(det.per_event, truth);

  std::vector<addcat::features::Event> events;
  bool have_events = false;
  const std::string events_path = cfg.from + "/events.csv";
  if (std::ifstream events_in(events_path); events_in) {
    try {
      events = addcat::features::read_events_csv(events_in);
      have_events = true;
    } catch (const std::exception& e) {
      throw IoError(events_path + ": " + e.what());
    }
  } else {
    std::cerr << "warning: " << events_path
              << " not found; per-feature comparison limited to speed\n";
  }

  const auto report = addcat::eval::build_report(det, have_events ? &events : nullptr);
  const std::string dir = resolve_out(cfg, cfg.from);
  emit_report_files(dir, report);
  write_resolved_config(dir, "evaluate", cfg, nullptr);
  print_report_summary(report);
  std::cout << "wrote: " << dir << "/report.json " << dir << "/report.csv\n";
  return kExitOk;
}

int cmd_synth(const CliConfig& cfg) {
  std::ifstream in(cfg.scenario);
  if (!in) throw IoError("cannot open scenario " + cfg.scenario);

  addcat::synth::DriveScenario scenario;
  addcat::synth::GeneratedDrive drive;
  try {
    scenario = addcat::synth::load_scenario(in);
    drive = addcat::synth::generate(scenario);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  const std::string dir = resolve_out(cfg, "");
  ensure_dir(dir);
  {
    auto out = open_out(dir + "/trip.csv");
    addcat::ingest::write_trip_csv(out, drive.samples);
  }
  {
    auto out = open_out(dir + "/truth.csv");
    addcat::ingest::write_ground_truth_csv(out, drive.ground_truth());
  }
  {
    std::ostringstream echo;
    addcat::synth::write_scenario(echo, scenario);
    ordered_json j;
    j["command"] = "synth";
    j["scenario"] = cfg.scenario;
    j["out"] = dir;
    j["resolved_scenario"] = ordered_json::parse(echo.str());
    auto out = open_out(dir + "/resolved_config.json");
    out << j.dump(2) << '\n';
  }

  std::size_t potholes = 0;
  for (const auto& span : drive.spans) {
    if (span.kind == addcat::synth::InjectionKind::Pothole) ++potholes;
  }
  std::cout << "samples: " << drive.samples.size() << '\n';
  std::cout << "injections: " << drive.spans.size() << " (" << potholes
            << " potholes)\n";
  std::cout << "wrote: " << dir << "/trip.csv " << dir << "/truth.csv\n";
  return kExitOk;
}

// The config file loads before flag parsing so flags win field by field.
std::string prescan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CliConfig cfg;
  try {
    const std::string config_path = prescan_config_path(argc, argv);
    if (!config_path.empty()) {
      cfg.config_path = config_path;
      load_config_file(cfg, config_path);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }

  CLI::App app{"Driving anomaly detection by two-stage density clustering"};
  app.require_subcommand(1);

  auto add_detect_flags = [&](CLI::App* cmd, bool labels_required) {
    cmd->add_option("--input", cfg.input, "Trip CSV (5 Hz samples)")
        ->required(cfg.input.empty());
    auto* labels = cmd->add_option("--labels", cfg.labels,
                                   "Ground truth CSV (event indices or time ranges)");
    if (labels_required && cfg.labels.empty()) labels->required();
    cmd->add_option("--out", cfg.out, "Output directory (default addcat_out)");
    cmd->add_option("--window-size", cfg.window_size, "Samples per event (default 10)");
    cmd->add_option("--min-cluster-size", cfg.min_cluster_size,
                    "Smallest cluster size (default 5)");
    cmd->add_option("--min-samples", cfg.min_samples,
                    "Core distance neighbor count (default: min cluster size)");
    cmd->add_option("--epsilon-speed", cfg.epsilon_speed,
                    "Speed floor for calibration division (default 0.5)");
    cmd->add_flag("--allow-single-cluster", cfg.allow_single_cluster,
                  "Let the hierarchy root win cluster selection");
    cmd->add_flag("--strict", cfg.strict, "Reject instead of skip bad input rows");
    cmd->add_flag("--emit-events", cfg.emit_events, "Write events.csv next to the result");
    cmd->add_flag("--emit-trees", cfg.emit_trees, "Write condensed trees as JSON");
    cmd->add_option("--config", cfg.config_path,
                    "JSON config file; flags override its fields");
  };

  auto* detect = app.add_subcommand("detect", "Window, calibrate and cluster a trip");
  add_detect_flags(detect, false);

  auto* evaluate =
      app.add_subcommand("evaluate", "Score a detect run against ground truth");
  evaluate->add_option("--from", cfg.from, "Directory written by detect")
      ->required(cfg.from.empty());
  evaluate
      ->add_option("--labels", cfg.labels,
                   "Ground truth CSV; required, evaluation needs labeled potholes")
      ->required(cfg.labels.empty());
  evaluate->add_option("--out", cfg.out, "Output directory (default: --from)");
  evaluate->add_option("--config", cfg.config_path,
                       "JSON config file; flags override its fields");

  auto* synth = app.add_subcommand("synth", "Generate a drive from a scenario JSON");
  synth->add_option("--scenario", cfg.scenario, "Scenario JSON")
      ->required(cfg.scenario.empty());
  synth->add_option("--out", cfg.out, "Output directory (default addcat_out)");

  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "detect + evaluate in one run");
  add_detect_flags(pipeline_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\nrun with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(detect)) return cmd_detect(cfg, false);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(cfg);
    if (app.got_subcommand(synth)) return cmd_synth(cfg);
    if (app.got_subcommand(pipeline_cmd)) return cmd_detect(cfg, true);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const addcat::pipeline::PipelineError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
