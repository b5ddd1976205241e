#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "addcat/ingest.hpp"

namespace addcat::synth {

enum class InjectionKind { Pothole, HarshBrake, HarshCorner };

const char* injection_kind_name(InjectionKind kind);

struct Injection {
  InjectionKind kind = InjectionKind::Pothole;
  double time_s = 0.0;     // offset from trip start
  double magnitude = 0.0;  // peak amplitude in the channel's unit, > 0
};

struct SpeedSegment {
  double from_s = 0.0;
  double speed = 0.0;  // m/s
};

// Road texture: multiplies the six sensor sigmas (not speed) from from_s on.
struct TextureSegment {
  double from_s = 0.0;
  double scale = 1.0;
};

struct NoiseSigmas {
  double speed = 0.0;
  double gsen_x = 0.0;
  double gsen_y = 0.0;
  double gsen_z = 0.0;
  double gyro_x = 0.0;
  double gyro_y = 0.0;
  double gyro_z = 0.0;
};

struct DriveScenario {
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  std::vector<SpeedSegment> speed_profile;  // piecewise constant, sorted by from_s
  std::vector<TextureSegment> texture_profile;  // optional; empty means scale 1 throughout
  NoiseSigmas noise;
  std::vector<Injection> injections;
};

struct TruthSpan {
  double t_start = 0.0;
  double t_end = 0.0;
  InjectionKind kind = InjectionKind::Pothole;
};

struct GeneratedDrive {
  std::vector<ingest::RawSample> samples;  // 5 Hz
  std::vector<bool> pothole_flags;         // per sample, pothole injections only
  std::vector<TruthSpan> spans;            // one per injection

  // Pothole spans as flagged time ranges.
  ingest::GroundTruth ground_truth() const;
};

constexpr double kSampleRateHz = 5.0;
constexpr double kSamplePeriodS = 1.0 / kSampleRateHz;
constexpr double kGravity = 9.81;  // resting gsen_z baseline, m/s^2

// Injection signatures (sample counts and coupled-channel gains).
constexpr int kPotholeSamples = 2;          // gsen_z +m then -m
constexpr double kPotholeGyroXGain = 0.06;  // rad/s per m/s^2 of spike
constexpr double kPotholeGyroYGain = 0.04;
constexpr int kBrakeSamples = 5;  // gsen_x ramps linearly to -m
constexpr int kCornerSamples = 4;
constexpr double kCornerGyroZGain = 0.08;

// Deterministic synthesis: mt19937_64 driven Box-Muller noise, channels
// drawn in a fixed order, so one seed gives one byte-identical stream on
// every platform. Throws on empty/invalid profiles, non-positive
// magnitudes, out-of-range or overlapping injections.
GeneratedDrive generate(const DriveScenario& scenario);

DriveScenario load_scenario(std::istream& in);
DriveScenario load_scenario_file(const std::string& path);
void write_scenario(std::ostream& out, const DriveScenario& scenario);

}  // namespace addcat::synth
