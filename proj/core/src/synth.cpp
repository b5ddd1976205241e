#include "addcat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace addcat::synth {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Box-Muller over explicit 53-bit uniforms. std::normal_distribution is
// implementation-defined, so it cannot back a cross-platform byte-identical
// stream.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  double uniform01() {
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }

  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

int injection_length(InjectionKind kind) {
  switch (kind) {
    case InjectionKind::Pothole:
      return kPotholeSamples;
    case InjectionKind::HarshBrake:
      return kBrakeSamples;
    case InjectionKind::HarshCorner:
      return kCornerSamples;
  }
  return 0;
}

double profile_speed(const std::vector<SpeedSegment>& profile, double t) {
  double speed = profile.front().speed;
  for (const auto& seg : profile) {
    if (seg.from_s <= t) {
      speed = seg.speed;
    } else {
      break;
    }
  }
  return speed;
}

double profile_texture(const std::vector<TextureSegment>& profile, double t) {
  double scale = 1.0;
  for (const auto& seg : profile) {
    if (seg.from_s <= t) {
      scale = seg.scale;
    } else {
      break;
    }
  }
  return scale;
}

void validate(const DriveScenario& s, std::size_t n_samples) {
  if (!(s.duration_s > 0.0)) {
    throw std::runtime_error("scenario: duration_s must be > 0");
  }
  if (s.speed_profile.empty()) {
    throw std::runtime_error("scenario: speed_profile must not be empty");
  }
  for (std::size_t i = 0; i < s.speed_profile.size(); ++i) {
    const auto& seg = s.speed_profile[i];
    if (!std::isfinite(seg.from_s) || !std::isfinite(seg.speed)) {
      throw std::runtime_error("scenario: non-finite speed segment");
    }
    if (seg.speed < 0.0) {
      throw std::runtime_error("scenario: segment speed must be >= 0");
    }
    if (i > 0 && seg.from_s <= s.speed_profile[i - 1].from_s) {
      throw std::runtime_error(
          "scenario: speed_profile must be sorted by strictly increasing from_s");
    }
  }
  for (std::size_t i = 0; i < s.texture_profile.size(); ++i) {
    const auto& seg = s.texture_profile[i];
    if (!std::isfinite(seg.from_s) || !std::isfinite(seg.scale)) {
      throw std::runtime_error("scenario: non-finite texture segment");
    }
    if (!(seg.scale > 0.0)) {
      throw std::runtime_error("scenario: texture scale must be > 0");
    }
    if (i > 0 && seg.from_s <= s.texture_profile[i - 1].from_s) {
      throw std::runtime_error(
          "scenario: texture_profile must be sorted by strictly increasing from_s");
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& inj : s.injections) {
    if (!(inj.magnitude > 0.0) || !std::isfinite(inj.magnitude)) {
      throw std::runtime_error("scenario: injection magnitude must be > 0");
    }
    if (!std::isfinite(inj.time_s) || inj.time_s < 0.0) {
      throw std::runtime_error("scenario: injection time_s must be >= 0");
    }
    const auto first =
        static_cast<std::size_t>(std::ceil(inj.time_s * kSampleRateHz));
    const auto last = first + static_cast<std::size_t>(injection_length(inj.kind)) - 1;
    if (last >= n_samples) {
      throw std::runtime_error("scenario: injection extends past duration_s");
    }
    spans.emplace_back(first, last);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first <= spans[i - 1].second) {
      throw std::runtime_error("scenario: overlapping injections");
    }
  }
}

}  // namespace

const char* injection_kind_name(InjectionKind kind) {
  switch (kind) {
    case InjectionKind::Pothole:
      return "pothole";
    case InjectionKind::HarshBrake:
      return "harsh_brake";
    case InjectionKind::HarshCorner:
      return "harsh_corner";
  }
  return "unknown";
}

ingest::GroundTruth GeneratedDrive::ground_truth() const {
  ingest::GroundTruth truth;
  for (const auto& span : spans) {
    if (span.kind == InjectionKind::Pothole) {
      truth.ranges.push_back({span.t_start, span.t_end, true});
    }
  }
  return truth;
}

GeneratedDrive generate(const DriveScenario& scenario) {
  const auto n = static_cast<std::size_t>(
      std::floor(scenario.duration_s * kSampleRateHz));
  validate(scenario, n);

  GaussianStream noise(scenario.seed);
  GeneratedDrive drive;
  drive.samples.resize(n);
  drive.pothole_flags.assign(n, false);

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * kSamplePeriodS;
    auto& s = drive.samples[k];
    s.timestamp = t;
    s.latitude = 24.0 + 2e-6 * static_cast<double>(k);
    s.longitude = 121.0 + 2e-6 * static_cast<double>(k);
    // One draw per channel per sample, fixed order, taken even when a sigma
    // is zero so toggling one channel's noise leaves the others unchanged.
    const double e_speed = noise.next();
    const double e_gx = noise.next();
    const double e_gy = noise.next();
    const double e_gz = noise.next();
    const double e_rx = noise.next();
    const double e_ry = noise.next();
    const double e_rz = noise.next();
    const double tex = profile_texture(scenario.texture_profile, t);
    s.speed = std::max(
        0.0, profile_speed(scenario.speed_profile, t) + scenario.noise.speed * e_speed);
    s.gsen_x = tex * scenario.noise.gsen_x * e_gx;
    s.gsen_y = tex * scenario.noise.gsen_y * e_gy;
    s.gsen_z = kGravity + tex * scenario.noise.gsen_z * e_gz;
    s.gyro_x = tex * scenario.noise.gyro_x * e_rx;
    s.gyro_y = tex * scenario.noise.gyro_y * e_ry;
    s.gyro_z = tex * scenario.noise.gyro_z * e_rz;
  }

  for (const auto& inj : scenario.injections) {
    const auto first =
        static_cast<std::size_t>(std::ceil(inj.time_s * kSampleRateHz));
    const int len = injection_length(inj.kind);
    switch (inj.kind) {
      case InjectionKind::Pothole: {
        auto& a = drive.samples[first];
        auto& b = drive.samples[first + 1];
        a.gsen_z += inj.magnitude;
        b.gsen_z -= inj.magnitude;
        a.gyro_x += kPotholeGyroXGain * inj.magnitude;
        b.gyro_x -= kPotholeGyroXGain * inj.magnitude;
        a.gyro_y += kPotholeGyroYGain * inj.magnitude;
        b.gyro_y -= kPotholeGyroYGain * inj.magnitude;
        drive.pothole_flags[first] = true;
        drive.pothole_flags[first + 1] = true;
        break;
      }
      case InjectionKind::HarshBrake: {
        for (int i = 0; i < len; ++i) {
          drive.samples[first + static_cast<std::size_t>(i)].gsen_x -=
              inj.magnitude * static_cast<double>(i + 1) / static_cast<double>(len);
        }
        break;
      }
      case InjectionKind::HarshCorner: {
        static constexpr double kShape[kCornerSamples] = {0.5, 1.0, 1.0, 0.5};
        for (int i = 0; i < len; ++i) {
          auto& s = drive.samples[first + static_cast<std::size_t>(i)];
          s.gsen_y += inj.magnitude * kShape[i];
          s.gyro_z += kCornerGyroZGain * inj.magnitude * kShape[i];
        }
        break;
      }
    }
    const double t0 = drive.samples[first].timestamp;
    const double t1 =
        drive.samples[first + static_cast<std::size_t>(len) - 1].timestamp;
    drive.spans.push_back({t0, t1, inj.kind});
  }

  return drive;
}

namespace {

InjectionKind parse_kind(const std::string& text) {
  if (text == "pothole") return InjectionKind::Pothole;
  if (text == "harsh_brake") return InjectionKind::HarshBrake;
  if (text == "harsh_corner") return InjectionKind::HarshCorner;
  throw std::runtime_error("scenario: unknown injection kind '" + text + "'");
}

}  // namespace

DriveScenario load_scenario(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("scenario: invalid JSON: ") + e.what());
  }
  try {
    DriveScenario s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.duration_s = j.at("duration_s").get<double>();
    for (const auto& seg : j.at("speed_profile")) {
      s.speed_profile.push_back(
          {seg.at("from_s").get<double>(), seg.at("speed").get<double>()});
    }
    if (j.contains("texture_profile")) {
      for (const auto& seg : j.at("texture_profile")) {
        s.texture_profile.push_back(
            {seg.at("from_s").get<double>(), seg.at("scale").get<double>()});
      }
    }
    if (j.contains("noise_sigmas")) {
      const auto& n = j.at("noise_sigmas");
      s.noise.speed = n.value("speed", 0.0);
      s.noise.gsen_x = n.value("gsen_x", 0.0);
      s.noise.gsen_y = n.value("gsen_y", 0.0);
      s.noise.gsen_z = n.value("gsen_z", 0.0);
      s.noise.gyro_x = n.value("gyro_x", 0.0);
      s.noise.gyro_y = n.value("gyro_y", 0.0);
      s.noise.gyro_z = n.value("gyro_z", 0.0);
    }
    if (j.contains("injections")) {
      for (const auto& inj : j.at("injections")) {
        s.injections.push_back({parse_kind(inj.at("kind").get<std::string>()),
                                inj.at("time_s").get<double>(),
                                inj.at("magnitude").get<double>()});
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("scenario: missing or mistyped field: ") +
                             e.what());
  }
}

DriveScenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("scenario: cannot open " + path);
  }
  return load_scenario(in);
}

void write_scenario(std::ostream& out, const DriveScenario& scenario) {
  nlohmann::ordered_json j;
  j["seed"] = scenario.seed;
  j["duration_s"] = scenario.duration_s;
  j["speed_profile"] = nlohmann::ordered_json::array();
  for (const auto& seg : scenario.speed_profile) {
    j["speed_profile"].push_back({{"from_s", seg.from_s}, {"speed", seg.speed}});
  }
  if (!scenario.texture_profile.empty()) {
    j["texture_profile"] = nlohmann::ordered_json::array();
    for (const auto& seg : scenario.texture_profile) {
      j["texture_profile"].push_back(
          {{"from_s", seg.from_s}, {"scale", seg.scale}});
    }
  }
  j["noise_sigmas"] = {{"speed", scenario.noise.speed},
                       {"gsen_x", scenario.noise.gsen_x},
                       {"gsen_y", scenario.noise.gsen_y},
                       {"gsen_z", scenario.noise.gsen_z},
                       {"gyro_x", scenario.noise.gyro_x},
                       {"gyro_y", scenario.noise.gyro_y},
                       {"gyro_z", scenario.noise.gyro_z}};
  j["injections"] = nlohmann::ordered_json::array();
  for (const auto& inj : scenario.injections) {
    j["injections"].push_back({{"kind", injection_kind_name(inj.kind)},
                               {"time_s", inj.time_s},
                               {"magnitude", inj.magnitude}});
  }
  out << j.dump(2) << '\n';
}

}  // namespace addcat::synth
