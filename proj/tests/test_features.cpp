#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "addcat/features.hpp"
#include "addcat/ingest.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace addcat;

namespace {

std::vector<ingest::RawSample> constant_samples(std::size_t n, double speed,
                                                double gsen_z) {
  std::vector<ingest::RawSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    samples[i].timestamp = 0.2 * static_cast<double>(i);
    samples[i].speed = speed;
    samples[i].gsen_z = gsen_z;
  }
  return samples;
}

// Events whose feature `f` sits exactly on y = a*x + b over the given speeds.
std::vector<features::Event> line_events(const std::vector<double>& speeds, int f,
                                         double a, double b) {
  std::vector<features::Event> events(speeds.size());
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    events[i].index = i;
    events[i].raw_as[features::kSpeedMean] = speeds[i];
    events[i].raw_as[static_cast<std::size_t>(f)] = a * speeds[i] + b;
  }
  return events;
}

}  // namespace

TEST_CASE("zero-variance window") {
  const auto samples = constant_samples(10, 5.0, 9.8);
  const auto events = features::window(samples);
  REQUIRE(events.size() == 1);
  const auto& as = events[0].raw_as;
  CHECK(as[features::kSpeedMean] == 5.0);
  CHECK(as[features::kSpeedStd] == 0.0);
  CHECK(as[features::kGsenZMax] == 9.8);
  CHECK(as[features::kGsenZMin] == 9.8);
  CHECK(as[features::kGsenZStd] == 0.0);
  CHECK(as[features::kGyroXStd] == 0.0);
  CHECK(events[0].t_start == 0.0);
  CHECK(events[0].t_end == doctest::Approx(1.8));
}

TEST_CASE("gsen_x 1..10 window statistics") {
  auto samples = constant_samples(10, 5.0, 9.8);
  for (std::size_t i = 0; i < 10; ++i) samples[i].gsen_x = static_cast<double>(i + 1);
  const auto events = features::window(samples);
  REQUIRE(events.size() == 1);
  CHECK(events[0].raw_as[features::kGsenXMax] == 10.0);
  CHECK(events[0].raw_as[features::kGsenXMin] == 1.0);
  CHECK(events[0].raw_as[features::kGsenXStd] ==
        doctest::Approx(3.027650354097492).epsilon(1e-14));
}

TEST_CASE("event count is floor(n / window_size), remainder dropped") {
  const auto samples = constant_samples(57, 3.0, 9.8);
  const auto events = features::window(samples);
  CHECK(events.size() == 5);
  CHECK(events.back().index == 4);
}

TEST_CASE("too few samples yields no events and a warning") {
  const auto samples = constant_samples(7, 3.0, 9.8);
  std::vector<std::string> warnings;
  const auto events = features::window(samples, 10, &warnings);
  CHECK(events.empty());
  CHECK(!warnings.empty());
}

TEST_CASE("every statistic matches the long-double recomputation") {
  std::mt19937_64 rng(1905);
  std::vector<ingest::RawSample> samples(237);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& s = samples[i];
    s.timestamp = 0.2 * static_cast<double>(i);
    s.speed = generators::uniform(rng, 0.0, 30.0);
    s.gsen_x = generators::uniform(rng, -3.0, 3.0);
    s.gsen_y = generators::uniform(rng, -3.0, 3.0);
    s.gsen_z = generators::uniform(rng, 5.0, 15.0);
    s.gyro_x = generators::uniform(rng, -1.0, 1.0);
    s.gyro_y = generators::uniform(rng, -1.0, 1.0);
    s.gyro_z = generators::uniform(rng, -1.0, 1.0);
  }
  const auto events = features::window(samples);
  REQUIRE(events.size() == 23);
  for (std::size_t e = 0; e < events.size(); ++e) {
    const auto ref = oracle::naive_window_stats(samples, e * 10, 10);
    for (int f = 0; f < features::kAsCount; ++f) {
      const double got = events[e].raw_as[static_cast<std::size_t>(f)];
      const double want = ref[static_cast<std::size_t>(f)];
      const double scale = std::max({std::abs(got), std::abs(want), 1e-30});
      CHECK(std::abs(got - want) / scale <= 1e-12);
    }
  }
}

TEST_CASE("speed fit on an exact line") {
  const auto events = line_events({1, 2, 5, 9, 14}, features::kGsenZStd, 2.0, 1.0);
  const auto fit = features::fit_speed_model(events, features::kGsenZStd);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("speed fit through (1,1), (2,3), (3,2)") {
  std::vector<features::Event> events(3);
  const double xs[] = {1, 2, 3};
  const double ys[] = {1, 3, 2};
  for (int i = 0; i < 3; ++i) {
    events[static_cast<std::size_t>(i)].raw_as[features::kSpeedMean] = xs[i];
    events[static_cast<std::size_t>(i)].raw_as[features::kGsenZStd] = ys[i];
  }
  const auto fit = features::fit_speed_model(events, features::kGsenZStd);
  CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("fit residuals satisfy the normal equations") {
  std::mt19937_64 rng(62);
  std::vector<features::Event> events(120);
  for (auto& ev : events) {
    ev.raw_as[features::kSpeedMean] = generators::uniform(rng, 1.0, 30.0);
    ev.raw_as[features::kGyroYStd] =
        0.03 * ev.raw_as[features::kSpeedMean] + 0.4 + 0.05 * generators::gaussian(rng);
  }
  const auto fit = features::fit_speed_model(events, features::kGyroYStd);
  double sum_r = 0.0, sum_rx = 0.0, scale = 0.0;
  for (const auto& ev : events) {
    const double x = ev.raw_as[features::kSpeedMean];
    const double r = ev.raw_as[features::kGyroYStd] - fit.slope * x - fit.intercept;
    sum_r += r;
    sum_rx += r * x;
    scale = std::max(scale, std::abs(x));
  }
  const double n = static_cast<double>(events.size());
  CHECK(std::abs(sum_r) <= 1e-9 * n * scale);
  CHECK(std::abs(sum_rx) <= 1e-9 * n * scale * scale);
}

TEST_CASE("direct calibration arithmetic: y=7, a=2, b=1, x=3 gives 1") {
  features::CalibrationModel model;
  model.calibrated[features::kGsenZStd] = true;
  model.fits[features::kGsenZStd] = {2.0, 1.0};
  std::vector<features::Event> events(1);
  events[0].raw_as[features::kSpeedMean] = 3.0;
  events[0].raw_as[features::kGsenZStd] = 7.0;
  features::calibrate(events, model);
  CHECK(events[0].calibrated_as[features::kGsenZStd] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("noiseless speed-linear features calibrate to one") {
  std::mt19937_64 rng(777);
  std::vector<double> speeds;
  for (int i = 0; i < 50; ++i) speeds.push_back(generators::uniform(rng, 1.0, 30.0));
  auto events = line_events(speeds, features::kGsenZStd, 0.09, 0.35);
  for (std::size_t i = 0; i < events.size(); ++i) {
    // a second calibrated feature on a different line
    events[i].raw_as[features::kGyroXStd] = -0.02 * speeds[i] + 1.4;
  }
  const auto model = features::fit_calibration(events);
  features::calibrate(events, model);
  for (const auto& ev : events) {
    CHECK(ev.calibrated_as[features::kGsenZStd] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ev.calibrated_as[features::kGyroXStd] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("calibration removes the speed dependence of noisy features") {
  std::mt19937_64 rng(4242);
  std::vector<features::Event> events(400);
  for (auto& ev : events) {
    const double x = generators::uniform(rng, 1.0, 30.0);
    ev.raw_as[features::kSpeedMean] = x;
    ev.raw_as[features::kGsenZStd] = 0.12 * x + 0.8 + 0.1 * generators::gaussian(rng);
  }
  const auto before = features::fit_speed_model(events, features::kGsenZStd);
  const auto model = features::fit_calibration(events);
  features::calibrate(events, model);
  // refit the calibrated values against speed
  auto refit_events = events;
  for (auto& ev : refit_events)
    ev.raw_as[features::kGsenZStd] = ev.calibrated_as[features::kGsenZStd];
  const auto after = features::fit_speed_model(refit_events, features::kGsenZStd);
  CHECK(std::abs(after.slope) < 0.05 * std::abs(before.slope));
}

TEST_CASE("speed_mean passes through calibration unchanged") {
  std::mt19937_64 rng(99);
  std::vector<double> speeds;
  for (int i = 0; i < 30; ++i) speeds.push_back(generators::uniform(rng, 1.0, 30.0));
  auto events = line_events(speeds, features::kGsenZStd, 0.1, 0.2);
  const auto model = features::fit_calibration(events);
  CHECK(!model.calibrated[features::kSpeedMean]);
  features::calibrate(events, model);
  for (std::size_t i = 0; i < events.size(); ++i)
    CHECK(events[i].calibrated_as[features::kSpeedMean] == speeds[i]);
}

TEST_CASE("near-zero slope falls back to residuals with a warning") {
  std::vector<double> speeds{1, 5, 10, 15, 20, 25};
  auto events = line_events(speeds, features::kGsenZStd, 0.1, 0.2);
  for (auto& ev : events) ev.raw_as[features::kGyroZStd] = 0.75;  // constant column
  std::vector<std::string> warnings;
  const auto model = features::fit_calibration(events, 0.5, &warnings);
  CHECK(model.residual_only[features::kGyroZStd]);
  CHECK(!model.residual_only[features::kGsenZStd]);
  bool named = false;
  for (const auto& w : warnings) named = named || w.find("gyroZ_std") != std::string::npos;
  CHECK(named);
  features::calibrate(events, model);
  for (const auto& ev : events)
    CHECK(ev.calibrated_as[features::kGyroZStd] == doctest::Approx(0.75 - model.fits[features::kGyroZStd].intercept));
}

TEST_CASE("identical speeds degrade every calibrated feature to residuals") {
  std::vector<features::Event> events(6);
  for (std::size_t i = 0; i < events.size(); ++i) {
    events[i].raw_as[features::kSpeedMean] = 12.0;
    events[i].raw_as[features::kGsenZStd] = static_cast<double>(i);
  }
  std::vector<std::string> warnings;
  const auto model = features::fit_calibration(events, 0.5, &warnings);
  CHECK(model.residual_only[features::kGsenZStd]);
  CHECK(!warnings.empty());
  features::calibrate(events, model);
  // residual against the column mean 2.5
  CHECK(events[0].calibrated_as[features::kGsenZStd] == doctest::Approx(-2.5));
  CHECK(events[5].calibrated_as[features::kGsenZStd] == doctest::Approx(2.5));
}

TEST_CASE("speeds below the floor use epsilon_speed in the denominator") {
  features::CalibrationModel model;
  model.calibrated[features::kGsenZStd] = true;
  model.fits[features::kGsenZStd] = {1.0, 0.0};
  model.epsilon_speed = 0.5;
  std::vector<features::Event> events(1);
  events[0].raw_as[features::kSpeedMean] = 0.1;
  events[0].raw_as[features::kGsenZStd] = 0.1;  // on the line y = x
  features::calibrate(events, model);
  // (0.1 - 0) / (1 * max(0.1, 0.5)) = 0.2
  CHECK(events[0].calibrated_as[features::kGsenZStd] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("calibration is scale-consistent") {
  std::mt19937_64 rng(31);
  std::vector<double> speeds;
  for (int i = 0; i < 60; ++i) speeds.push_back(generators::uniform(rng, 1.0, 30.0));
  auto events = line_events(speeds, features::kGsenZStd, 0.2, 0.5);
  for (auto& ev : events)
    ev.raw_as[features::kGsenZStd] += 0.03 * generators::gaussian(rng);
  auto scaled = events;
  const double s = 37.5;
  for (auto& ev : scaled) ev.raw_as[features::kGsenZStd] *= s;

  const auto m1 = features::fit_calibration(events);
  const auto m2 = features::fit_calibration(scaled);
  CHECK(m2.fits[features::kGsenZStd].slope ==
        doctest::Approx(s * m1.fits[features::kGsenZStd].slope).epsilon(1e-9));
  CHECK(m2.fits[features::kGsenZStd].intercept ==
        doctest::Approx(s * m1.fits[features::kGsenZStd].intercept).epsilon(1e-9));

  features::calibrate(events, m1);
  features::calibrate(scaled, m2);
  for (std::size_t i = 0; i < events.size(); ++i)
    CHECK(scaled[i].calibrated_as[features::kGsenZStd] ==
          doctest::Approx(events[i].calibrated_as[features::kGsenZStd]).epsilon(1e-9));
}

TEST_CASE("zscore of column 1,2,3") {
  std::vector<features::Event> events(3);
  for (std::size_t i = 0; i < 3; ++i)
    events[i].calibrated_as[features::kGsenZStd] = static_cast<double>(i + 1);
  features::zscore(events);
  CHECK(events[0].normalized_as[features::kGsenZStd] ==
        doctest::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(events[1].normalized_as[features::kGsenZStd] == doctest::Approx(0.0));
  CHECK(events[2].normalized_as[features::kGsenZStd] ==
        doctest::Approx(1.224744871391589).epsilon(1e-12));
}

TEST_CASE("zscore output has zero mean and unit std per live column") {
  std::mt19937_64 rng(8);
  std::vector<features::Event> events(50);
  for (auto& ev : events)
    for (int f = 0; f < features::kAsCount; ++f)
      ev.calibrated_as[static_cast<std::size_t>(f)] = generators::uniform(rng, -4.0, 9.0);
  features::zscore(events);
  for (int f = 0; f < features::kAsCount; ++f) {
    double m = 0.0;
    for (const auto& ev : events) m += ev.normalized_as[static_cast<std::size_t>(f)];
    m /= static_cast<double>(events.size());
    double ss = 0.0;
    for (const auto& ev : events) {
      const double d = ev.normalized_as[static_cast<std::size_t>(f)] - m;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(events.size()));
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
  }
}

TEST_CASE("constant columns normalize to zeros with a warning") {
  std::vector<features::Event> events(4);
  for (auto& ev : events) ev.calibrated_as[features::kGyroZMax] = 5.0;
  std::vector<std::string> warnings;
  features::zscore(events, &warnings);
  for (const auto& ev : events) CHECK(ev.normalized_as[features::kGyroZMax] == 0.0);
  bool named = false;
  for (const auto& w : warnings) named = named || w.find("gyroZ_max") != std::string::npos;
  CHECK(named);
}

TEST_CASE("zscore is idempotent") {
  std::mt19937_64 rng(17);
  std::vector<features::Event> events(40);
  for (auto& ev : events)
    for (int f = 0; f < features::kAsCount; ++f)
      ev.calibrated_as[static_cast<std::size_t>(f)] = generators::uniform(rng, -2.0, 2.0);
  features::zscore(events);
  auto twice = events;
  for (auto& ev : twice) ev.calibrated_as = ev.normalized_as;
  features::zscore(twice);
  for (std::size_t i = 0; i < events.size(); ++i)
    for (int f = 0; f < features::kAsCount; ++f)
      CHECK(twice[i].normalized_as[static_cast<std::size_t>(f)] ==
            doctest::Approx(events[i].normalized_as[static_cast<std::size_t>(f)]).epsilon(1e-9));
}

TEST_CASE("zscore requires two events") {
  std::vector<features::Event> one(1);
  CHECK_THROWS_AS(features::zscore(one), std::invalid_argument);
}

TEST_CASE("events csv round-trips through the reader") {
  const auto samples = constant_samples(30, 4.0, 9.8);
  auto events = features::window(samples);
  const auto model = features::fit_calibration(events);
  features::calibrate(events, model);
  features::zscore(events);
  events[1].is_pothole = true;
  std::ostringstream out;
  features::write_events_csv(out, events);
  std::istringstream in(out.str());
  const auto back = features::read_events_csv(in);
  REQUIRE(back.size() == events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(back[i].index == events[i].index);
    CHECK(back[i].t_start == events[i].t_start);
    CHECK(back[i].is_pothole == events[i].is_pothole);
    for (int f = 0; f < features::kAsCount; ++f) {
      CHECK(back[i].raw_as[static_cast<std::size_t>(f)] == events[i].raw_as[static_cast<std::size_t>(f)]);
      CHECK(back[i].normalized_as[static_cast<std::size_t>(f)] == events[i].normalized_as[static_cast<std::size_t>(f)]);
    }
  }
}
