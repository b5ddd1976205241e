#include <doctest.h>

#include <sstream>
#include <string>

#include "addcat/ingest.hpp"

using namespace addcat;

namespace {

const char* kSmallTrip =
    "latitude,longitude,timestamp,speed,gsen_x,gsen_y,gsen_z,gyro_x,gyro_y,gyro_z\n"
    "24.1,121.5,100.0,5.5,0.1,-0.2,9.8,0.01,0.02,-0.03\n"
    "24.1,121.5,100.2,5.6,0.0,0.1,9.9,0.00,0.01,0.02\n";

}  // namespace

TEST_CASE("trip parsing reads every channel") {
  std::istringstream in(kSmallTrip);
  const auto result = ingest::parse_trip(in);
  REQUIRE(result.samples.size() == 2);
  CHECK(result.rejected.empty());
  const auto& s = result.samples[0];
  CHECK(s.timestamp == 100.0);
  CHECK(s.latitude == 24.1);
  CHECK(s.longitude == 121.5);
  CHECK(s.speed == 5.5);
  CHECK(s.gsen_x == 0.1);
  CHECK(s.gsen_y == -0.2);
  CHECK(s.gsen_z == 9.8);
  CHECK(s.gyro_x == 0.01);
  CHECK(s.gyro_y == 0.02);
  CHECK(s.gyro_z == -0.03);
}

TEST_CASE("headers match case-insensitively with padding") {
  std::istringstream in(
      " Latitude , LONGITUDE ,Timestamp,SPEED,Gsen_X,gsen_y,gsen_z,gyro_x,gyro_y,gyro_z\n"
      "24,121,1,2,3,4,5,6,7,8\n");
  const auto result = ingest::parse_trip(in);
  REQUIRE(result.samples.size() == 1);
  CHECK(result.samples[0].gsen_x == 3.0);
}

TEST_CASE("a bad row is rejected with its line number, others survive") {
  std::istringstream in(
      "latitude,longitude,timestamp,speed,gsen_x,gsen_y,gsen_z,gyro_x,gyro_y,gyro_z\n"
      "24,121,1,2,3,4,5,6,7,8\n"
      "24,121,not_a_number,2,3,4,5,6,7,8\n"
      "24,121,3,2,3,4,5,6,7,8\n");
  const auto result = ingest::parse_trip(in);
  CHECK(result.samples.size() == 2);
  REQUIRE(result.rejected.size() == 1);
  CHECK(result.rejected[0].line == 3);
  CHECK(result.data_rows == 3);
}

TEST_CASE("missing required column throws") {
  std::istringstream in("latitude,longitude,timestamp,speed\n1,2,3,4\n");
  CHECK_THROWS_AS(ingest::parse_trip(in), std::runtime_error);
}

TEST_CASE("non-monotone timestamps warn by default and throw in strict mode") {
  const std::string text =
      "latitude,longitude,timestamp,speed,gsen_x,gsen_y,gsen_z,gyro_x,gyro_y,gyro_z\n"
      "24,121,5.0,2,3,4,5,6,7,8\n"
      "24,121,4.0,2,3,4,5,6,7,8\n";
  {
    std::istringstream in(text);
    const auto result = ingest::parse_trip(in);
    CHECK(result.samples.size() == 2);
    CHECK(!result.warnings.empty());
  }
  {
    std::istringstream in(text);
    ingest::ParseOptions strict;
    strict.strict = true;
    CHECK_THROWS_AS(ingest::parse_trip(in, ingest::ColumnMap::defaults(), strict),
                    std::runtime_error);
  }
}

TEST_CASE("trip csv round-trips exactly") {
  std::istringstream in(kSmallTrip);
  const auto first = ingest::parse_trip(in);
  std::ostringstream out;
  ingest::write_trip_csv(out, first.samples);
  std::istringstream again(out.str());
  const auto second = ingest::parse_trip(again);
  REQUIRE(second.samples.size() == first.samples.size());
  for (std::size_t i = 0; i < first.samples.size(); ++i) {
    CHECK(second.samples[i].timestamp == first.samples[i].timestamp);
    CHECK(second.samples[i].speed == first.samples[i].speed);
    CHECK(second.samples[i].gsen_z == first.samples[i].gsen_z);
    CHECK(second.samples[i].gyro_y == first.samples[i].gyro_y);
  }
}

TEST_CASE("ground truth by event index") {
  std::istringstream in("event_index,flag\n3,1\n7,0\n");
  const auto truth = ingest::parse_ground_truth(in);
  CHECK(truth.indices.size() == 2);
  CHECK(truth.window_is_pothole(3, 0.0, 0.0));
  CHECK(!truth.window_is_pothole(7, 0.0, 0.0));
  CHECK(!truth.window_is_pothole(4, 0.0, 0.0));
}

TEST_CASE("ground truth ranges match windows by overlap") {
  std::istringstream in("t_start,t_end,flag\n10.0,11.0,1\n20.0,21.0,0\n");
  const auto truth = ingest::parse_ground_truth(in);
  CHECK(truth.ranges.size() == 2);
  // clean overlap
  CHECK(truth.window_is_pothole(0, 10.5, 12.0));
  // touching endpoints count
  CHECK(truth.window_is_pothole(0, 11.0, 13.0));
  CHECK(truth.window_is_pothole(0, 8.0, 10.0));
  // disjoint window
  CHECK(!truth.window_is_pothole(0, 12.0, 14.0));
  // overlapping an unflagged range is not a pothole
  CHECK(!truth.window_is_pothole(0, 20.2, 20.8));
}

TEST_CASE("ground truth rejects overlapping ranges and duplicate indices") {
  {
    std::istringstream in("t_start,t_end,flag\n10,12,1\n11,13,1\n");
    CHECK_THROWS_AS(ingest::parse_ground_truth(in), std::runtime_error);
  }
  {
    std::istringstream in("event_index,flag\n3,1\n3,0\n");
    CHECK_THROWS_AS(ingest::parse_ground_truth(in), std::runtime_error);
  }
}

TEST_CASE("ground truth csv round-trips") {
  ingest::GroundTruth truth;
  truth.ranges.push_back({10.0, 11.8, true});
  truth.ranges.push_back({40.0, 41.8, false});
  std::ostringstream out;
  ingest::write_ground_truth_csv(out, truth);
  std::istringstream in(out.str());
  const auto parsed = ingest::parse_ground_truth(in);
  REQUIRE(parsed.ranges.size() == 2);
  CHECK(parsed.ranges[0].t_start == 10.0);
  CHECK(parsed.ranges[0].is_pothole);
  CHECK(!parsed.ranges[1].is_pothole);
}
