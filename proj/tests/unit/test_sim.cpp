/* Copyright 2026 The AoIFuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>

#include "aoifuse/logio.hpp"
#include "aoifuse/sim.hpp"
#include "doctest.h"

using namespace aoif;
using namespace aoif::sim;

namespace {

Scenario quiet_scenario() {
  Scenario sc;
  sc.channel.los_range_sigma = 0.0;
  sc.channel.nlos_bias_sigma = 0.0;
  sc.channel.quantize = false;
  sc.imu.accel_noise_sigma = 0.0;
  sc.imu.gyro_noise_sigma = 0.0;
  return sc;
}

}  // namespace

TEST_CASE("static point ranges are exact") {
  auto sc = quiet_scenario();
  sc.anchors = {Vec3(10, 0, 0)};
  sc.trajectory.waypoints = {Vec3::Zero()};
  sc.trajectory.static_duration = 3.0;
  const auto log = generate(sc);
  REQUIRE(!log.uwb.empty());
  for (const auto& r : log.uwb) {
    CHECK(r.valid);
    CHECK(r.range == 10.0);
  }
}

TEST_CASE("outage schedule masks exactly its interval") {
  auto sc = quiet_scenario();
  sc.anchors = {Vec3(10, 0, 0)};
  sc.trajectory.waypoints = {Vec3::Zero()};
  sc.trajectory.static_duration = 6.0;
  sc.channel.outage_schedule = {{Interval{2.0, 4.0}}};
  const auto log = generate(sc);
  int masked = 0;
  for (const auto& r : log.uwb) {
    const bool inside = r.t >= 2.0 && r.t <= 4.0;
    CHECK(r.valid == !inside);
    masked += inside;
  }
  CHECK(masked > 0);
}

TEST_CASE("straight line crosses the midpoint anchor") {
  auto sc = quiet_scenario();
  sc.anchors = {Vec3(50, 0, 0)};
  sc.trajectory.waypoints = {Vec3::Zero(), Vec3(100, 0, 0)};
  sc.trajectory.accel = 0.0;
  sc.trajectory.plateaus = {{10.0, 0.0}};
  const Trajectory traj(sc.trajectory);
  CHECK(traj.duration() == doctest::Approx(10.0));
  const auto log = generate(sc);
  bool found = false;
  for (const auto& r : log.uwb)
    if (std::abs(r.t - 5.0) < 1e-12) {
      CHECK(std::abs(r.range) < 1e-6);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("noiseless ranges equal the true distance") {
  auto sc = reference_scenario(3);
  sc.channel.los_range_sigma = 0.0;
  sc.channel.nlos_bias_sigma = 0.0;
  sc.channel.nlos_bias_mean = 0.0;
  sc.channel.nlos_prob_schedule.clear();
  sc.channel.quantize = false;
  const Trajectory traj(sc.trajectory);
  const auto log = generate(sc);
  int checked = 0;
  for (const auto& r : log.uwb) {
    if (!r.valid) continue;
    const double d = (traj.at(r.t).p - log.anchors[static_cast<std::size_t>(r.anchor)]).norm();
    CHECK(std::abs(r.range - d) < 1e-12 * (1.0 + d));
    ++checked;
  }
  CHECK(checked > 1000);
}

TEST_CASE("generate is deterministic and seed-sensitive") {
  const auto a = logio::to_jsonl(generate(reference_scenario(7)));
  const auto b = logio::to_jsonl(generate(reference_scenario(7)));
  const auto c = logio::to_jsonl(generate(reference_scenario(8)));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("measurement log round-trips through JSON lines bitwise") {
  auto sc = reference_scenario(2);
  sc.trajectory.plateaus = {{6.0, 0.0}};
  sc.trajectory.waypoints = {Vec3(0, 0, 100), Vec3(150, 10, 80)};
  sc.channel.bursty.reset();
  const auto log = generate(sc);
  const auto text = logio::to_jsonl(log);
  const auto back = logio::from_jsonl(text);
  CHECK(logio::to_jsonl(back) == text);
  REQUIRE(back.imu.size() == log.imu.size());
  CHECK(back.imu.back().accel == log.imu.back().accel);
  CHECK(back.uwb.size() == log.uwb.size());
}

TEST_CASE("log parser rejects malformed input") {
  CHECK_THROWS_AS(logio::from_jsonl("{\"kind\":\"imu\",\"t\":0,\"accel\":[0,0,0],\"gyro\":[0,0,0]}\n"), Error);
  CHECK_THROWS_AS(logio::from_jsonl("not json\n"), Error);
  const std::string meta =
      "{\"kind\":\"meta\",\"anchors\":[[0,0,0]],\"imu_rate\":400,\"uwb_rate\":20,\"ref_rate\":10,\"seed\":1,"
      "\"mount\":[1,0,0,0,1,0,0,0,1]}\n";
  CHECK_THROWS_AS(logio::from_jsonl(meta + "{\"kind\":\"uwb\",\"t\":0,\"anchor\":3,\"range\":1,\"valid\":true}\n"),
                  Error);
  CHECK_THROWS_AS(logio::from_jsonl(meta + "{\"kind\":\"ref\",\"t\":1,\"position\":[0,0,0]}\n" +
                                    "{\"kind\":\"ref\",\"t\":1,\"position\":[0,0,0]}\n"),
                  Error);
}

TEST_CASE("visibility series counts") {
  auto sc = quiet_scenario();
  for (int i = 0; i < 6; ++i) sc.anchors.push_back(Vec3(10.0 * i, 20, 5));
  sc.trajectory.waypoints = {Vec3::Zero()};
  sc.trajectory.static_duration = 4.0;
  const auto log = generate(sc);
  const auto series = visibility_series(log, 0.05);
  // The final slot is cut short by the end of the trajectory.
  for (std::size_t i = 0; i + 1 < series.size(); ++i) CHECK(series[i].count == 6);

  auto alt = quiet_scenario();
  alt.anchors = {Vec3(10, 0, 0), Vec3(-10, 0, 0)};
  alt.trajectory.waypoints = {Vec3::Zero()};
  alt.trajectory.static_duration = 4.0;
  alt.channel.outage_schedule = {{{0.0, 0.99}, {2.0, 2.99}}, {{1.0, 1.99}, {3.0, 4.5}}};
  const auto alt_series = visibility_series(generate(alt), 0.05);
  for (std::size_t i = 0; i + 1 < alt_series.size(); ++i) CHECK(alt_series[i].count == 1);
}

TEST_CASE("reference scenario caps visibility at four anchors") {
  const auto log = generate(reference_scenario(1));
  int max_count = 0;
  int sparse_bins = 0;
  const auto series = visibility_series(log, 0.05);
  for (const auto& b : series) {
    max_count = std::max(max_count, b.count);
    sparse_bins += b.count < 3;
  }
  CHECK(max_count == 4);
  CHECK(sparse_bins > 0);
  CHECK(log.anchors.size() == 6);
  const Vec3 disp = log.truth.back().position - log.truth.front().position;
  CHECK(disp.norm() > 650.0);
  CHECK(disp.norm() < 760.0);
}

TEST_CASE("scenario JSON round-trips and rejects unknown keys") {
  const auto sc = reference_scenario(5);
  const auto text = scenario_to_json(sc);
  CHECK(scenario_to_json(scenario_from_json(text)) == text);
  CHECK_THROWS_AS(scenario_from_json("{\"anchors\":[[0,0,0]],\"bogus\":1}"), Error);
}

TEST_CASE("validation rejects broken scenarios") {
  auto sc = quiet_scenario();
  sc.trajectory.waypoints = {Vec3::Zero()};
  CHECK_THROWS_AS(validate(sc), Error);  // no anchors
  sc.anchors = {Vec3(1, 0, 0)};
  CHECK_NOTHROW(validate(sc));
  auto bad_rates = sc;
  bad_rates.uwb_rate = 500.0;
  CHECK_THROWS_AS(validate(bad_rates), Error);
  auto bad_sigma = sc;
  bad_sigma.channel.los_range_sigma = -1.0;
  CHECK_THROWS_AS(validate(bad_sigma), Error);
  auto bad_prob = sc;
  bad_prob.channel.nlos_prob_schedule = {{{0.0, 1.5}}};
  CHECK_THROWS_AS(validate(bad_prob), Error);
  auto out = sc;
  out.trajectory.waypoints = {Vec3::Zero(), Vec3(100, 0, 0)};
  out.trajectory.plateaus = {{5.0, 0.0}};
  out.bounds.hi = Vec3(50, 50, 50);
  out.bounds.lo = Vec3(-50, -50, -50);
  try {
    generate(out);
    FAIL("expected out-of-bounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfBounds);
  }
}

TEST_CASE("IMU stream carries gravity and the injected bias") {
  auto sc = quiet_scenario();
  sc.anchors = {Vec3(10, 0, 0)};
  sc.trajectory.waypoints = {Vec3::Zero()};
  sc.trajectory.static_duration = 2.0;
  sc.imu.bias0 = Vec3(0.1, -0.2, 0.3);
  sc.imu.bias1 = Vec3(0.01, 0.0, -0.01);
  const auto log = generate(sc);
  for (const auto& s : log.imu) {
    const Vec3 expect = Vec3(0, 0, -kGravity) + sc.imu.bias0 + sc.imu.bias1 * s.t;
    CHECK((s.accel - expect).norm() < 1e-12);
  }
}
