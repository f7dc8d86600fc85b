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

// Synthetic scenario generation: trajectories, anchor geometry, UWB range
// logs with NLOS/outage structure and IMU streams.

#ifndef AOIFUSE_SIM_HPP_
#define AOIFUSE_SIM_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aoifuse/common.hpp"

namespace aoif::sim {

// Closed time interval [t0, t1].
struct Interval {
  double t0 = 0.0;
  double t1 = 0.0;
  bool contains(double t) const { return t >= t0 && t <= t1; }
};

// One step of a piecewise-constant probability: p holds from t0 until the
// next step's t0.
struct ProbStep {
  double t0 = 0.0;
  double p = 0.0;
};

// Procedural intermittent visibility. Expanded into a concrete outage
// schedule (seeded) before measurements are drawn.
struct BurstyVisibility {
  double coverage_radius = 200.0;  // m
  double on_mean = 1.5;            // s, mean visible burst
  double off_mean = 1.0;           // s, mean dropout
  int max_visible = 4;             // simultaneous visible anchors cap
};

struct ChannelModel {
  double los_range_sigma = 0.08;  // m
  double nlos_bias_mean = 0.5;    // m
  double nlos_bias_sigma = 0.3;   // m
  double nlos_mean_dwell = 1.0;   // s, mean length of an NLOS episode
  // Per anchor; an empty schedule means probability 0 throughout.
  std::vector<std::vector<ProbStep>> nlos_prob_schedule;
  // Per anchor; intervals during which the anchor is NOT visible.
  std::vector<std::vector<Interval>> outage_schedule;
  double timestamp_quantum = 15e-12;  // s
  bool quantize = true;
  std::optional<BurstyVisibility> bursty;
};

struct SpeedPlateau {
  double speed = 0.0;     // m/s
  double duration = 0.0;  // s; ignored for the last plateau (fills the path)
};

struct TrajectorySpec {
  std::vector<Vec3> waypoints;
  // Ramp acceleration between plateaus; 0 means instantaneous speed changes.
  double accel = 0.5;
  std::vector<SpeedPlateau> plateaus;
  // Duration of a static scenario (single waypoint or zero-length path).
  double static_duration = 10.0;
};

struct ImuModel {
  double accel_noise_sigma = 0.05;  // m/s^2 per sample
  double gyro_noise_sigma = 0.002;  // rad/s per sample
  Vec3 bias0 = Vec3::Zero();        // m/s^2
  Vec3 bias1 = Vec3::Zero();        // m/s^3
  Vec3 mount_rpy = Vec3::Zero();    // rad, fixed body-to-global rotation
};

struct Bounds {
  Vec3 lo = Vec3::Constant(-1e5);
  Vec3 hi = Vec3::Constant(1e5);
};

struct Scenario {
  std::vector<Vec3> anchors;
  TrajectorySpec trajectory;
  double imu_rate = 400.0;
  double uwb_rate = 20.0;
  double ref_rate = 10.0;
  double ref_sigma = 0.0;          // m
  double uwb_slot_offset = 1e-3;   // s between consecutive anchors in a slot
  std::uint64_t seed = 1;
  ChannelModel channel;
  ImuModel imu;
  Bounds bounds;
};

struct ImuSample {
  double t = 0.0;
  Vec3 accel = Vec3::Zero();
  Vec3 gyro = Vec3::Zero();
};

struct UwbRecord {
  double t = 0.0;
  int anchor = 0;
  double range = 0.0;
  bool valid = false;
};

struct RefSample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
};

struct TruthSample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

struct MeasurementLog {
  std::vector<Vec3> anchors;
  double imu_rate = 400.0;
  double uwb_rate = 20.0;
  double ref_rate = 10.0;
  Mat3 mount = Mat3::Identity();
  std::uint64_t seed = 0;
  std::vector<ImuSample> imu;
  std::vector<UwbRecord> uwb;
  std::vector<RefSample> ref;
  std::vector<TruthSample> truth;

  double t_end() const;
};

// Arc-length parameterised cubic spline through the waypoints, driven by a
// trapezoidal speed profile.
class Trajectory {
 public:
  explicit Trajectory(const TrajectorySpec& spec);

  struct State {
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Vec3 a = Vec3::Zero();
  };

  double duration() const { return duration_; }
  double length() const { return length_; }
  State at(double t) const;

 private:
  struct Phase {
    double t0, s0, v0, acc, dur;
  };
  void eval_curve(double u, Vec3& c, Vec3& d1, Vec3& d2) const;
  double u_of_s(double s) const;
  void speed_at(double t, double& s, double& sd, double& sdd) const;

  std::vector<double> knots_;
  std::vector<Vec3> pts_;
  std::vector<Vec3> m2_;  // spline second derivatives at knots
  std::vector<double> table_u_, table_s_;
  std::vector<Phase> phases_;
  double length_ = 0.0;
  double duration_ = 0.0;
};

Mat3 rotation_from_rpy(const Vec3& rpy);

// Resolves procedural visibility into a concrete per-anchor outage schedule.
ChannelModel resolve_channel(const Scenario& scenario);

void validate(const Scenario& scenario);

MeasurementLog generate(const Scenario& scenario);

struct VisibilityBin {
  double t = 0.0;
  int count = 0;
};
std::vector<VisibilityBin> visibility_series(const MeasurementLog& log, double dt);

// The canonical sparse benchmark: six anchors along a descending ~700 m
// cable-car path, at most four anchors visible at once, NLOS bursts.
Scenario reference_scenario(std::uint64_t seed = 1);

Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& scenario);

}  // namespace aoif::sim

#endif  // AOIFUSE_SIM_HPP_
