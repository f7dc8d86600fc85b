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

// JSON-Lines serialization of measurement logs and estimated trajectories.
//
// Every line is one object tagged by "kind". A log starts with a "meta"
// record (anchor positions, rates, seed, IMU mount rotation) followed by
// "imu", "uwb", "ref" and "truth" records. Doubles are printed with 17
// significant digits so a write/read cycle is bit-exact.

#ifndef AOIFUSE_LOGIO_HPP_
#define AOIFUSE_LOGIO_HPP_

#include <string>
#include <vector>

#include "aoifuse/sim.hpp"

namespace aoif::logio {

std::string to_jsonl(const sim::MeasurementLog& log);
sim::MeasurementLog from_jsonl(const std::string& text);
void write_log(const std::string& path, const sim::MeasurementLog& log);
sim::MeasurementLog read_log(const std::string& path);

struct TimedPosition {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
};
using EstTrajectory = std::vector<TimedPosition>;

std::string trajectory_to_jsonl(const EstTrajectory& traj, const std::string& method);
EstTrajectory trajectory_from_jsonl(const std::string& text);

}  // namespace aoif::logio

#endif  // AOIFUSE_LOGIO_HPP_
