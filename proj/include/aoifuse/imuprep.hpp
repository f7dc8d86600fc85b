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

// Strapdown preprocessing: frame rotation, gravity removal, explicit Euler
// integration and first-order accelerometer bias correction.

#ifndef AOIFUSE_IMUPREP_HPP_
#define AOIFUSE_IMUPREP_HPP_

#include <span>
#include <vector>

#include "aoifuse/common.hpp"
#include "aoifuse/sim.hpp"

namespace aoif::imuprep {

struct BiasCorrection {
  Vec3 a0 = Vec3::Zero();  // m/s^2
  Vec3 a1 = Vec3::Zero();  // m/s^3
};

struct Integration {
  // n + 1 states: index 0 is the zero initial state, index k + 1 follows
  // sample k.
  std::vector<Vec3> velocity;
  std::vector<Vec3> position;
};

// R_k * f_k - g with g = (0, 0, -9.81): the specific-force reading of a
// body at rest with identity orientation is (0, 0, -9.81).
std::vector<Vec3> to_global(std::span<const Vec3> accel, std::span<const Mat3> orientation);

// Orientation may hold one rotation (applied to every sample) or one per
// sample.
Integration integrate(std::span<const Vec3> accel, std::span<const Mat3> orientation, double dt);

// Same integration applied to gravity-free global accelerations plus the
// correction a0 + a1 * t_k, t_k = k * dt.
Integration integrate_global(std::span<const Vec3> global, double dt, const BiasCorrection& corr = {});

// Minimises |v_N|^2 + |p_N - x_ref|^2 over (a0, a1). The terminal state is
// affine in the correction, so this is a 6x6 normal-equation solve; throws
// kIllConditioned when its condition number exceeds 1e12.
BiasCorrection optimize_bias(std::span<const Vec3> accel, std::span<const Mat3> orientation, double dt,
                             const Vec3& x_ref);

double terminal_cost(const Integration& run, const Vec3& x_ref);

// First-order quaternion propagation of body rates starting from r0.
std::vector<Mat3> orientation_from_gyro(std::span<const Vec3> gyro, double dt, const Mat3& r0 = Mat3::Identity());

// Convenience: accelerations of a log as a flat vector.
std::vector<Vec3> accel_of(const sim::MeasurementLog& log);

}  // namespace aoif::imuprep

#endif  // AOIFUSE_IMUPREP_HPP_
