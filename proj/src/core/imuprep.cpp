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

#include "aoifuse/imuprep.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace aoif::imuprep {
namespace {

const Mat3& orientation_at(std::span<const Mat3> r, std::size_t k) { return r.size() == 1 ? r[0] : r[k]; }

}  // namespace

std::vector<Vec3> to_global(std::span<const Vec3> accel, std::span<const Mat3> orientation) {
  require(orientation.size() == 1 || orientation.size() == accel.size(), ErrorCode::kDimensionMismatch,
          "orientation must be a single rotation or one per sample");
  const Vec3 g(0.0, 0.0, -kGravity);
  std::vector<Vec3> out(accel.size());
  for (std::size_t k = 0; k < accel.size(); ++k) out[k] = orientation_at(orientation, k) * accel[k] - g;
  return out;
}

Integration integrate_global(std::span<const Vec3> global, double dt, const BiasCorrection& corr) {
  require(dt > 0.0, ErrorCode::kInvalidArgument, "dt must be > 0");
  Integration out;
  out.velocity.resize(global.size() + 1);
  out.position.resize(global.size() + 1);
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  out.velocity[0] = v;
  out.position[0] = p;
  for (std::size_t k = 0; k < global.size(); ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vec3 a = global[k] + corr.a0 + corr.a1 * t;
    p += v * dt;
    v += a * dt;
    out.velocity[k + 1] = v;
    out.position[k + 1] = p;
  }
  return out;
}

Integration integrate(std::span<const Vec3> accel, std::span<const Mat3> orientation, double dt) {
  const auto global = to_global(accel, orientation);
  return integrate_global(global, dt);
}

double terminal_cost(const Integration& run, const Vec3& x_ref) {
  return run.velocity.back().squaredNorm() + (run.position.back() - x_ref).squaredNorm();
}

BiasCorrection optimize_bias(std::span<const Vec3> accel, std::span<const Mat3> orientation, double dt,
                             const Vec3& x_ref) {
  require(!accel.empty(), ErrorCode::kInvalidArgument, "bias optimisation needs a non-empty run");
  require(dt > 0.0, ErrorCode::kInvalidArgument, "dt must be > 0");
  const auto global = to_global(accel, orientation);

  // Residual r(c) = [v_N; p_N - x_ref] = r0 + J c, J built column by column
  // from unit corrections.
  auto residual = [&](const BiasCorrection& c) {
    const auto run = integrate_global(global, dt, c);
    Eigen::Matrix<double, 6, 1> r;
    r << run.velocity.back(), run.position.back() - x_ref;
    return r;
  };
  const Eigen::Matrix<double, 6, 1> r0 = residual({});
  Eigen::Matrix<double, 6, 6> jac;
  for (int i = 0; i < 6; ++i) {
    BiasCorrection c;
    if (i < 3) c.a0[i] = 1.0;
    else c.a1[i - 3] = 1.0;
    jac.col(i) = residual(c) - r0;
  }
  const Eigen::Matrix<double, 6, 6> normal = jac.transpose() * jac;
  Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(normal);
  const auto sv = svd.singularValues();
  const double cond = sv(0) / sv(5);
  if (!(sv(5) > 0.0) || !(cond <= 1e12)) fail(ErrorCode::kIllConditioned, "bias normal equations are ill-conditioned");
  const Eigen::Matrix<double, 6, 1> x = normal.ldlt().solve(-jac.transpose() * r0);
  BiasCorrection out;
  out.a0 = x.head<3>();
  out.a1 = x.tail<3>();
  return out;
}

std::vector<Mat3> orientation_from_gyro(std::span<const Vec3> gyro, double dt, const Mat3& r0) {
  require(dt > 0.0, ErrorCode::kInvalidArgument, "dt must be > 0");
  std::vector<Mat3> out;
  out.reserve(gyro.size());
  Eigen::Quaterniond q(r0);
  for (const auto& w : gyro) {
    out.push_back(q.toRotationMatrix());
    const Eigen::Quaterniond omega(0.0, w.x(), w.y(), w.z());
    Eigen::Quaterniond dq = q * omega;
    q.coeffs() += 0.5 * dt * dq.coeffs();
    q.normalize();
  }
  return out;
}

std::vector<Vec3> accel_of(const sim::MeasurementLog& log) {
  std::vector<Vec3> out;
  out.reserve(log.imu.size());
  for (const auto& s : log.imu) out.push_back(s.accel);
  return out;
}

}  // namespace aoif::imuprep
