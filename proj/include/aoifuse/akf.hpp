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

// Nine-state constant-acceleration adaptive Kalman filter fusing
// trilaterated positions with IMU accelerations (loose coupling).

#ifndef AOIFUSE_AKF_HPP_
#define AOIFUSE_AKF_HPP_

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "aoifuse/common.hpp"
#include "aoifuse/logio.hpp"
#include "aoifuse/trilat.hpp"

namespace aoif::akf {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

struct AkfConfig {
  double q0 = 0.5;         // continuous noise intensity per axis (jerk)
  int window = 50;         // innovation window N
  double r_floor = 1e-6;   // eigenvalue floor of the adapted R, m^2
  double g0 = 2.0;         // GDOP knee of alpha(g)
  double r_uwb0 = 0.25;    // initial UWB position variance, m^2
  double r_imu = 0.05;     // accel measurement variance, (m/s^2)^2
  double p0_pos = 1.0;
  double p0_vel = 4.0;
  double p0_acc = 1.0;
  bool adaptive = true;
  bool gdop_scaling = true;
  int min_anchors = 4;     // fixes with fewer anchors are skipped
  // Fixes whose squared Mahalanobis innovation exceeds gate_chi2 are
  // rejected; after gate_reset consecutive rejections the next fix is
  // accepted with the position covariance re-inflated to p0_pos. A gate of
  // 0 disables gating.
  double gate_chi2 = 16.27;  // chi-square, 3 dof, 0.999
  int gate_reset = 20;
};

struct AkfState {
  Vec9 x = Vec9::Zero();  // p, v, a
  Mat9 P = Mat9::Identity();
  Mat3 R_uwb = Mat3::Identity();
  Mat3 R_imu = Mat3::Identity();
  double q0 = 0.5;
  std::size_t capacity = 50;
  std::deque<Vec3> innovations;
  Mat3 last_hph = Mat3::Zero();  // H P_{k|k-1} H^T of the latest recorded update
};

AkfState make_state(const AkfConfig& cfg, const Vec3& p0 = Vec3::Zero());

Mat9 transition(double dt);
// G Q0 G^T with G = [dt^2/2 I; dt I; I].
Mat9 process_noise(double dt, double q0);

void predict(AkfState& s, double dt);

// Standard update with the Joseph-form covariance and a pseudo-inverse of S.
// Throws kSingularInnovation when S is not finite, or singular with an
// innovation outside its range. When record is set the innovation is
// appended to the window (oldest dropped beyond capacity).
void update(AkfState& s, const Vec3& z, const Eigen::Matrix<double, 3, 9>& H, const Mat3& R, bool record = true);

// y^T S^-1 y for a prospective update.
double mahalanobis2(const AkfState& s, const Vec3& z, const Eigen::Matrix<double, 3, 9>& H, const Mat3& R);

Eigen::Matrix<double, 3, 9> position_selector();
Eigen::Matrix<double, 3, 9> acceleration_selector();

// Sample covariance of the window with 1/(N-1) normalisation.
Mat3 innovation_covariance(const std::deque<Vec3>& window);
// Eigenvalue floor projection of a symmetric matrix.
Mat3 psd_project(const Mat3& m, double floor);
// R_uwb <- psd_project(C - H P H^T). Throws kInsufficientWindow below two
// innovations.
void adapt_r(AkfState& s, double floor = 1e-6);

double gdop_alpha(double g, double g0 = 2.0);
Mat3 scale_r_by_gdop(const Mat3& R, double g, double g0 = 2.0);

// Runs the filter over IMU samples (gravity-free global accelerations at
// times t_imu) and epoch fixes, emitting the position after every
// `output_every`-th IMU sample. With p_start the filter starts at rest there
// at the first IMU sample; otherwise at the first usable fix.
logio::EstTrajectory run(std::span<const double> t_imu, std::span<const Vec3> global_accel,
                         const std::vector<trilat::EpochFix>& fixes, const AkfConfig& cfg, int output_every,
                         const std::optional<Vec3>& p_start = std::nullopt);

}  // namespace aoif::akf

#endif  // AOIFUSE_AKF_HPP_
