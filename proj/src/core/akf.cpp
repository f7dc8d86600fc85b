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

#include "aoifuse/akf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aoif::akf {
namespace {

void symmetrize(Mat9& p) { p = 0.5 * (p + p.transpose()).eval(); }

}  // namespace

AkfState make_state(const AkfConfig& cfg, const Vec3& p0) {
  require(cfg.window >= 2, ErrorCode::kInvalidArgument, "innovation window must be >= 2");
  AkfState s;
  s.x.head<3>() = p0;
  s.P.setZero();
  s.P.block<3, 3>(0, 0) = cfg.p0_pos * Mat3::Identity();
  s.P.block<3, 3>(3, 3) = cfg.p0_vel * Mat3::Identity();
  s.P.block<3, 3>(6, 6) = cfg.p0_acc * Mat3::Identity();
  s.R_uwb = cfg.r_uwb0 * Mat3::Identity();
  s.R_imu = cfg.r_imu * Mat3::Identity();
  s.q0 = cfg.q0;
  s.capacity = static_cast<std::size_t>(cfg.window);
  return s;
}

Mat9 transition(double dt) {
  Mat9 f = Mat9::Identity();
  f.block<3, 3>(0, 3) = dt * Mat3::Identity();
  f.block<3, 3>(0, 6) = 0.5 * dt * dt * Mat3::Identity();
  f.block<3, 3>(3, 6) = dt * Mat3::Identity();
  return f;
}

Mat9 process_noise(double dt, double q0) {
  Eigen::Matrix<double, 9, 3> g;
  g << 0.5 * dt * dt * Mat3::Identity(), dt * Mat3::Identity(), Mat3::Identity();
  return g * (q0 * Mat3::Identity()) * g.transpose();
}

void predict(AkfState& s, double dt) {
  require(dt > 0.0, ErrorCode::kInvalidArgument, "dt must be > 0");
  const Mat9 f = transition(dt);
  s.x = f * s.x;
  s.P = f * s.P * f.transpose() + process_noise(dt, s.q0);
  symmetrize(s.P);
}

void update(AkfState& s, const Vec3& z, const Eigen::Matrix<double, 3, 9>& H, const Mat3& R, bool record) {
  const Mat3 hph = H * s.P * H.transpose();
  const Mat3 S = 0.5 * (hph + R + (hph + R).transpose());
  if (!S.allFinite()) fail(ErrorCode::kSingularInnovation, "innovation covariance is not finite");
  const Vec3 y = z - H * s.x;

  // Moore-Penrose inverse of S. A rank-deficient S is only acceptable when
  // the innovation has no component along its null space, i.e. a certain
  // prior agrees with a certain measurement.
  Eigen::SelfAdjointEigenSolver<Mat3> es(S);
  const Vec3 ev = es.eigenvalues();
  const double top = ev.maxCoeff();
  Vec3 inv_ev = Vec3::Zero();
  Vec3 y_null = Vec3::Zero();
  const Vec3 y_eig = es.eigenvectors().transpose() * y;
  for (int i = 0; i < 3; ++i) {
    if (top > 1e-280 && ev(i) > 1e-12 * top) inv_ev(i) = 1.0 / ev(i);
    else y_null(i) = y_eig(i);
  }
  if (y_null.norm() > 1e-9 * (1.0 + z.norm()))
    fail(ErrorCode::kSingularInnovation, "innovation covariance is singular and the innovation is outside its range");
  const Mat3 s_inv = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();

  const Eigen::Matrix<double, 9, 3> K = s.P * H.transpose() * s_inv;
  s.x += K * y;
  const Mat9 ikh = Mat9::Identity() - K * H;
  s.P = ikh * s.P * ikh.transpose() + K * R * K.transpose();
  symmetrize(s.P);
  if (record) {
    s.innovations.push_back(y);
    while (s.innovations.size() > s.capacity) s.innovations.pop_front();
    s.last_hph = hph;
  }
}

double mahalanobis2(const AkfState& s, const Vec3& z, const Eigen::Matrix<double, 3, 9>& H, const Mat3& R) {
  const Mat3 S = H * s.P * H.transpose() + R;
  const Vec3 y = z - H * s.x;
  Eigen::LDLT<Mat3> ldlt(0.5 * (S + S.transpose()));
  if (ldlt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  return y.dot(ldlt.solve(y));
}

Eigen::Matrix<double, 3, 9> position_selector() {
  Eigen::Matrix<double, 3, 9> h = Eigen::Matrix<double, 3, 9>::Zero();
  h.block<3, 3>(0, 0).setIdentity();
  return h;
}

Eigen::Matrix<double, 3, 9> acceleration_selector() {
  Eigen::Matrix<double, 3, 9> h = Eigen::Matrix<double, 3, 9>::Zero();
  h.block<3, 3>(0, 6).setIdentity();
  return h;
}

Mat3 innovation_covariance(const std::deque<Vec3>& window) {
  require(window.size() >= 2, ErrorCode::kInsufficientWindow, "need at least two innovations");
  Vec3 mean = Vec3::Zero();
  for (const auto& y : window) mean += y;
  mean /= static_cast<double>(window.size());
  Mat3 c = Mat3::Zero();
  for (const auto& y : window) c += (y - mean) * (y - mean).transpose();
  return c / static_cast<double>(window.size() - 1);
}

Mat3 psd_project(const Mat3& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()));
  const Vec3 ev = es.eigenvalues().cwiseMax(floor);
  const Mat3 r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

void adapt_r(AkfState& s, double floor) {
  const Mat3 c = innovation_covariance(s.innovations);
  s.R_uwb = psd_project(c - s.last_hph, floor);
}

double gdop_alpha(double g, double g0) {
  require(g > 0.0, ErrorCode::kInvalidArgument, "GDOP must be > 0");
  return std::max(1.0, g / g0);
}

Mat3 scale_r_by_gdop(const Mat3& R, double g, double g0) {
  const double a = gdop_alpha(g, g0);
  return a * a * R;
}

logio::EstTrajectory run(std::span<const double> t_imu, std::span<const Vec3> global_accel,
                         const std::vector<trilat::EpochFix>& fixes, const AkfConfig& cfg, int output_every,
                         const std::optional<Vec3>& p_start) {
  require(t_imu.size() == global_accel.size(), ErrorCode::kDimensionMismatch, "IMU times and samples differ in length");
  require(output_every >= 1, ErrorCode::kInvalidArgument, "output_every must be >= 1");
  auto usable = [&](const trilat::EpochFix& f) {
    return f.fix.n_anchors >= cfg.min_anchors && f.fix.converged && !f.fix.singular && f.fix.position.allFinite();
  };
  std::size_t fi = 0;
  logio::EstTrajectory out;
  if (t_imu.empty()) return out;
  AkfState s;
  double t = 0.0;
  if (p_start) {
    s = make_state(cfg, *p_start);
    t = t_imu[0] - 1e-9;
  } else {
    while (fi < fixes.size() && !usable(fixes[fi])) ++fi;
    if (fi == fixes.size()) return out;
    s = make_state(cfg, fixes[fi].fix.position);
    t = fixes[fi].t;
    ++fi;
  }
  const auto h_pos = position_selector();
  const auto h_acc = acceleration_selector();
  int rejected = 0;
  for (std::size_t k = 0; k < t_imu.size(); ++k) {
    if (t_imu[k] <= t) continue;
    // Fixes that fall before this IMU sample are applied first, in order.
    while (fi < fixes.size() && fixes[fi].t <= t_imu[k]) {
      const auto& f = fixes[fi++];
      if (!usable(f) || f.t <= t) continue;
      predict(s, f.t - t);
      t = f.t;
      Mat3 r = s.R_uwb;
      if (cfg.gdop_scaling && std::isfinite(f.fix.gdop)) r = scale_r_by_gdop(r, f.fix.gdop, cfg.g0);
      if (cfg.gate_chi2 > 0.0 && mahalanobis2(s, f.fix.position, h_pos, r) > cfg.gate_chi2) {
        if (++rejected < cfg.gate_reset) continue;
        s.P.block<3, 3>(0, 0) += cfg.p0_pos * Mat3::Identity();
        s.innovations.clear();
      }
      rejected = 0;
      update(s, f.fix.position, h_pos, r, true);
      if (cfg.adaptive && s.innovations.size() >= 2) adapt_r(s, cfg.r_floor);
    }
    if (t_imu[k] > t) {
      predict(s, t_imu[k] - t);
      t = t_imu[k];
    }
    update(s, global_accel[k], h_acc, s.R_imu, false);
    if (k % static_cast<std::size_t>(output_every) == 0) out.push_back({t, s.x.head<3>()});
  }
  return out;
}

}  // namespace aoif::akf
