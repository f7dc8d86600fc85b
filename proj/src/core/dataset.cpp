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

#include "aoifuse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aoif::dataset {

Vec3 truth_at(const std::vector<sim::TruthSample>& truth, double t) {
  require(!truth.empty(), ErrorCode::kMissingTruth, "log has no truth samples");
  if (t <= truth.front().t) return truth.front().position;
  if (t >= truth.back().t) return truth.back().position;
  const auto it = std::upper_bound(truth.begin(), truth.end(), t,
                                   [](double v, const sim::TruthSample& s) { return v < s.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double h = b.t - a.t;
  const double w = (t - a.t) / h;
  const double w2 = w * w, w3 = w2 * w;
  return (2 * w3 - 3 * w2 + 1) * a.position + (w3 - 2 * w2 + w) * h * a.velocity + (-2 * w3 + 3 * w2) * b.position +
         (w3 - w2) * h * b.velocity;
}

imuprep::BiasCorrection fit_bias(const sim::MeasurementLog& log) {
  require(!log.truth.empty(), ErrorCode::kMissingTruth, "bias fit needs the truth end points");
  require(log.imu.size() >= 2, ErrorCode::kInvalidArgument, "bias fit needs IMU samples");
  const auto accel = imuprep::accel_of(log);
  const Mat3 mount = log.mount;
  const Vec3 x_ref = log.truth.back().position - log.truth.front().position;
  return imuprep::optimize_bias(accel, std::span<const Mat3>(&mount, 1), 1.0 / log.imu_rate, x_ref);
}

Series align(const sim::MeasurementLog& log, const std::vector<trilat::EpochFix>& fixes, const AlignOptions& opt) {
  require(opt.dt > 0.0, ErrorCode::kInvalidArgument, "model step must be > 0");
  Series s;
  s.dt = opt.dt;
  s.n_anchors = static_cast<int>(log.anchors.size());
  if (log.imu.empty() && log.uwb.empty()) return s;
  if (log.imu_rate * opt.dt < 1.0 - 1e-9)
    fail(ErrorCode::kRateMismatch, "IMU rate is below the model rate; slots would have no IMU samples");

  const double t_last = std::max(log.imu.empty() ? 0.0 : log.imu.back().t, log.uwb.empty() ? 0.0 : log.uwb.back().t);
  s.steps = static_cast<int>(std::floor(t_last / opt.dt + 1e-9));
  const int n = s.steps;
  const int na = s.n_anchors;
  s.U = Mat::Zero(n, 3);
  s.D = Mat::Zero(n, na);
  s.M = Mat::Zero(n, na);
  s.R = Mat::Zero(n, na);
  s.Fix = Mat::Zero(n, 3);
  s.has_truth = !log.truth.empty();
  auto slot_of = [&](double t) { return static_cast<long long>(std::floor(t / opt.dt + 1e-9)); };

  const double dt_imu = 1.0 / log.imu_rate;
  std::vector<int> count(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < log.imu.size(); ++i) {
    const long long k = slot_of(log.imu[i].t);
    if (k < 0 || k >= n) continue;
    const Vec3 g = log.mount * log.imu[i].accel - Vec3(0.0, 0.0, -kGravity);
    const Vec3 a = g + opt.bias.a0 + opt.bias.a1 * (static_cast<double>(i) * dt_imu);
    s.U.row(k) += a.transpose();
    ++count[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < n; ++k) {
    if (count[static_cast<std::size_t>(k)] == 0)
      fail(ErrorCode::kRateMismatch, "slot " + std::to_string(k) + " has no IMU samples");
    s.U.row(k) /= count[static_cast<std::size_t>(k)];
  }

  for (const auto& r : log.uwb) {
    const long long k = slot_of(r.t);
    if (!r.valid || k < 0 || k >= n) continue;
    s.D(k, r.anchor) = r.range;
    s.M(k, r.anchor) = 1.0;
    if (s.has_truth)
      s.R(k, r.anchor) = (truth_at(log.truth, r.t) - log.anchors[static_cast<std::size_t>(r.anchor)]).norm();
  }

  if (s.has_truth) {
    s.P = Mat(n + 1, 3);
    for (int k = 0; k <= n; ++k) s.P.row(k) = truth_at(log.truth, s.t(k)).transpose();
  }

  Vec3 held = opt.fix_fill;
  std::size_t j = 0;
  for (int k = 0; k < n; ++k) {
    while (j < fixes.size() && slot_of(fixes[j].t) <= k) {
      const auto& f = fixes[j].fix;
      if (!f.underdetermined && !f.singular && f.converged && f.position.allFinite()) held = f.position;
      ++j;
    }
    s.Fix.row(k) = held.transpose();
  }
  return s;
}

FusionWindow window(const Series& s, int start, int length) {
  if (start < 0 || length < 1 || start + length > s.steps)
    fail(ErrorCode::kInvalidArgument, "window exceeds the series");
  FusionWindow w;
  w.start = start;
  w.U = s.U.middleRows(start, length);
  w.D = s.D.middleRows(start, length);
  w.M = s.M.middleRows(start, length);
  w.tau = compute_aoi(w.M);
  w.Fix = s.Fix.middleRows(start, length);
  if (s.has_truth) {
    w.P = s.P.middleRows(start, length + 1);
    w.R = s.R.middleRows(start, length);
  }
  return w;
}

Mat compute_aoi(const Mat& M) {
  Mat tau = Mat::Zero(M.rows(), M.cols());
  for (Eigen::Index t = 1; t < M.rows(); ++t)
    for (Eigen::Index a = 0; a < M.cols(); ++a) tau(t, a) = M(t, a) == 1.0 ? 0.0 : tau(t - 1, a) + 1.0;
  return tau;
}

Mat causal_fill(const Mat& D, const Mat& M, const Vec& mu) {
  if (D.rows() != M.rows() || D.cols() != M.cols() || mu.size() != D.cols())
    fail(ErrorCode::kDimensionMismatch, "causal_fill: shape mismatch");
  Mat out(D.rows(), D.cols());
  for (Eigen::Index a = 0; a < D.cols(); ++a) {
    double last = mu(a);
    for (Eigen::Index t = 0; t < D.rows(); ++t) {
      if (M(t, a) == 1.0) last = D(t, a);
      out(t, a) = last;
    }
  }
  return out;
}

Split split_blocks(int steps, int block_len, std::uint64_t seed, double val_frac, double test_frac) {
  require(block_len > 0, ErrorCode::kInvalidArgument, "block length must be > 0");
  const int nb = steps / block_len;
  const int n_val = static_cast<int>(std::lround(val_frac * nb));
  const int n_test = static_cast<int>(std::lround(test_frac * nb));
  const int n_train = nb - n_val - n_test;
  if (nb < 3 || n_val < 1 || n_test < 1 || n_train < 1)
    fail(ErrorCode::kEmptySplit, "series too short for a train/val/test split (" + std::to_string(nb) + " blocks)");

  std::vector<int> order(static_cast<std::size_t>(nb));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0x5eedb10cULL);
  for (int i = nb - 1; i > 0; --i) {
    const int j = static_cast<int>(uniform01(rng) * (i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Split sp;
  sp.block_len = block_len;
  sp.assignment.assign(static_cast<std::size_t>(nb), 0);
  for (int i = 0; i < nb; ++i) {
    const int b = order[static_cast<std::size_t>(i)];
    sp.assignment[static_cast<std::size_t>(b)] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  }
  for (int b = 0; b < nb;) {
    const int kind = sp.assignment[static_cast<std::size_t>(b)];
    int e = b;
    while (e < nb && sp.assignment[static_cast<std::size_t>(e)] == kind) ++e;
    Range r{b * block_len, e == nb ? steps : e * block_len};
    (kind == 0 ? sp.train : kind == 1 ? sp.val : sp.test).push_back(r);
    b = e;
  }
  return sp;
}

std::vector<FusionWindow> sliding_windows(const Series& s, const std::vector<Range>& ranges, int length, int stride) {
  require(length > 0 && stride > 0, ErrorCode::kInvalidArgument, "window length and stride must be > 0");
  std::vector<FusionWindow> out;
  for (const auto& r : ranges)
    for (int st = r.begin; st + length <= r.end; st += stride) out.push_back(window(s, st, length));
  return out;
}

std::vector<FusionWindow> tiled_windows(const Series& s, const std::vector<Range>& ranges, int length) {
  require(length > 0, ErrorCode::kInvalidArgument, "window length must be > 0");
  std::vector<FusionWindow> out;
  for (const auto& r : ranges)
    for (int st = r.begin; st < r.end; st += length) out.push_back(window(s, st, std::min(length, r.end - st)));
  return out;
}

}  // namespace aoif::dataset
