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

// Multilateration by Levenberg-Marquardt on the range MSE, plus GDOP.

#ifndef AOIFUSE_TRILAT_HPP_
#define AOIFUSE_TRILAT_HPP_

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aoifuse/common.hpp"
#include "aoifuse/sim.hpp"

namespace aoif::trilat {

struct FixResult {
  Vec3 position = Vec3::Zero();
  double residual_mse = 0.0;
  int n_anchors = 0;
  double gdop = std::numeric_limits<double>::quiet_NaN();  // NaN when not computable
  bool converged = false;
  bool underdetermined = false;  // fewer than four anchors
  bool singular = false;         // normal matrix rank-deficient at the solution
  int iterations = 0;
};

struct SolveOptions {
  int max_iterations = 100;
  double lambda0 = 1e-3;
  // Converged when |grad MSE| < grad_tol * (1 + MSE).
  double grad_tol = 1e-8;
};

double mse(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3& p);
Vec3 mse_gradient(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3& p);

FixResult solve(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3& init,
                const SolveOptions& opt = {});

// sqrt(trace((G^T G)^-1)) with rows [unit(a_i - p), 1]. Throws
// kSingularGeometry when G^T G is not invertible.
double gdop(std::span<const Vec3> anchors, const Vec3& p);

struct EpochFix {
  double t = 0.0;
  FixResult fix;
};

// Starting points for an epoch: the anchor centroid and, for three or more
// anchors, the centroid offset by the mean range along the normal of the
// anchors' best-fit plane.
std::vector<Vec3> start_points(std::span<const Vec3> anchors, std::span<const double> ranges);

// Solves from every start point and keeps the lowest-MSE result. With a
// previous fix, the solution tracked from it is kept unless its MSE exceeds
// 10 * best + 0.05 m^2.
FixResult solve_multistart(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3* prev);

// Groups valid ranges into windows of `window` seconds (latest range per
// anchor) and solves each epoch with solve_multistart, seeding with the
// most recent determined fix (or p_start before the first one).
std::vector<EpochFix> trilaterate_log(const sim::MeasurementLog& log, double window = 0.05,
                                      const std::optional<Vec3>& p_start = std::nullopt);

std::string fixes_to_jsonl(const std::vector<EpochFix>& fixes);
std::vector<EpochFix> fixes_from_jsonl(const std::string& text);

}  // namespace aoif::trilat

#endif  // AOIFUSE_TRILAT_HPP_
