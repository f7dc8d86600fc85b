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

// Alignment of a measurement log onto the UWB slot grid, FusionWindow
// construction, AoI and causal fill, and the block-level data split.

#ifndef AOIFUSE_DATASET_HPP_
#define AOIFUSE_DATASET_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "aoifuse/common.hpp"
#include "aoifuse/imuprep.hpp"
#include "aoifuse/sim.hpp"
#include "aoifuse/trilat.hpp"

namespace aoif::dataset {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Model-rate series. Step k covers [k dt, (k+1) dt); P holds positions at
// the step boundaries.
struct Series {
  double dt = 0.05;
  int n_anchors = 0;
  int steps = 0;
  Mat U;    // steps x 3, slot mean of the bias-corrected global acceleration
  Mat D;    // steps x N_A, latest valid range in the slot, 0 where M = 0
  Mat M;    // steps x N_A, 1 where a valid range arrived in the slot
  Mat R;    // steps x N_A, geometric range at that record's time (truth only)
  Mat P;    // (steps + 1) x 3 truth positions (truth only)
  Mat Fix;  // steps x 3, latest determined multilateration fix, causally held
  bool has_truth = false;
  double t(int k) const { return dt * k; }
};

struct AlignOptions {
  double dt = 0.05;
  imuprep::BiasCorrection bias;
  // Held fix before the first determined fix (typically the known start).
  Vec3 fix_fill = Vec3::Zero();
};

Series align(const sim::MeasurementLog& log, const std::vector<trilat::EpochFix>& fixes, const AlignOptions& opt);

// Bias correction fitted on the whole log: the run ends at rest and its
// displacement equals the truth displacement.
imuprep::BiasCorrection fit_bias(const sim::MeasurementLog& log);

// Cubic Hermite interpolation of the truth positions and velocities,
// clamped at the ends.
Vec3 truth_at(const std::vector<sim::TruthSample>& truth, double t);

struct FusionWindow {
  Mat U;    // T x 3
  Mat D;    // T x N_A
  Mat M;    // T x N_A
  Mat tau;  // T x N_A
  Mat P;    // (T + 1) x 3, empty without truth
  Mat R;    // T x N_A geometric ranges, empty without truth
  Mat Fix;  // T x 3
  int start = 0;
  int steps() const { return static_cast<int>(U.rows()); }
};

FusionWindow window(const Series& s, int start, int length);

// tau[0] = 0; tau[t] = 0 where M[t] = 1, else tau[t-1] + 1.
Mat compute_aoi(const Mat& M);
// Latest valid value at or before t, or mu[a] if there is none.
Mat causal_fill(const Mat& D, const Mat& M, const Vec& mu);

struct Range {
  int begin = 0;
  int end = 0;  // exclusive
};

struct Split {
  int block_len = 128;
  std::vector<int> assignment;  // per block: 0 train, 1 val, 2 test
  std::vector<Range> train, val, test;  // maximal runs of same-split blocks
};

// Blocks of block_len steps (the remainder joins the last block), assigned
// by a seeded shuffle in proportions train/val/test. Throws kEmptySplit when
// any split would be empty.
Split split_blocks(int steps, int block_len, std::uint64_t seed, double val_frac = 0.15, double test_frac = 0.15);

// Sliding windows of `length` with `stride` inside every range.
std::vector<FusionWindow> sliding_windows(const Series& s, const std::vector<Range>& ranges, int length, int stride);
// Non-overlapping windows tiling every range; a short tail window is kept.
std::vector<FusionWindow> tiled_windows(const Series& s, const std::vector<Range>& ranges, int length);

}  // namespace aoif::dataset

#endif  // AOIFUSE_DATASET_HPP_
