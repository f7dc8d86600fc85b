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

// AoI-aware gated fusion network: per-anchor range encoding with
// age-of-information decay, mask-weighted aggregation, an LSTM over fused
// features, a scalar IMU/UWB gate and a bounded displacement head.

#ifndef AOIFUSE_FUSIONNET_HPP_
#define AOIFUSE_FUSIONNET_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "aoifuse/dataset.hpp"
#include "aoifuse/nn/checkpoint.hpp"
#include "aoifuse/nn/graph.hpp"
#include "aoifuse/nn/layers.hpp"

namespace aoif::fusionnet {

using nn::Mat;
using nn::Vec;
using dataset::FusionWindow;

inline constexpr double kEps = 1e-8;

struct ModelConfig {
  int n_anchors = 6;
  int hidden = 128;
  int embed = 3;
  double alpha_min = 0.8;
  double lambda_init = 10.0;  // steps
  bool att = true;            // off: alpha fixed at 0.5
  bool aoi = true;            // off: m~ = M and no decay feature
};

struct LossConfig {
  double w_inc = 1.0;
  double w_pos = 0.5;
  double w_end = 0.5;
  double delta_inc = 0.1;
  double delta_pos = 1.0;
  double delta_end = 1.0;
};

struct AugmentConfig {
  bool enabled = false;
  double alpha_gan = 0.5;
  double subset_frac = 0.10;
  double p_max = 0.5;    // window augmentation probability after the ramp
  int ramp_epochs = 30;  // linear ramp starting after warm-up
};

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  AugmentConfig aug;
  int window = 64;
  int stride = 8;
  int batch = 16;
  int max_epochs = 150;
  int patience = 20;
  int warmup_epochs = 3;
  int plateau = 10;  // epochs without improvement before the LR is halved
  double lr = 3e-4;
  double lr_factor = 0.5;
  double weight_decay = 1e-2;
  std::uint64_t seed = 1;
};

json::Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json::Json& j);

// Frozen statistics of the training split.
struct Stats {
  Vec mu;      // per-anchor range mean
  Vec sigma;   // per-anchor range std
  Vec3 step_scale = Vec3::Ones();
  double q_prior = 0.0;
};

Stats compute_stats(const dataset::Series& s, const std::vector<dataset::Range>& train);

class Model {
 public:
  Model(const ModelConfig& cfg, const Stats& stats, std::uint64_t seed);
  Model(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ModelConfig cfg;
  Stats stats;
  nn::ParamSet ps;
  nn::Mlp imu_enc;
  nn::Mlp uwb_enc;
  nn::Mlp gate;  // empty when att is off
  nn::Mlp head;
  nn::Lstm lstm;
  nn::Param* emb = nullptr;    // E x N_A
  nn::Param* decay = nullptr;  // N_A x 1 raw, lambda = softplus; null when aoi is off

  Vec lambda() const;
};

nn::Checkpoint to_checkpoint(const Model& m, const TrainConfig& tc);
Model model_from_checkpoint(const nn::Checkpoint& ck);

// Batch layout: step columns t*B + b, anchor columns (t*N_A + a)*B + b.
struct Batch {
  int T = 0;
  int B = 0;
  int NA = 0;
  Mat U;      // 3 x TB
  Mat dn;     // 1 x TNB normalised, causally filled ranges
  Mat mask;   // 1 x TNB
  Mat tau;    // 1 x TNB
  Mat qraw;   // 1 x TB
  Mat dP;     // 3 x TB target increments (empty without truth)
  Mat P0;     // 3 x B window start positions (empty without truth)
  std::vector<int> anchor;  // per anchor column
};

Batch make_batch(std::span<const FusionWindow* const> ws, const Stats& st, int n_anchors);

struct ForwardOptions {
  std::optional<double> fixed_alpha;  // warm-up or ATT off
};

struct ForwardOut {
  nn::Var h_imu, h_uwb, mt, q, alpha, h_att, h_rnn, dp;
};

ForwardOut forward(nn::Graph& g, Model& m, const Batch& b, const ForwardOptions& opt = {});

// Batched graph loss on dp (3 x TB) against the batch targets; positions are
// the start plus the running sum of increments.
nn::Var composite_loss(nn::Graph& g, nn::Var dp, const Batch& b, const LossConfig& lc);

// Plain evaluation. dp is T x 3, p_hat and P are (T+1) x 3. The position
// term covers rows 0..T-1, the tail term row T.
double composite_loss(const Mat& dp, const Mat& p_hat, const Mat& P, const LossConfig& lc);

struct UwbFeatures {
  Mat h_uwb;  // T x H
  Vec q_raw, q_decay, q;
  Mat mt;     // T x N_A
};
UwbFeatures uwb_features(Model& m, const Mat& d_filled, const Mat& M, const Mat& tau);

struct FuseState {
  Vec h, c;
};
struct FuseOut {
  Vec h_rnn;
  double alpha = 0.0;
  Vec h_att;
  FuseState state;
};
FuseOut fuse_step(Model& m, const Vec& h_imu, const Vec& h_uwb, double q, double q_raw, const FuseState& st,
                  std::optional<double> force_alpha = std::nullopt);

// alpha * a + (1 - alpha) * b, columnwise alpha.
Mat gate_mix(const Mat& alpha, const Mat& a, const Mat& b);
// s * tanh(raw / s) per row, kept strictly inside (-s, s).
Mat bounded_step(const Mat& raw, const Vec3& s);

// T x 3 displacement predictions for one window.
Mat predict_deltas(Model& m, const FusionWindow& w);

// Running sum from p_start on a 2^-32 m lattice, so consecutive rows differ
// by exactly the (snapped) increments. Rows: T + 1.
Mat accumulate(const Mat& dp, const Vec3& p_start);
double snap(double v);

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<double> train_loss;
  std::vector<double> val_error;
  int best_epoch = -1;
};

using FakeResidualSource = std::function<double(int anchor, Rng& rng)>;

TrainResult train(const dataset::Series& s, const dataset::Split& split, const TrainConfig& tc,
                  const FakeResidualSource& fake = nullptr);

struct Inference {
  Mat p;        // (n + 1) x 3 positions at the step boundaries
  Vec alpha;    // n gate values
  Vec visible;  // n visible-anchor counts
};

// Non-overlapping windows over [r.begin, r.end), chained from p_start. With
// per_window set, every window restarts from the truth at its start.
Inference infer_range(Model& m, const dataset::Series& s, dataset::Range r, const Vec3& p_start, int window,
                      bool per_window = false);

}  // namespace aoif::fusionnet

#endif  // AOIFUSE_FUSIONNET_HPP_
