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

// Loose-coupled baseline: stacked bidirectional LSTM over accelerations and
// trilaterated positions, predicting per-step displacements.

#ifndef AOIFUSE_BILSTM_HPP_
#define AOIFUSE_BILSTM_HPP_

#include <cstdint>
#include <vector>

#include "aoifuse/dataset.hpp"
#include "aoifuse/nn/checkpoint.hpp"
#include "aoifuse/nn/graph.hpp"
#include "aoifuse/nn/layers.hpp"

namespace aoif::bilstm {

using nn::Mat;
using nn::Vec;

struct BilstmConfig {
  int window = 64;
  int layers = 3;
  int hidden = 32;  // per direction
  double lr = 1e-3;
  int batch = 16;
  int stride = 8;
  int max_epochs = 150;
  int patience = 30;
  Vec3 W = Vec3(1.0, 1.0, 2.0);
  std::uint64_t seed = 1;
};

json::Json to_json(const BilstmConfig& c);
BilstmConfig bilstm_config_from_json(const json::Json& j);

// Per-feature standardisation of [accel xyz, position xyz].
struct FeatureStats {
  Eigen::Matrix<double, 6, 1> mean = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> scale = Eigen::Matrix<double, 6, 1>::Ones();
};

FeatureStats compute_feature_stats(const dataset::Series& s, const std::vector<dataset::Range>& train);

struct Direction {
  nn::Lstm fwd;
  nn::Lstm bwd;
};

class Model {
 public:
  Model(const BilstmConfig& cfg, const FeatureStats& stats, std::uint64_t seed);
  Model(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  BilstmConfig cfg;
  FeatureStats stats;
  nn::ParamSet ps;
  std::vector<Direction> layers;
  nn::Dense head;  // 2H -> 3
};

// Raw T x 6 features of a window: U then the held fix.
Mat features(const dataset::FusionWindow& w);

// x: 6 x TB standardised features, columns t*B + b. Returns 3 x TB deltas.
nn::Var forward(nn::Graph& g, Model& m, nn::Var x, int T, int B);

// T x 3 deltas for one window of raw T x 6 features.
Mat bilstm_forward(Model& m, const Mat& raw_features);

nn::Checkpoint to_checkpoint(const Model& m);
Model model_from_checkpoint(const nn::Checkpoint& ck);

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<double> train_loss;
  std::vector<double> val_error;
  int best_epoch = -1;
};

TrainResult train(const dataset::Series& s, const dataset::Split& split, const BilstmConfig& cfg);

// Non-overlapping windows over [r.begin, r.end), chained from p_start.
// Rows: (r.end - r.begin) + 1.
Mat infer_range(Model& m, const dataset::Series& s, dataset::Range r, const Vec3& p_start, int window);

}  // namespace aoif::bilstm

#endif  // AOIFUSE_BILSTM_HPP_
