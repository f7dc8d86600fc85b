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

// UWB residual augmentation: residual extraction, a conditional denoising
// diffusion sampler over short per-anchor residual sequences, Gaussian,
// bootstrap and constant baselines, generator comparison, and soft-mixture
// injection into training windows.

#ifndef AOIFUSE_AUGMENT_HPP_
#define AOIFUSE_AUGMENT_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aoifuse/dataset.hpp"
#include "aoifuse/nn/checkpoint.hpp"
#include "aoifuse/nn/graph.hpp"
#include "aoifuse/nn/layers.hpp"
#include "aoifuse/sim.hpp"

namespace aoif::augment {

using nn::Mat;
using nn::Vec;

struct ResidualRecord {
  double t = 0.0;
  int anchor = 0;
  double epsilon = 0.0;  // measured minus geometric range, m
  Eigen::Vector2d condition = Eigen::Vector2d::Zero();  // speed m/s, visible anchors in the slot
};

// One record per valid UWB measurement. Throws kMissingTruth without truth.
std::vector<ResidualRecord> extract_residuals(const sim::MeasurementLog& log, double slot = 0.05);

std::string residuals_to_jsonl(const std::vector<ResidualRecord>& rs);
std::vector<ResidualRecord> residuals_from_jsonl(const std::string& text);

struct ResidualWindow {
  Vec values;  // length L, consecutive slots of one anchor
  Eigen::Vector2d condition = Eigen::Vector2d::Zero();  // window means
  int anchor = 0;
  double t0 = 0.0;
};

// Non-overlapping runs of `length` records of the same anchor in
// consecutive slots.
std::vector<ResidualWindow> residual_windows(const std::vector<ResidualRecord>& rs, int length = 8,
                                             double slot = 0.05);

struct DiffusionConfig {
  int steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int hidden = 64;
  int length = 8;
  int time_embed = 8;
  int train_iters = 3000;
  int batch = 128;
  double lr = 1e-3;
};

json::Json to_json(const DiffusionConfig& c);
DiffusionConfig diffusion_config_from_json(const json::Json& j);

class DiffusionModel {
 public:
  DiffusionModel(const DiffusionConfig& cfg, std::uint64_t seed);
  DiffusionModel(DiffusionModel&&) = default;
  DiffusionModel(const DiffusionModel&) = delete;
  DiffusionModel& operator=(const DiffusionModel&) = delete;

  DiffusionConfig cfg;
  std::vector<double> beta, alpha, alpha_bar;
  nn::ParamSet ps;
  nn::Mlp denoiser;  // [x_k, time embedding, condition] -> predicted noise
  // Standardisation of residual values and conditions (fitted on the corpus).
  double value_mean = 0.0;
  double value_scale = 1.0;
  Eigen::Vector2d cond_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d cond_scale = Eigen::Vector2d::Ones();
  // Conditions seen in training; used when sampling without explicit ones.
  std::vector<Eigen::Vector2d> train_conditions;
  bool zero_denoiser = false;  // untrained stand-in that predicts 0
};

Mat time_embedding(const std::vector<int>& k, int dim, int steps);

// Mean squared noise-prediction error on standardised x0 (L x B), with
// diffusion steps k (0-based) and noise (L x B).
nn::Var denoiser_loss(nn::Graph& g, DiffusionModel& m, const Mat& x0, const Mat& cond, const std::vector<int>& k,
                      const Mat& noise);

// Fits standardisation and trains the denoiser with Adam. Returns the loss
// per iteration.
std::vector<double> train_diffusion(DiffusionModel& m, const std::vector<ResidualWindow>& corpus, std::uint64_t seed);

// Ancestral sampling; returns L x n residual windows in metres. Conditions
// are 2 x n in physical units.
Mat sample_residuals(const DiffusionModel& m, const Mat& conditions, Rng& rng);
// Variance in standardised units of a sample when the denoiser predicts 0.
double zero_denoiser_variance(const DiffusionModel& m);

nn::Checkpoint to_checkpoint(const DiffusionModel& m, std::uint64_t seed);
DiffusionModel diffusion_from_checkpoint(const nn::Checkpoint& ck);

struct Generator {
  std::string name;
  std::function<std::vector<double>(std::size_t n, Rng& rng)> sample;
};

Generator gaussian_fit(const std::vector<double>& train);
Generator bootstrap(const std::vector<double>& train);
Generator constant(double value);
Generator diffusion(const DiffusionModel& m);

double ks_distance(std::vector<double> a, std::vector<double> b);

struct GeneratorScore {
  std::string name;
  double ks = 0.0;
  double d_mean = 0.0;
  double d_median = 0.0;
  double d_p95 = 0.0;
  double d_p99 = 0.0;
};

std::vector<GeneratorScore> compare_generators(const std::vector<double>& real, const std::vector<Generator>& gens,
                                               std::size_t n_samples, std::uint64_t seed);

using FakeSource = std::function<double(int anchor, Rng& rng)>;

// Replaces ceil(subset_frac * #valid) uniformly chosen valid ranges by
// R + (1 - alpha_gan) eps_real + alpha_gan eps_fake. Needs w.R.
dataset::FusionWindow mix_and_inject(const dataset::FusionWindow& w, const FakeSource& fake, double alpha_gan,
                                     double subset_frac, Rng& rng);

// Draws uniformly from a pre-sampled pool.
FakeSource pool_source(std::vector<double> pool);

}  // namespace aoif::augment

#endif  // AOIFUSE_AUGMENT_HPP_
