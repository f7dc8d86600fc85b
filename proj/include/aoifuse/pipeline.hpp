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

// Run configuration and staged orchestration: simulate, trilaterate, train,
// infer, evaluate and report for a list of methods and seeds. Each seed runs
// in its own directory with a manifest of stage keys and artifact digests;
// a stage whose key and artifacts are unchanged is skipped unless forced.

#ifndef AOIFUSE_PIPELINE_HPP_
#define AOIFUSE_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aoifuse/akf.hpp"
#include "aoifuse/augment.hpp"
#include "aoifuse/bilstm.hpp"
#include "aoifuse/dataset.hpp"
#include "aoifuse/eval.hpp"
#include "aoifuse/fusionnet.hpp"
#include "aoifuse/sim.hpp"
#include "aoifuse/trilat.hpp"

namespace aoif::pipeline {

const std::vector<std::string>& method_names();

struct RunConfig {
  std::string scenario = "reference";  // or a path to a scenario JSON file
  std::vector<std::string> methods = method_names();
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "aoifuse_out";
  int threads = 1;
  int block_len = 128;
  double epoch_window = 0.05;  // s, multilateration epoch
  fusionnet::TrainConfig fusionnet = desk_fusionnet();
  bilstm::BilstmConfig bilstm;
  augment::DiffusionConfig diffusion;
  int residual_pool = 20000;    // diffusion samples drawn for augmentation
  int compare_samples = 5000;   // samples per generator in the comparison

  static fusionnet::TrainConfig desk_fusionnet();
};

json::Json to_json(const RunConfig& c);
// Sections "fusionnet", "bilstm" and "diffusion" are patches over the
// defaults. Unknown keys are rejected.
RunConfig run_config_from_json(const json::Json& j);
RunConfig load_run_config(const std::string& path);
std::string config_hash(const RunConfig& c);

// AOIFUSE_OUTPUT_DIR and AOIFUSE_THREADS.
void apply_env(RunConfig& c);
// Known methods, at least one seed, no duplicates, positive sizes, and a
// writable output directory. Throws kInvalidArgument.
void validate(const RunConfig& c);

sim::Scenario resolve_scenario(const std::string& ref, std::uint64_t seed);

// The known start is the first truth position.
Vec3 start_position(const sim::MeasurementLog& log);
// Gravity-free global accelerations with the bias correction applied.
std::vector<Vec3> global_accel(const sim::MeasurementLog& log, const imuprep::BiasCorrection& bias);

struct Variant {
  bool att = true;
  bool aoi = true;
  bool dgan = false;
  std::string name() const;
};

// FusionNet method and ablation variant names: fusionnet, fusionnet-dgan,
// fusionnet-noatt, fusionnet-noaoi, fusionnet-noatt-noaoi.
std::optional<Variant> variant_of(const std::string& method);

class SeedRun {
 public:
  SeedRun(const RunConfig& cfg, std::uint64_t seed, bool force);
  ~SeedRun();
  SeedRun(const SeedRun&) = delete;
  SeedRun& operator=(const SeedRun&) = delete;

  std::uint64_t seed() const { return seed_; }
  const std::filesystem::path& dir() const { return dir_; }

  const sim::MeasurementLog& log();
  const std::vector<trilat::EpochFix>& fixes();
  const dataset::Series& series();
  const dataset::Split& split();

  nn::Checkpoint fusionnet(const Variant& v);
  nn::Checkpoint bilstm();
  nn::Checkpoint generator();
  std::vector<augment::GeneratorScore> compare_generators();

  // Test-split estimates of one method (or a FusionNet variant name),
  // written with their report.
  eval::ErrorReport evaluate(const std::string& method);
  eval::GateAnalysis gate();
  std::array<eval::AblationRow, 4> ablate();

  // Digests of every artifact recorded in the manifest.
  std::vector<std::pair<std::string, std::string>> artifact_digests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint64_t seed_;
  std::filesystem::path dir_;
};

struct BenchmarkResult {
  std::vector<eval::SeedReport> rows;
  std::vector<std::pair<std::uint64_t, eval::GateAnalysis>> gates;
};

// Every selected method on every seed, then the combined report.
BenchmarkResult run_benchmark(const RunConfig& cfg, bool force);
// The four attention/AoI combinations per seed and the combined table.
std::vector<std::pair<std::uint64_t, std::array<eval::AblationRow, 4>>> run_ablation(const RunConfig& cfg,
                                                                                      bool force);
// Diffusion versus baseline generators per seed.
std::vector<std::pair<std::uint64_t, std::vector<augment::GeneratorScore>>> run_generator_comparison(
    const RunConfig& cfg, bool force);
// Rebuilds the combined tables and plot data from per-seed reports on disk.
std::vector<eval::SeedReport> write_report(const RunConfig& cfg);

// Reads an estimate report written by SeedRun::evaluate.
eval::ErrorReport read_report(const std::string& path);
void write_report_file(const std::string& path, const eval::ErrorReport& r, std::uint64_t seed,
                       const std::string& key);

// Chained FusionNet or Bi-LSTM inference over a whole log from p_start.
logio::EstTrajectory infer_log(const nn::Checkpoint& ck, const sim::MeasurementLog& log, const Vec3& p_start,
                               double epoch_window = 0.05);

}  // namespace aoif::pipeline

#endif  // AOIFUSE_PIPELINE_HPP_
