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

// Error statistics against truth, comparison tables, plot-data writers,
// the attention/AoI ablation table and gate-behaviour analysis.

#ifndef AOIFUSE_EVAL_HPP_
#define AOIFUSE_EVAL_HPP_

#include <array>
#include <string>
#include <vector>

#include "aoifuse/common.hpp"
#include "aoifuse/logio.hpp"
#include "aoifuse/sim.hpp"

namespace aoif::eval {

struct ErrorReport {
  std::string method;
  double rmse = 0.0;
  double mae = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  std::vector<double> cdf;       // sorted ascending
  std::vector<double> t;         // per-step times
  std::vector<double> per_step;  // 3D Euclidean errors, m
};

// Linear interpolation of the truth positions, clamped at the ends.
Vec3 truth_linear(const std::vector<sim::TruthSample>& truth, double t);

// Estimates outside the truth time span are dropped; throws kEmptyOverlap
// when none remain and kNonFinite on a non-finite estimate.
ErrorReport error_stats(const std::string& method, const logio::EstTrajectory& est,
                        const std::vector<sim::TruthSample>& truth);
ErrorReport report_from_errors(const std::string& method, std::vector<double> t, std::vector<double> errors);

// Points (x_0, 0) then (x_i, (i + 1) / n).
std::vector<std::pair<double, double>> cdf_points(const ErrorReport& r);

struct SeedReport {
  std::uint64_t seed = 0;
  ErrorReport report;
};

std::string table_csv(const std::vector<SeedReport>& rows);
std::string table_markdown(const std::vector<SeedReport>& rows);
std::string table_markdown(const std::vector<ErrorReport>& reports);
// Per-method mean over seeds of every metric, in first-appearance order.
std::vector<ErrorReport> mean_over_seeds(const std::vector<SeedReport>& rows);

// gnuplot-compatible "x y" blocks separated by blank lines, one per report.
std::string cdf_dat(const std::vector<ErrorReport>& reports);
// index min p25 p50 p75 max per report.
std::string box_dat(const std::vector<ErrorReport>& reports);
// index rmse mae p95 p99 per report.
std::string bar_dat(const std::vector<ErrorReport>& reports);

struct AblationRow {
  bool att = true;
  bool aoi = true;
  ErrorReport report;
  double d_rmse = 0.0;  // vs the full model
  double d_p95 = 0.0;
  double d_p99 = 0.0;
};

// Rows in the order full, ATT off, AoI off, both off.
std::array<AblationRow, 4> ablation_table(const ErrorReport& full, const ErrorReport& no_att,
                                          const ErrorReport& no_aoi, const ErrorReport& neither);
std::string ablation_markdown(const std::array<AblationRow, 4>& rows);
std::string ablation_csv(const std::array<AblationRow, 4>& rows);

struct GateAnalysis {
  std::vector<double> t;
  std::vector<double> alpha;
  std::vector<double> visible;
  double mean_lt3 = 0.0;  // NaN when the regime is empty
  double mean_ge3 = 0.0;
  double mean_ge4 = 0.0;
  double mean_outage = 0.0;
  int n_lt3 = 0;
  int n_ge3 = 0;
  int n_ge4 = 0;
  int n_outage = 0;
  double alpha_min = 0.0;
  bool outage_at_min = true;  // alpha == alpha_min at every outage step
  bool in_unit_interval = true;
};

GateAnalysis gate_analysis(const std::vector<double>& alpha, const std::vector<double>& visible, double alpha_min,
                           double dt);
// "t alpha visible" rows.
std::string gate_series_dat(const GateAnalysis& g);
// "regime mean count" rows.
std::string gate_regime_dat(const GateAnalysis& g);

}  // namespace aoif::eval

#endif  // AOIFUSE_EVAL_HPP_
