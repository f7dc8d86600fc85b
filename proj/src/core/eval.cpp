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

#include "aoifuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "aoifuse/jsonutil.hpp"

namespace aoif::eval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g9(double v) { return fmt("%.9g", v); }

}  // namespace

Vec3 truth_linear(const std::vector<sim::TruthSample>& truth, double t) {
  require(!truth.empty(), ErrorCode::kMissingTruth, "no truth samples");
  if (t <= truth.front().t) return truth.front().position;
  if (t >= truth.back().t) return truth.back().position;
  const auto it = std::upper_bound(truth.begin(), truth.end(), t,
                                   [](double v, const sim::TruthSample& s) { return v < s.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double w = (t - a.t) / (b.t - a.t);
  return (1.0 - w) * a.position + w * b.position;
}

ErrorReport error_stats(const std::string& method, const logio::EstTrajectory& est,
                        const std::vector<sim::TruthSample>& truth) {
  require(!truth.empty(), ErrorCode::kMissingTruth, "no truth samples");
  std::vector<double> t, e;
  for (const auto& p : est) {
    require(p.p.allFinite() && std::isfinite(p.t), ErrorCode::kNonFinite, "non-finite estimate");
    if (p.t < truth.front().t || p.t > truth.back().t) continue;
    t.push_back(p.t);
    e.push_back((p.p - truth_linear(truth, p.t)).norm());
  }
  return report_from_errors(method, std::move(t), std::move(e));
}

ErrorReport report_from_errors(const std::string& method, std::vector<double> t, std::vector<double> errors) {
  require(!errors.empty(), ErrorCode::kEmptyOverlap, "no estimates overlap the truth");
  require(t.size() == errors.size(), ErrorCode::kDimensionMismatch, "times and errors differ in length");
  ErrorReport r;
  r.method = method;
  double se = 0.0, ae = 0.0;
  for (double v : errors) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::kNonFinite, "errors must be finite and >= 0");
    se += v * v;
    ae += v;
  }
  const auto n = static_cast<double>(errors.size());
  r.rmse = std::sqrt(se / n);
  r.mae = ae / n;
  r.cdf = errors;
  std::sort(r.cdf.begin(), r.cdf.end());
  r.p50 = percentile_sorted(r.cdf, 0.50);
  r.p95 = percentile_sorted(r.cdf, 0.95);
  r.p99 = percentile_sorted(r.cdf, 0.99);
  r.t = std::move(t);
  r.per_step = std::move(errors);
  return r;
}

std::vector<std::pair<double, double>> cdf_points(const ErrorReport& r) {
  std::vector<std::pair<double, double>> out;
  if (r.cdf.empty()) return out;
  const auto n = static_cast<double>(r.cdf.size());
  out.emplace_back(r.cdf.front(), 0.0);
  for (std::size_t i = 0; i < r.cdf.size(); ++i) out.emplace_back(r.cdf[i], static_cast<double>(i + 1) / n);
  return out;
}

std::string table_csv(const std::vector<SeedReport>& rows) {
  std::string s = "method,seed,rmse,mae,p50,p95,p99,n\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    s += r.method + ',' + std::to_string(row.seed);
    for (double v : {r.rmse, r.mae, r.p50, r.p95, r.p99}) s += ',' + json::fmt17(v);
    s += ',' + std::to_string(r.per_step.size()) + '\n';
  }
  return s;
}

std::string table_markdown(const std::vector<SeedReport>& rows) {
  std::string s = "| method | seed | RMSE | MAE | P50 | P95 | P99 |\n|---|---|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    s += "| " + r.method + " | " + std::to_string(row.seed);
    for (double v : {r.rmse, r.mae, r.p50, r.p95, r.p99}) s += " | " + fmt("%.3f", v);
    s += " |\n";
  }
  return s;
}

std::string table_markdown(const std::vector<ErrorReport>& reports) {
  std::string s = "| method | RMSE | MAE | P50 | P95 | P99 |\n|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    s += "| " + r.method;
    for (double v : {r.rmse, r.mae, r.p50, r.p95, r.p99}) s += " | " + fmt("%.3f", v);
    s += " |\n";
  }
  return s;
}

std::vector<ErrorReport> mean_over_seeds(const std::vector<SeedReport>& rows) {
  std::vector<ErrorReport> out;
  std::map<std::string, std::size_t> index;
  std::vector<int> count;
  for (const auto& row : rows) {
    auto [it, inserted] = index.try_emplace(row.report.method, out.size());
    if (inserted) {
      ErrorReport r;
      r.method = row.report.method;
      r.rmse = r.mae = r.p50 = r.p95 = r.p99 = 0.0;
      out.push_back(r);
      count.push_back(0);
    }
    auto& m = out[it->second];
    const auto& r = row.report;
    m.rmse += r.rmse;
    m.mae += r.mae;
    m.p50 += r.p50;
    m.p95 += r.p95;
    m.p99 += r.p99;
    m.cdf.insert(m.cdf.end(), r.cdf.begin(), r.cdf.end());
    ++count[it->second];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double n = count[i];
    auto& m = out[i];
    m.rmse /= n;
    m.mae /= n;
    m.p50 /= n;
    m.p95 /= n;
    m.p99 /= n;
    std::sort(m.cdf.begin(), m.cdf.end());
  }
  return out;
}

std::string cdf_dat(const std::vector<ErrorReport>& reports) {
  std::string s;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i) s += "\n\n";
    s += "# " + reports[i].method + "\n";
    for (const auto& [x, y] : cdf_points(reports[i])) s += g9(x) + ' ' + g9(y) + '\n';
  }
  return s;
}

std::string box_dat(const std::vector<ErrorReport>& reports) {
  std::string s = "# index min p25 p50 p75 max method\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& c = reports[i].cdf;
    if (c.empty()) continue;
    s += std::to_string(i);
    for (double v : {c.front(), percentile_sorted(c, 0.25), percentile_sorted(c, 0.5), percentile_sorted(c, 0.75),
                     c.back()})
      s += ' ' + g9(v);
    s += ' ' + reports[i].method + '\n';
  }
  return s;
}

std::string bar_dat(const std::vector<ErrorReport>& reports) {
  std::string s = "# index rmse mae p95 p99 method\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    s += std::to_string(i);
    for (double v : {r.rmse, r.mae, r.p95, r.p99}) s += ' ' + g9(v);
    s += ' ' + r.method + '\n';
  }
  return s;
}

std::array<AblationRow, 4> ablation_table(const ErrorReport& full, const ErrorReport& no_att,
                                          const ErrorReport& no_aoi, const ErrorReport& neither) {
  std::array<AblationRow, 4> rows{AblationRow{true, true, full}, AblationRow{false, true, no_att},
                                  AblationRow{true, false, no_aoi}, AblationRow{false, false, neither}};
  for (auto& r : rows) {
    r.d_rmse = r.report.rmse - full.rmse;
    r.d_p95 = r.report.p95 - full.p95;
    r.d_p99 = r.report.p99 - full.p99;
  }
  return rows;
}

std::string ablation_markdown(const std::array<AblationRow, 4>& rows) {
  std::string s =
      "| ATT | AoI | RMSE | MAE | P50 | P95 | P99 | dRMSE | dP95 |\n|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    s += std::string("| ") + (row.att ? "on" : "off") + " | " + (row.aoi ? "on" : "off");
    for (double v : {r.rmse, r.mae, r.p50, r.p95, r.p99}) s += " | " + fmt("%.3f", v);
    s += " | " + fmt("%+.3f", row.d_rmse) + " | " + fmt("%+.3f", row.d_p95) + " |\n";
  }
  return s;
}

std::string ablation_csv(const std::array<AblationRow, 4>& rows) {
  std::string s = "att,aoi,rmse,mae,p50,p95,p99,d_rmse,d_p95,d_p99\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    s += std::string(row.att ? "1" : "0") + ',' + (row.aoi ? "1" : "0");
    for (double v : {r.rmse, r.mae, r.p50, r.p95, r.p99, row.d_rmse, row.d_p95, row.d_p99}) s += ',' + json::fmt17(v);
    s += '\n';
  }
  return s;
}

GateAnalysis gate_analysis(const std::vector<double>& alpha, const std::vector<double>& visible, double alpha_min,
                           double dt) {
  require(alpha.size() == visible.size(), ErrorCode::kDimensionMismatch, "alpha and visible counts differ in length");
  GateAnalysis g;
  g.alpha = alpha;
  g.visible = visible;
  g.alpha_min = alpha_min;
  double s_lt3 = 0.0, s_ge3 = 0.0, s_ge4 = 0.0, s_out = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    g.t.push_back(dt * static_cast<double>(k));
    const double a = alpha[k];
    const double v = visible[k];
    if (!(a >= 0.0 && a <= 1.0)) g.in_unit_interval = false;
    if (v < 3.0) {
      s_lt3 += a;
      ++g.n_lt3;
    } else {
      s_ge3 += a;
      ++g.n_ge3;
    }
    if (v >= 4.0) {
      s_ge4 += a;
      ++g.n_ge4;
    }
    if (v == 0.0) {
      s_out += a;
      ++g.n_outage;
      if (a != alpha_min) g.outage_at_min = false;
    }
  }
  auto mean = [](double s, int n) { return n > 0 ? s / n : kNaN; };
  g.mean_lt3 = mean(s_lt3, g.n_lt3);
  g.mean_ge3 = mean(s_ge3, g.n_ge3);
  g.mean_ge4 = mean(s_ge4, g.n_ge4);
  g.mean_outage = mean(s_out, g.n_outage);
  return g;
}

std::string gate_series_dat(const GateAnalysis& g) {
  std::string s = "# t alpha visible\n";
  for (std::size_t k = 0; k < g.alpha.size(); ++k)
    s += g9(g.t[k]) + ' ' + json::fmt17(g.alpha[k]) + ' ' + g9(g.visible[k]) + '\n';
  return s;
}

std::string gate_regime_dat(const GateAnalysis& g) {
  std::string s = "# regime mean count\n";
  s += "lt3 " + g9(g.mean_lt3) + ' ' + std::to_string(g.n_lt3) + '\n';
  s += "ge3 " + g9(g.mean_ge3) + ' ' + std::to_string(g.n_ge3) + '\n';
  s += "ge4 " + g9(g.mean_ge4) + ' ' + std::to_string(g.n_ge4) + '\n';
  s += "outage " + g9(g.mean_outage) + ' ' + std::to_string(g.n_outage) + '\n';
  return s;
}

}  // namespace aoif::eval
