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

#include "aoifuse/trilat.hpp"

#include <cmath>
#include <map>

#include "aoifuse/jsonutil.hpp"

namespace aoif::trilat {

double mse(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double r = (p - anchors[i]).norm() - ranges[i];
    s += r * r;
  }
  return s / static_cast<double>(anchors.size());
}

Vec3 mse_gradient(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3& p) {
  Vec3 g = Vec3::Zero();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Vec3 d = p - anchors[i];
    const double n = d.norm();
    if (n == 0.0) continue;
    g += (n - ranges[i]) * d / n;
  }
  return 2.0 * g / static_cast<double>(anchors.size());
}

namespace {

void normal_equations(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3& p, Mat3& jtj,
                      Vec3& jtr) {
  jtj.setZero();
  jtr.setZero();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Vec3 d = p - anchors[i];
    const double n = d.norm();
    if (n == 0.0) continue;
    const Vec3 row = d / n;
    jtj += row * row.transpose();
    jtr += row * (n - ranges[i]);
  }
}

bool rank_deficient(const Mat3& jtj) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(jtj);
  const auto ev = es.eigenvalues();
  return ev.maxCoeff() <= 0.0 || ev.minCoeff() <= 1e-10 * ev.maxCoeff();
}

}  // namespace

FixResult solve(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3& init,
                const SolveOptions& opt) {
  require(!anchors.empty() && anchors.size() == ranges.size(), ErrorCode::kDimensionMismatch,
          "solve needs matching, non-empty anchor and range lists");
  for (double r : ranges) require(r >= 0.0 && std::isfinite(r), ErrorCode::kInvalidArgument, "ranges must be >= 0");
  require(init.allFinite(), ErrorCode::kInvalidArgument, "non-finite initial guess");

  FixResult res;
  res.n_anchors = static_cast<int>(anchors.size());
  res.underdetermined = anchors.size() < 4;

  Vec3 p = init;
  // An initial guess sitting on an anchor has no defined gradient direction.
  for (const auto& a : anchors)
    if ((p - a).norm() == 0.0) p += Vec3(1e-3, 1e-3, 1e-3);

  double lambda = opt.lambda0;
  double cost = mse(anchors, ranges, p);
  auto converged_at = [&](const Vec3& q, double c) {
    return mse_gradient(anchors, ranges, q).norm() < opt.grad_tol * (1.0 + c);
  };
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (converged_at(p, cost)) {
      res.converged = true;
      break;
    }
    Mat3 jtj;
    Vec3 jtr;
    normal_equations(anchors, ranges, p, jtj, jtr);
    bool improved = false;
    while (!improved && lambda < 1e16) {
      const Mat3 a = jtj + lambda * Mat3::Identity();
      const Vec3 step = -a.ldlt().solve(jtr);
      const Vec3 cand = p + step;
      const double c = mse(anchors, ranges, cand);
      if (c < cost) {
        p = cand;
        cost = c;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
      } else if (c == cost && step.norm() <= 1e-15 * (1.0 + p.norm())) {
        break;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) {
      res.converged = converged_at(p, cost);
      break;
    }
  }
  if (it == opt.max_iterations) res.converged = converged_at(p, cost);
  res.iterations = it;
  res.position = p;
  res.residual_mse = cost;

  Mat3 jtj;
  Vec3 jtr;
  normal_equations(anchors, ranges, p, jtj, jtr);
  res.singular = rank_deficient(jtj);
  if (anchors.size() >= 4) {
    try {
      res.gdop = gdop(anchors, p);
    } catch (const Error&) {
      res.singular = true;
    }
  }
  return res;
}

double gdop(std::span<const Vec3> anchors, const Vec3& p) {
  require(anchors.size() >= 4, ErrorCode::kInvalidArgument, "GDOP needs at least four anchors");
  Eigen::MatrixXd g(static_cast<Eigen::Index>(anchors.size()), 4);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Vec3 d = anchors[i] - p;
    const double n = d.norm();
    require(n > 0.0, ErrorCode::kInvalidArgument, "anchor coincides with the evaluation point");
    const auto r = static_cast<Eigen::Index>(i);
    g.block<1, 3>(r, 0) = (d / n).transpose();
    g(r, 3) = 1.0;
  }
  const Eigen::Matrix4d gtg = g.transpose() * g;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(gtg);
  const auto ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff())) fail(ErrorCode::kSingularGeometry, "GDOP geometry matrix is singular");
  const Eigen::Matrix4d inv = gtg.inverse();
  return std::sqrt(inv.trace());
}

std::vector<Vec3> start_points(std::span<const Vec3> anchors, std::span<const double> ranges) {
  Vec3 c = Vec3::Zero();
  for (const auto& a : anchors) c += a;
  c /= static_cast<double>(anchors.size());
  std::vector<Vec3> out{c};
  if (anchors.size() < 3) return out;
  // Near-planar anchor sets have a mirror minimum on each side of the
  // plane; seed both.
  Mat3 cov = Mat3::Zero();
  for (const auto& a : anchors) cov += (a - c) * (a - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 n = es.eigenvectors().col(0);
  double mean_range = 0.0;
  for (double r : ranges) mean_range += r;
  mean_range /= static_cast<double>(ranges.size());
  out.push_back(c + mean_range * n);
  out.push_back(c - mean_range * n);
  return out;
}

FixResult solve_multistart(std::span<const Vec3> anchors, std::span<const double> ranges, const Vec3* prev) {
  FixResult best;
  bool have = false;
  for (const auto& s : start_points(anchors, ranges)) {
    auto r = solve(anchors, ranges, s);
    if (!have || r.residual_mse < best.residual_mse) {
      best = r;
      have = true;
    }
  }
  if (!prev) return best;
  // Mirror minima fit noisy ranges almost equally well, so the tracked
  // solution wins unless it is clearly worse.
  auto tracked = solve(anchors, ranges, *prev);
  if (tracked.residual_mse <= 10.0 * best.residual_mse + 0.05) return tracked;
  return best;
}

std::vector<EpochFix> trilaterate_log(const sim::MeasurementLog& log, double window, const std::optional<Vec3>& p_start) {
  require(window > 0.0, ErrorCode::kInvalidArgument, "epoch window must be > 0");
  require(!log.anchors.empty(), ErrorCode::kInvalidArgument, "log has no anchors");

  std::vector<EpochFix> out;
  std::size_t i = 0;
  bool have_prev = p_start.has_value();
  Vec3 prev = p_start.value_or(Vec3::Zero());
  while (i < log.uwb.size()) {
    const auto epoch = static_cast<long long>(std::floor(log.uwb[i].t / window + 1e-9));
    std::map<int, std::pair<double, double>> latest;  // anchor -> (t, range)
    while (i < log.uwb.size() && static_cast<long long>(std::floor(log.uwb[i].t / window + 1e-9)) == epoch) {
      const auto& r = log.uwb[i];
      if (r.valid) latest[r.anchor] = {r.t, r.range};
      ++i;
    }
    if (latest.empty()) continue;
    std::vector<Vec3> anchors;
    std::vector<double> ranges;
    double tsum = 0.0;
    for (const auto& [a, tr] : latest) {
      anchors.push_back(log.anchors[static_cast<std::size_t>(a)]);
      ranges.push_back(tr.second);
      tsum += tr.first;
    }
    EpochFix ef;
    ef.t = tsum / static_cast<double>(latest.size());
    ef.fix = solve_multistart(anchors, ranges, have_prev ? &prev : nullptr);
    // Only determined fixes seed the next epoch.
    if (!ef.fix.underdetermined && !ef.fix.singular) {
      prev = ef.fix.position;
      have_prev = true;
    }
    out.push_back(ef);
  }
  return out;
}

std::string fixes_to_jsonl(const std::vector<EpochFix>& fixes) {
  std::string s;
  for (const auto& f : fixes) {
    s += "{\"kind\":\"fix\",\"t\":";
    json::append17(s, f.t);
    s += ",\"position\":[";
    json::append17(s, f.fix.position.x());
    s += ',';
    json::append17(s, f.fix.position.y());
    s += ',';
    json::append17(s, f.fix.position.z());
    s += "],\"residual_mse\":";
    json::append17(s, f.fix.residual_mse);
    s += ",\"n_anchors\":" + std::to_string(f.fix.n_anchors) + ",\"gdop\":";
    if (std::isfinite(f.fix.gdop)) json::append17(s, f.fix.gdop);
    else s += "null";
    s += std::string(",\"converged\":") + (f.fix.converged ? "true" : "false");
    s += std::string(",\"underdetermined\":") + (f.fix.underdetermined ? "true" : "false");
    s += std::string(",\"singular\":") + (f.fix.singular ? "true" : "false");
    s += ",\"iterations\":" + std::to_string(f.fix.iterations) + "}\n";
  }
  return s;
}

std::vector<EpochFix> fixes_from_jsonl(const std::string& text) {
  std::vector<EpochFix> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = json::parse(line);
    EpochFix f;
    f.t = j.at("t").get<double>();
    f.fix.position = json::vec3(j.at("position"));
    f.fix.residual_mse = j.at("residual_mse").get<double>();
    f.fix.n_anchors = j.at("n_anchors").get<int>();
    f.fix.gdop = j.at("gdop").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("gdop").get<double>();
    f.fix.converged = j.at("converged").get<bool>();
    f.fix.underdetermined = j.value("underdetermined", f.fix.n_anchors < 4);
    f.fix.singular = j.value("singular", false);
    f.fix.iterations = j.value("iterations", 0);
    out.push_back(f);
  }
  return out;
}

}  // namespace aoif::trilat
