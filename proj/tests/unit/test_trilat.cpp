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

#include <cmath>

#include "../common/oracles.hpp"
#include "aoifuse/sim.hpp"
#include "aoifuse/trilat.hpp"
#include "doctest.h"

using namespace aoif;
using namespace aoif::trilat;

namespace {

std::vector<double> exact_ranges(const std::vector<Vec3>& anchors, const Vec3& p) {
  std::vector<double> r;
  for (const auto& a : anchors) r.push_back((p - a).norm());
  return r;
}

Vec3 centroid(const std::vector<Vec3>& anchors) {
  Vec3 c = Vec3::Zero();
  for (const auto& a : anchors) c += a;
  return c / static_cast<double>(anchors.size());
}

}  // namespace

TEST_CASE("exact ranges recover the point") {
  const std::vector<Vec3> anchors{Vec3(10, 0, 0), Vec3(-10, 0, 0), Vec3(0, 10, 0), Vec3(0, -10, 0), Vec3(0, 0, 10)};
  const Vec3 truth(1, 2, 3);
  const auto res = solve(anchors, exact_ranges(anchors, truth), centroid(anchors));
  CHECK(res.converged);
  CHECK(!res.underdetermined);
  CHECK(!res.singular);
  CHECK((res.position - truth).norm() < 1e-6);
  CHECK(res.residual_mse <= 1e-12);
  CHECK(res.gdop > 0.0);
}

TEST_CASE("single anchor lands on the sphere and is flagged") {
  const std::vector<Vec3> anchors{Vec3::Zero()};
  const std::vector<double> ranges{5.0};
  const auto res = solve(anchors, ranges, Vec3(1, 0, 0));
  CHECK(res.underdetermined);
  CHECK(res.n_anchors == 1);
  CHECK(res.position.norm() == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(res.residual_mse < 1e-12);
  CHECK(std::isnan(res.gdop));
}

TEST_CASE("noisy four-anchor solution matches the grid oracle") {
  const std::vector<Vec3> anchors{Vec3(12, -3, 1), Vec3(-8, 9, -2), Vec3(1, -11, 7), Vec3(-2, 4, -9)};
  const Vec3 truth(0.7, -0.4, 1.3);
  auto ranges = exact_ranges(anchors, truth);
  for (auto& r : ranges) r += 0.1;
  const auto res = solve(anchors, ranges, centroid(anchors));
  const auto hit = oracle::grid_search(anchors, ranges, truth, 2.0, 0.01);
  CHECK(res.converged);
  CHECK((res.position - hit.p).cwiseAbs().maxCoeff() <= 0.01);
  CHECK(res.residual_mse <= hit.mse + 1e-12);
}

TEST_CASE("converged solutions satisfy the gradient bound") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> anchors;
    const int n = 4 + trial % 3;
    for (int i = 0; i < n; ++i) anchors.push_back(Vec3(gauss(rng), gauss(rng), gauss(rng)) * 20.0);
    const Vec3 truth(gauss(rng), gauss(rng), gauss(rng));
    auto ranges = exact_ranges(anchors, truth);
    for (auto& r : ranges) r = std::max(0.0, r + 0.2 * gauss(rng));
    const auto res = solve(anchors, ranges, centroid(anchors));
    if (!res.converged) continue;
    CHECK(mse_gradient(anchors, ranges, res.position).norm() < 1e-8 * (1.0 + res.residual_mse));
  }
}

TEST_CASE("translation equivariance") {
  const std::vector<Vec3> anchors{Vec3(12, -3, 1), Vec3(-8, 9, -2), Vec3(1, -11, 7), Vec3(-2, 4, -9), Vec3(5, 5, 5)};
  auto ranges = exact_ranges(anchors, Vec3(1, 1, 1));
  ranges[0] += 0.3;
  ranges[3] -= 0.2;
  const Vec3 v(1000.0, -250.0, 40.0);
  std::vector<Vec3> moved;
  for (const auto& a : anchors) moved.push_back(a + v);
  const auto r0 = solve(anchors, ranges, Vec3::Zero());
  const auto r1 = solve(moved, ranges, v);
  CHECK((r1.position - r0.position - v).norm() < 1e-7);
}

TEST_CASE("gdop geometry ordering and errors") {
  const Vec3 p(0, 0, 0);
  const std::vector<Vec3> tetra{Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  const std::vector<Vec3> planar{Vec3(1, 0, 0.1), Vec3(0, 2, 0.1), Vec3(-1.5, 0, 0.1), Vec3(0, -1, 0.1)};
  const double gt = gdop(tetra, p);
  CHECK(std::isfinite(gt));
  CHECK(gt > 0.0);
  CHECK(gdop(planar, p) > gt);

  const std::vector<Vec3> line{Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(-4, 0, 0)};
  try {
    gdop(line, p);
    FAIL("expected singular geometry");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingularGeometry);
  }
}

TEST_CASE("unit cube gdop matches the matrix-inverse oracle") {
  std::vector<Vec3> cube;
  for (int i = 0; i < 8; ++i) cube.push_back(Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1));
  const Vec3 center(0.5, 0.5, 0.5);
  const double g = gdop(cube, center);
  CHECK(std::abs(g - oracle::gdop(cube, center)) < 1e-9);
  CHECK(std::abs(g - std::sqrt(1.25)) < 1e-9);
}

TEST_CASE("gdop is invariant under rotation about p") {
  const Vec3 p(3, -2, 1);
  const std::vector<Vec3> anchors{Vec3(12, -3, 1), Vec3(-8, 9, -2), Vec3(1, -11, 7), Vec3(-2, 4, -9), Vec3(5, 5, 5)};
  const Mat3 r = sim::rotation_from_rpy(Vec3(0.3, -1.1, 2.0));
  std::vector<Vec3> rotated;
  for (const auto& a : anchors) rotated.push_back(p + r * (a - p));
  CHECK(gdop(rotated, p) == doctest::Approx(gdop(anchors, p)).epsilon(1e-10));
}

TEST_CASE("trilaterate_log on the noiseless reference scenario") {
  auto sc = sim::reference_scenario(1);
  sc.channel.los_range_sigma = 0.0;
  sc.channel.nlos_prob_schedule.clear();
  sc.channel.quantize = false;
  const auto log = sim::generate(sc);
  const auto fixes = trilaterate_log(log);
  REQUIRE(fixes.size() > 1000);
  const sim::Trajectory traj(sc.trajectory);
  std::vector<double> errs;
  for (std::size_t i = 0; i < fixes.size(); ++i) {
    if (i) CHECK(fixes[i].t > fixes[i - 1].t);
    if (fixes[i].fix.n_anchors >= 4) errs.push_back((fixes[i].fix.position - traj.at(fixes[i].t).p).norm());
  }
  REQUIRE(errs.size() > 100);
  std::sort(errs.begin(), errs.end());
  // Left over: platform motion between the staggered ranges of one slot,
  // amplified by poor geometry.
  CHECK(errs[errs.size() / 2] < 0.05);
  CHECK(errs.back() < 2.0);

  const auto back = fixes_from_jsonl(fixes_to_jsonl(fixes));
  REQUIRE(back.size() == fixes.size());
  CHECK(back[10].fix.position == fixes[10].fix.position);
  CHECK(back[10].t == fixes[10].t);
}
