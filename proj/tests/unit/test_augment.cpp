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
#include <numeric>

#include "aoifuse/augment.hpp"
#include "aoifuse/nn/gradcheck.hpp"
#include "doctest.h"
#include "toy.hpp"

using namespace aoif;
using namespace aoif::augment;

namespace {

sim::Scenario quiet_scenario() {
  sim::Scenario sc;
  sc.anchors = {Vec3(10, 0, 0), Vec3(-10, 0, 0), Vec3(0, 10, 3), Vec3(0, -10, 3)};
  sc.trajectory.waypoints = {Vec3(0, 0, 1), Vec3(4, 2, 1)};
  sc.trajectory.plateaus = {{1.0, 0.0}};
  sc.channel.los_range_sigma = 0.0;
  sc.channel.nlos_bias_sigma = 0.0;
  sc.channel.quantize = false;
  return sc;
}

std::vector<ResidualWindow> gaussian_corpus(int n, double mean, double sd, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ResidualWindow> out;
  for (int i = 0; i < n; ++i) {
    ResidualWindow w;
    w.values = Vec(8);
    for (int k = 0; k < 8; ++k) w.values(k) = mean + sd * gauss(rng);
    w.condition = {uniform01(rng), 3.0 + uniform01(rng)};
    out.push_back(w);
  }
  return out;
}

}  // namespace

TEST_CASE("residuals of a noiseless log are zero") {
  const auto log = sim::generate(quiet_scenario());
  const auto rs = extract_residuals(log);
  REQUIRE(!rs.empty());
  for (const auto& r : rs) CHECK(std::abs(r.epsilon) < 1e-9);
}

TEST_CASE("a constant NLOS bias shows up in the residuals") {
  auto sc = quiet_scenario();
  sc.channel.nlos_bias_mean = 0.5;
  sc.channel.nlos_prob_schedule = {{}, {}, {{0.0, 1.0}}, {}};
  const auto log = sim::generate(sc);
  const auto rs = extract_residuals(log);
  int n2 = 0;
  for (const auto& r : rs) {
    if (r.anchor == 2) {
      ++n2;
      CHECK(r.epsilon == doctest::Approx(0.5).epsilon(1e-9));
    } else {
      CHECK(std::abs(r.epsilon) < 1e-9);
    }
  }
  CHECK(n2 > 0);
}

TEST_CASE("one residual per valid measurement") {
  auto sc = sim::reference_scenario(3);
  const auto log = sim::generate(sc);
  const auto rs = extract_residuals(log);
  const auto valid = std::count_if(log.uwb.begin(), log.uwb.end(), [](const auto& r) { return r.valid; });
  CHECK(static_cast<long>(rs.size()) == valid);
  for (const auto& r : rs) {
    CHECK(std::isfinite(r.epsilon));
    CHECK(r.condition(1) >= 1.0);
    CHECK(r.condition(0) >= 0.0);
  }
  auto no_truth = log;
  no_truth.truth.clear();
  CHECK_THROWS_AS(extract_residuals(no_truth), Error);
  const auto back = residuals_from_jsonl(residuals_to_jsonl(rs));
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(back[i].epsilon == rs[i].epsilon);
    CHECK(back[i].condition == rs[i].condition);
  }
}

TEST_CASE("residual windows are consecutive runs of one anchor") {
  std::vector<ResidualRecord> rs;
  for (int k = 0; k < 20; ++k) {
    if (k == 9) continue;
    rs.push_back({0.05 * k + 0.001, 1, 0.01 * k, {1.0, 4.0}});
  }
  const auto ws = residual_windows(rs, 4);
  // Runs [0..8] and [10..19] give 2 + 2 windows.
  REQUIRE(ws.size() == 4);
  CHECK(ws[0].values(0) == doctest::Approx(0.0));
  CHECK(ws[2].values(0) == doctest::Approx(0.10));
  for (const auto& w : ws) CHECK(w.condition == Eigen::Vector2d(1.0, 4.0));
}

TEST_CASE("zero denoiser sampling matches the schedule variance") {
  DiffusionModel m(DiffusionConfig{}, 1);
  m.zero_denoiser = true;
  m.cond_scale = Eigen::Vector2d::Ones();
  Rng rng(5);
  const Mat x = sample_residuals(m, Mat::Zero(2, 1250), rng);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
  CHECK(x.size() == 10000);
  CHECK(var == doctest::Approx(zero_denoiser_variance(m)).epsilon(0.10));
}

TEST_CASE("denoiser loss gradient check") {
  DiffusionConfig c;
  c.hidden = 6;
  c.steps = 10;
  DiffusionModel m(c, 2);
  Rng rng(3);
  Mat x0(8, 5), noise(8, 5), cond(2, 5);
  for (int i = 0; i < x0.size(); ++i) {
    x0.data()[i] = gauss(rng);
    noise.data()[i] = gauss(rng);
  }
  for (int i = 0; i < cond.size(); ++i) cond.data()[i] = uniform01(rng);
  const std::vector<int> k{0, 3, 9, 5, 1};
  const auto r = nn::grad_check(m.ps, [&](bool with_grad) {
    nn::Graph g;
    const auto l = denoiser_loss(g, m, x0, cond, k, noise);
    if (with_grad) g.backward(l);
    return g.scalar(l);
  });
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("trained sampler recovers the corpus mean") {
  DiffusionConfig c;
  c.train_iters = 600;
  DiffusionModel m(c, 7);
  const auto corpus = gaussian_corpus(400, 2.0, 0.1, 9);
  const auto losses = train_diffusion(m, corpus, 11);
  CHECK(losses.back() < losses.front());
  Rng rng(12);
  Mat cond(2, 125);
  for (int j = 0; j < 125; ++j) cond.col(j) = corpus[static_cast<std::size_t>(j)].condition;
  const Mat x = sample_residuals(m, cond, rng);
  CHECK(x.allFinite());
  CHECK(std::abs(x.mean() - 2.0) < 0.3);

  Rng r1(4), r2(4);
  CHECK(sample_residuals(m, cond, r1) == sample_residuals(m, cond, r2));
  const DiffusionModel back = diffusion_from_checkpoint(nn::checkpoint_from_json(nn::to_json(to_checkpoint(m, 7))));
  Rng r3(4);
  Rng r4(4);
  CHECK(sample_residuals(back, cond, r3) == sample_residuals(m, cond, r4));
}

TEST_CASE("KS distance basics") {
  CHECK(ks_distance({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_distance({1, 2, 3}, {4, 5}) == 1.0);
  CHECK(ks_distance({0, 1}, {0.5}) == doctest::Approx(0.5));
  CHECK(ks_distance({1, 1, 2}, {1, 2, 2}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("generator ranking on a skewed corpus") {
  Rng rng(6);
  std::vector<double> corpus;
  for (int i = 0; i < 4000; ++i) corpus.push_back(uniform01(rng) < 0.8 ? 0.05 * gauss(rng) : 0.5 + 0.3 * gauss(rng));
  const auto scores = compare_generators(corpus, {gaussian_fit(corpus), bootstrap(corpus), constant(0.0)}, 4000, 1);
  REQUIRE(scores.size() == 3);
  CHECK(scores[1].ks < scores[0].ks);
  CHECK(scores[2].ks >= scores[1].ks);
  CHECK(scores[1].d_mean < 0.02);
  CHECK(scores[1].d_median < 0.02);
  CHECK_THROWS_AS(compare_generators(corpus, {bootstrap(corpus)}, 10, 1), Error);
}

TEST_CASE("identical distributions have near-zero deviations") {
  Rng rng(8);
  std::vector<double> a(20000);
  for (auto& v : a) v = gauss(rng);
  const auto s = compare_generators(a, {gaussian_fit(a), bootstrap(a)}, 20000, 3);
  for (const auto& g : s) {
    CHECK(g.ks < 0.02);
    CHECK(g.d_mean < 0.03);
    CHECK(g.d_p95 < 0.06);
  }
}

TEST_CASE("mixing examples") {
  const auto s = testing::toy_series(64, 4, 2);
  const auto w = dataset::window(s, 0, 64);
  Rng rng(1);
  const auto fake = [](int, Rng&) { return 0.0; };
  const auto same = mix_and_inject(w, fake, 0.0, 0.1, rng);
  CHECK(same.D == w.D);
  const auto full = mix_and_inject(w, fake, 1.0, 1.0, rng);
  for (int t = 0; t < 64; ++t)
    for (int a = 0; a < 4; ++a) {
      if (w.M(t, a) == 1.0) CHECK(std::abs(full.D(t, a) - w.R(t, a)) < 1e-12);
      else CHECK(full.D(t, a) == w.D(t, a));
    }
  auto no_truth = w;
  no_truth.R.resize(0, 0);
  CHECK_THROWS_AS(mix_and_inject(no_truth, fake, 0.5, 0.1, rng), Error);
}

TEST_CASE("mixing selects ceil(frac * valid) points and preserves the rest") {
  const auto s = testing::toy_series(64, 4, 5, 0.4);
  const auto w = dataset::window(s, 0, 64);
  const int valid = static_cast<int>(w.M.sum());
  Rng rng(2);
  const auto fake = [](int, Rng& r) { return 3.0 + gauss(r); };
  const auto out = mix_and_inject(w, fake, 0.5, 0.1, rng);
  int changed = 0;
  for (int t = 0; t < 64; ++t)
    for (int a = 0; a < 4; ++a) changed += out.D(t, a) != w.D(t, a);
  CHECK(changed == static_cast<int>(std::ceil(0.1 * valid)));
  CHECK(out.M == w.M);
  CHECK(out.tau == w.tau);
  CHECK(out.U == w.U);
  CHECK(out.P == w.P);
}
