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

#include "aoifuse/bilstm.hpp"
#include "aoifuse/nn/gradcheck.hpp"
#include "doctest.h"
#include "toy.hpp"

using namespace aoif;
using namespace aoif::bilstm;

namespace {

BilstmConfig tiny(int layers, int hidden) {
  BilstmConfig c;
  c.layers = layers;
  c.hidden = hidden;
  return c;
}

Mat random_features(int T, Rng& rng) {
  Mat f(T, 6);
  for (int i = 0; i < f.size(); ++i) f.data()[i] = gauss(rng);
  return f;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar loops over one sequence; x is T x in, returns T x H.
Mat reference_direction(const nn::Lstm& l, const Mat& x, bool reverse) {
  const int T = static_cast<int>(x.rows()), H = l.hidden;
  Mat out(T, H);
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (int i = 0; i < T; ++i) {
    const int t = reverse ? T - 1 - i : i;
    std::vector<double> hn(H), cn(H);
    for (int k = 0; k < H; ++k) {
      double z[4];
      for (int g = 0; g < 4; ++g) {
        double s = l.b->value(g * H + k, 0);
        for (int j = 0; j < x.cols(); ++j) s += l.wx->value(g * H + k, j) * x(t, j);
        for (int j = 0; j < H; ++j) s += l.wh->value(g * H + k, j) * h[j];
        z[g] = s;
      }
      cn[k] = sig(z[1]) * c[k] + sig(z[0]) * std::tanh(z[2]);
      hn[k] = sig(z[3]) * std::tanh(cn[k]);
    }
    h = hn;
    c = cn;
    for (int k = 0; k < H; ++k) out(t, k) = h[k];
  }
  return out;
}

}  // namespace

TEST_CASE("zero parameters give zero deltas") {
  Model m(tiny(2, 4), FeatureStats{}, 1);
  for (auto& p : m.ps) p->value.setZero();
  Rng rng(1);
  CHECK(bilstm_forward(m, random_features(10, rng)) == Mat::Zero(10, 3));
}

TEST_CASE("backward direction is the forward direction on reversed input") {
  Model a(tiny(1, 4), FeatureStats{}, 2);
  Model b(tiny(1, 4), FeatureStats{}, 2);
  auto& fa = a.layers[0].fwd;
  auto& ba = a.layers[0].bwd;
  auto& fb = b.layers[0].fwd;
  auto& bb = b.layers[0].bwd;
  fb.wx->value = ba.wx->value;
  fb.wh->value = ba.wh->value;
  fb.b->value = ba.b->value;
  for (auto* p : {fa.wx, fa.wh, fa.b, bb.wx, bb.wh, bb.b}) p->value.setZero();
  b.head.w->value.leftCols(4) = a.head.w->value.rightCols(4);
  b.head.w->value.rightCols(4) = a.head.w->value.leftCols(4);
  b.head.b->value = a.head.b->value;
  Rng rng(2);
  const Mat x = random_features(12, rng);
  const Mat y = bilstm_forward(a, x);
  const Mat yr = bilstm_forward(b, x.colwise().reverse());
  CHECK((yr.colwise().reverse() - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tiny stacked net matches a scalar reference") {
  Rng rng(3);
  FeatureStats st;
  for (int i = 0; i < 6; ++i) {
    st.mean(i) = gauss(rng);
    st.scale(i) = 0.5 + uniform01(rng);
  }
  Model m(tiny(2, 4), st, 4);
  const Mat raw = random_features(9, rng);
  Mat x(9, 6);
  for (int t = 0; t < 9; ++t)
    for (int i = 0; i < 6; ++i) x(t, i) = (raw(t, i) - st.mean(i)) / st.scale(i);
  for (const auto& d : m.layers) {
    Mat next(9, 8);
    next << reference_direction(d.fwd, x, false), reference_direction(d.bwd, x, true);
    x = next;
  }
  Mat want(9, 3);
  for (int t = 0; t < 9; ++t)
    for (int o = 0; o < 3; ++o) {
      double s = m.head.b->value(o, 0);
      for (int j = 0; j < 8; ++j) s += m.head.w->value(o, j) * x(t, j);
      want(t, o) = s;
    }
  CHECK((bilstm_forward(m, raw) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Bi-LSTM with weighted MSE passes the gradient check") {
  Model m(tiny(2, 4), FeatureStats{}, 5);
  Rng rng(6);
  const int T = 6, B = 2;
  Mat x(6, T * B), target(3, T * B);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng);
  for (int i = 0; i < target.size(); ++i) target.data()[i] = 0.3 * gauss(rng);
  const auto r = nn::grad_check(m.ps, [&](bool with_grad) {
    nn::Graph g;
    const auto l = nn::wmse(g, forward(g, m, g.input(x), T, B), target, Vec3(1, 1, 2));
    if (with_grad) g.backward(l);
    return g.scalar(l);
  });
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.checked == m.ps.scalar_count());
}

TEST_CASE("Bi-LSTM overfits a 20-window toy set") {
  const auto s = testing::toy_series(64 * 7, 3, 31);
  const dataset::Split sp = dataset::split_blocks(s.steps, 64, 1);
  BilstmConfig c = tiny(1, 12);
  c.window = 16;
  c.stride = 16;
  c.max_epochs = 200;
  c.patience = 1000;
  c.lr = 3e-3;
  const auto r = train(s, sp, c);
  CHECK(r.train_loss.back() < 0.1 * r.train_loss.front());
}

TEST_CASE("Bi-LSTM training is deterministic and leak-free") {
  auto s = testing::toy_series(128 * 10, 3, 8);
  const dataset::Split sp = dataset::split_blocks(s.steps, 128, 2);
  BilstmConfig c = tiny(2, 6);
  c.window = 16;
  c.stride = 16;
  c.max_epochs = 4;
  const auto a = train(s, sp, c);
  const auto b = train(s, sp, c);
  CHECK(nn::to_json(a.checkpoint) == nn::to_json(b.checkpoint));
  const FeatureStats st = compute_feature_stats(s, sp.train);
  for (const auto& r : sp.val)
    for (int k = r.begin; k < r.end; ++k) s.Fix.row(k).setConstant(1e3);
  const FeatureStats st2 = compute_feature_stats(s, sp.train);
  CHECK(st.mean == st2.mean);
  CHECK(st.scale == st2.scale);
  Model m = model_from_checkpoint(a.checkpoint);
  CHECK(m.cfg.layers == 2);
  const Mat p = infer_range(m, s, {0, 40}, Vec3(1, 2, 3), 16);
  CHECK(p.rows() == 41);
  CHECK(p.row(0) == Eigen::RowVector3d(1, 2, 3));
}
