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

#include "aoifuse/nn/layers.hpp"

#include <cmath>

namespace aoif::nn {

Mat uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  Mat m(rows, cols);
  // Row-major fill order so initialisation does not depend on storage order.
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = (2.0 * uniform01(rng) - 1.0) * k;
  return m;
}

Dense make_dense(ParamSet& ps, const std::string& name, int in, int out, Rng& rng) {
  require(in > 0 && out > 0, ErrorCode::kInvalidArgument, "dense layer sizes must be > 0");
  Dense d;
  d.in = in;
  d.out = out;
  d.w = &ps.add(name + ".w", uniform_init(out, in, in, rng));
  d.b = &ps.add(name + ".b", Mat::Zero(out, 1));
  return d;
}

Var forward(Graph& g, const Dense& d, Var x) { return g.affine(g.param(*d.w), x, g.param(*d.b)); }

Mlp make_mlp(ParamSet& ps, const std::string& name, const std::vector<int>& sizes, Rng& rng) {
  require(sizes.size() >= 2, ErrorCode::kInvalidArgument, "MLP needs at least input and output sizes");
  Mlp m;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    m.layers.push_back(make_dense(ps, name + "." + std::to_string(i), sizes[i], sizes[i + 1], rng));
  return m;
}

Var forward(Graph& g, const Mlp& m, Var x) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    x = forward(g, m.layers[i], x);
    if (i + 1 < m.layers.size()) x = g.tanh(x);
  }
  return x;
}

Lstm make_lstm(ParamSet& ps, const std::string& name, int in, int hidden, Rng& rng) {
  require(in > 0 && hidden > 0, ErrorCode::kInvalidArgument, "LSTM sizes must be > 0");
  Lstm l;
  l.in = in;
  l.hidden = hidden;
  l.wx = &ps.add(name + ".wx", uniform_init(4 * hidden, in, in, rng));
  l.wh = &ps.add(name + ".wh", uniform_init(4 * hidden, hidden, hidden, rng));
  Mat b = Mat::Zero(4 * hidden, 1);
  b.middleRows(hidden, hidden).setOnes();
  l.b = &ps.add(name + ".b", b);
  return l;
}

LstmVars bind(Graph& g, const Lstm& l) { return {g.param(*l.wx), g.param(*l.wh), g.param(*l.b)}; }

std::pair<Var, Var> lstm_step(Graph& g, const LstmVars& l, Var x, Var h, Var c) {
  const Var gates = g.add(g.affine(l.wx, x, l.b), g.matmul(l.wh, h));
  const Var c2 = g.lstm_cell(gates, c);
  const Var h2 = g.lstm_hidden(gates, c2);
  return {h2, c2};
}

LstmOut lstm_step(const Vec& x, const Vec& h, const Vec& c, const Mat& wx, const Mat& wh, const Vec& b) {
  const auto n = h.size();
  if (wx.rows() != 4 * n || wx.cols() != x.size() || wh.rows() != 4 * n || wh.cols() != n || b.size() != 4 * n ||
      c.size() != n)
    fail(ErrorCode::kDimensionMismatch, "lstm_step: dimension mismatch");
  const Vec z = wx * x + wh * h + b;
  const Vec i = sigmoid(Mat(z.segment(0, n)));
  const Vec f = sigmoid(Mat(z.segment(n, n)));
  const Vec gg = z.segment(2 * n, n).array().tanh().matrix();
  const Vec o = sigmoid(Mat(z.segment(3 * n, n)));
  LstmOut out;
  out.c = f.cwiseProduct(c) + i.cwiseProduct(gg);
  out.h = o.cwiseProduct(out.c.array().tanh().matrix());
  return out;
}

double huber(double e, double delta, double* grad) {
  require(delta > 0.0, ErrorCode::kInvalidArgument, "huber threshold must be > 0");
  const double a = std::abs(e);
  if (grad) *grad = std::clamp(e, -delta, delta);
  return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

Var huber_mean(Graph& g, Var e, double delta) {
  const Mat& E = g.value(e);
  Mat out(1, 1);
  double s = 0.0;
  for (Eigen::Index i = 0; i < E.size(); ++i) s += huber(E.data()[i], delta);
  const double n = static_cast<double>(E.size());
  out(0, 0) = s / n;
  return g.custom(std::move(out), {e}, [&g, e, delta, n](const Mat& go) {
    const Mat d = g.value(e).unaryExpr([delta](double v) { return std::clamp(v, -delta, delta); });
    g.accumulate(e, d * (go(0, 0) / n));
  }, "huber_mean");
}

double wmse(const Mat& pred, const Mat& truth, const Vec3& w) {
  if (pred.rows() != 3 || truth.rows() != 3 || pred.cols() != truth.cols() || pred.cols() == 0)
    fail(ErrorCode::kDimensionMismatch, "wmse: expected matching 3 x N inputs");
  require((w.array() > 0.0).all(), ErrorCode::kInvalidArgument, "wmse weights must be > 0");
  const Mat d = pred - truth;
  return (d.array().square().colwise() * w.array()).sum() / static_cast<double>(pred.cols());
}

Var wmse(Graph& g, Var pred, const Mat& truth, const Vec3& w) {
  Mat out(1, 1);
  out(0, 0) = wmse(g.value(pred), truth, w);
  return g.custom(std::move(out), {pred}, [&g, pred, truth, w](const Mat& go) {
    const Mat d = g.value(pred) - truth;
    const double k = 2.0 * go(0, 0) / static_cast<double>(d.cols());
    g.accumulate(pred, ((d.array().colwise() * w.array()) * k).matrix());
  }, "wmse");
}

}  // namespace aoif::nn
