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

// Dense, MLP and LSTM building blocks plus the Huber and weighted MSE losses.

#ifndef AOIFUSE_NN_LAYERS_HPP_
#define AOIFUSE_NN_LAYERS_HPP_

#include <string>
#include <vector>

#include "aoifuse/nn/graph.hpp"

namespace aoif::nn {

// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
Mat uniform_init(int rows, int cols, int fan_in, Rng& rng);

struct Dense {
  Param* w = nullptr;  // out x in
  Param* b = nullptr;  // out x 1
  int in = 0;
  int out = 0;
};

Dense make_dense(ParamSet& ps, const std::string& name, int in, int out, Rng& rng);
Var forward(Graph& g, const Dense& d, Var x);

// Dense layers with tanh between them and a linear output.
struct Mlp {
  std::vector<Dense> layers;
};

Mlp make_mlp(ParamSet& ps, const std::string& name, const std::vector<int>& sizes, Rng& rng);
Var forward(Graph& g, const Mlp& m, Var x);

// Single-layer LSTM, gates stacked [input; forget; candidate; output].
struct Lstm {
  Param* wx = nullptr;  // 4H x in
  Param* wh = nullptr;  // 4H x H
  Param* b = nullptr;   // 4H x 1, forget slice initialised to 1
  int in = 0;
  int hidden = 0;
};

Lstm make_lstm(ParamSet& ps, const std::string& name, int in, int hidden, Rng& rng);

struct LstmVars {
  Var wx, wh, b;
};
LstmVars bind(Graph& g, const Lstm& l);

// One step on a batch: x (in x B), h and c (H x B). Returns {h', c'}.
std::pair<Var, Var> lstm_step(Graph& g, const LstmVars& l, Var x, Var h, Var c);

// Plain evaluation of one step on a single sample.
struct LstmOut {
  Vec h;
  Vec c;
};
LstmOut lstm_step(const Vec& x, const Vec& h, const Vec& c, const Mat& wx, const Mat& wh, const Vec& b);

// Huber value for one residual; *grad receives clip(e, -delta, delta).
double huber(double e, double delta, double* grad = nullptr);
// Mean Huber over all entries of e.
Var huber_mean(Graph& g, Var e, double delta);

// Batch mean over columns of sum_i w_i (pred_i - truth_i)^2, pred/truth 3 x N.
double wmse(const Mat& pred, const Mat& truth, const Vec3& w);
Var wmse(Graph& g, Var pred, const Mat& truth, const Vec3& w);

}  // namespace aoif::nn

#endif  // AOIFUSE_NN_LAYERS_HPP_
