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

#include "aoifuse/nn/optim.hpp"

#include <cmath>

namespace aoif::nn {

Adam::Adam(ParamSet& ps, const AdamConfig& cfg) : ps_(ps), cfg_(cfg) {
  require(cfg.lr > 0.0, ErrorCode::kInvalidArgument, "learning rate must be > 0");
  require(cfg.weight_decay >= 0.0, ErrorCode::kInvalidArgument, "weight decay must be >= 0");
  state_.lr = cfg.lr;
  state_.weight_decay = cfg.weight_decay;
  for (const auto& p : ps_) {
    state_.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    state_.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  require(state_.m.size() == ps_.size(), ErrorCode::kDimensionMismatch, "parameter set changed after optimizer creation");
  ++state_.step;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(state_.step));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(state_.step));
  std::size_t k = 0;
  for (auto& p : ps_) {
    Mat& m = state_.m[k];
    Mat& v = state_.v[k];
    ++k;
    if (p->frozen) continue;
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      fail(ErrorCode::kDimensionMismatch, "gradient shape differs from parameter " + p->name);
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p->grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p->grad.cwiseAbs2();
    if (state_.weight_decay > 0.0) p->value *= 1.0 - state_.lr * state_.weight_decay;
    p->value.array() -= state_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  }
}

}  // namespace aoif::nn
