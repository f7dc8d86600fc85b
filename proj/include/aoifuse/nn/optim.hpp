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

// Adam with optional decoupled weight decay (AdamW).

#ifndef AOIFUSE_NN_OPTIM_HPP_
#define AOIFUSE_NN_OPTIM_HPP_

#include <vector>

#include "aoifuse/nn/graph.hpp"

namespace aoif::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Applied multiplicatively, p <- p (1 - lr wd), before the moment step.
  double weight_decay = 0.0;
};

struct OptimState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  long step = 0;
  double lr = 0.0;
  double weight_decay = 0.0;
};

class Adam {
 public:
  Adam(ParamSet& ps, const AdamConfig& cfg);
  // Updates every non-frozen parameter from its accumulated gradient.
  void step();
  double lr() const { return state_.lr; }
  void set_lr(double lr) { state_.lr = lr; }
  const OptimState& state() const { return state_; }

 private:
  ParamSet& ps_;
  AdamConfig cfg_;
  OptimState state_;
};

}  // namespace aoif::nn

#endif  // AOIFUSE_NN_OPTIM_HPP_
