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

// Central finite-difference gradient checker.

#ifndef AOIFUSE_NN_GRADCHECK_HPP_
#define AOIFUSE_NN_GRADCHECK_HPP_

#include <functional>
#include <string>

#include "aoifuse/nn/graph.hpp"

namespace aoif::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// f(true) evaluates the loss and back-propagates into the parameter grads;
// f(false) only evaluates. Every non-frozen coordinate is compared with
// (f(x + h e_i) - f(x - h e_i)) / 2h; the relative error of a coordinate is
// |a - n| / (|a| + |n| + 1e-12).
GradCheckResult grad_check(ParamSet& ps, const std::function<double(bool)>& f, double h = 1e-5);

}  // namespace aoif::nn

#endif  // AOIFUSE_NN_GRADCHECK_HPP_
