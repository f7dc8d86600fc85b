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

#include "aoifuse/nn/gradcheck.hpp"

#include <cmath>

namespace aoif::nn {

GradCheckResult grad_check(ParamSet& ps, const std::function<double(bool)>& f, double h) {
  require(h > 0.0, ErrorCode::kInvalidArgument, "finite-difference step must be > 0");
  ps.zero_grad();
  f(true);
  GradCheckResult res;
  for (auto& p : ps) {
    if (p->frozen) continue;
    const Mat analytic = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double x0 = x;
      x = x0 + h;
      const double fp = f(false);
      x = x0 - h;
      const double fm = f(false);
      x = x0;
      const double num = (fp - fm) / (2.0 * h);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - num) / (std::abs(a) + std::abs(num) + 1e-12);
      ++res.checked;
      if (rel > res.max_rel_error || res.worst_index < 0) {
        res.max_rel_error = std::max(rel, res.max_rel_error);
        res.worst_param = p->name;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = num;
      }
    }
  }
  return res;
}

}  // namespace aoif::nn
