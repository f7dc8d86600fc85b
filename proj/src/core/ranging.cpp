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

#include "aoifuse/ranging.hpp"

#include <cmath>

namespace aoif::ranging {

bool is_consistent(const TwrExchange& x) {
  return x.round_a > 0 && x.round_b > 0 && x.reply_a > 0 && x.reply_b > 0 && x.round_a > x.reply_b &&
         x.round_b > x.reply_a;
}

double time_of_flight(const TwrExchange& x) {
  const double den = 2.0 * (x.round_a + x.reply_a);
  if (!(den > 0.0) || !std::isfinite(den)) fail(ErrorCode::kDegenerateExchange, "non-positive TWR denominator");
  const double tof = (x.round_a * x.round_b - x.reply_a * x.reply_b) / den;
  if (!std::isfinite(tof)) fail(ErrorCode::kDegenerateExchange, "non-finite time of flight");
  if (tof < 0.0) fail(ErrorCode::kDegenerateExchange, "negative time of flight");
  return tof;
}

double range_from_tof(double tof, double c) {
  require(tof >= 0.0, ErrorCode::kInvalidArgument, "time of flight must be >= 0");
  return c * tof;
}

}  // namespace aoif::ranging
