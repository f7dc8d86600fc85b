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

// Alternative double-sided two-way ranging.

#ifndef AOIFUSE_RANGING_HPP_
#define AOIFUSE_RANGING_HPP_

#include "aoifuse/common.hpp"

namespace aoif::ranging {

struct TwrExchange {
  double round_a = 0.0;  // s, round trip measured at A
  double round_b = 0.0;  // s, round trip measured at B
  double reply_a = 0.0;  // s, reply delay at A
  double reply_b = 0.0;  // s, reply delay at B
};

// True when all delays are positive and each round trip contains the
// peer's reply delay.
bool is_consistent(const TwrExchange& x);

// (Ra*Rb - Da*Db) / (2 (Ra + Da)). Zero is legal; a negative result or a
// non-positive denominator throws kDegenerateExchange.
double time_of_flight(const TwrExchange& x);

double range_from_tof(double tof, double c = kSpeedOfLight);

}  // namespace aoif::ranging

#endif  // AOIFUSE_RANGING_HPP_
