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

#include "aoifuse/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace aoif {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDegenerateExchange: return "degenerate-exchange";
    case ErrorCode::kSingularGeometry: return "singular-geometry";
    case ErrorCode::kIllConditioned: return "ill-conditioned";
    case ErrorCode::kSingularInnovation: return "singular-innovation-covariance";
    case ErrorCode::kInsufficientWindow: return "insufficient-window";
    case ErrorCode::kNonFinite: return "non-finite-value";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kEmptySplit: return "empty-split";
    case ErrorCode::kMissingTruth: return "missing-truth";
    case ErrorCode::kEmptyOverlap: return "empty-overlap";
    case ErrorCode::kRateMismatch: return "rate-mismatch";
    case ErrorCode::kMissingCheckpoint: return "missing-checkpoint";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kOutOfBounds: return "out-of-bounds";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) noexcept {
  return fnv1a64(s.data(), s.size());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double uniform01(Rng& rng) {
  // 53 random bits -> [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double gauss(Rng& rng) {
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-54;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), ErrorCode::kInvalidArgument, "percentile of an empty sample");
  require(q >= 0.0 && q <= 1.0, ErrorCode::kInvalidArgument, "percentile level must be in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

}  // namespace aoif
