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

#ifndef AOIFUSE_COMMON_HPP_
#define AOIFUSE_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aoif {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rng = std::mt19937_64;

inline constexpr double kGravity = 9.81;
inline constexpr double kSpeedOfLight = 299792458.0;

// Error categories shared by the C++ core and the C API status codes.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kDegenerateExchange = 2,
  kSingularGeometry = 3,
  kIllConditioned = 4,
  kSingularInnovation = 5,
  kInsufficientWindow = 6,
  kNonFinite = 7,
  kDimensionMismatch = 8,
  kEmptySplit = 9,
  kMissingTruth = 10,
  kEmptyOverlap = 11,
  kRateMismatch = 12,
  kMissingCheckpoint = 13,
  kIo = 14,
  kParse = 15,
  kOutOfBounds = 16,
  kInternal = 99,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const char* what) {
  if (!cond) throw Error(code, what);
}

// 64-bit FNV-1a, used for config hashes and artifact digests.
std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t seed = 1469598103934665603ULL) noexcept;
std::uint64_t fnv1a64(const std::string& s) noexcept;
std::string hex64(std::uint64_t v);

// Standard normal draw from a 64-bit engine (Box-Muller on the engine's raw
// bits so results do not depend on the standard library's distributions).
double gauss(Rng& rng);
double uniform01(Rng& rng);

// Linear interpolation between order statistics of an ascending sample,
// q in [0, 1] (the "inclusive" convention).
double percentile_sorted(const std::vector<double>& sorted, double q);

}  // namespace aoif

#endif  // AOIFUSE_COMMON_HPP_
