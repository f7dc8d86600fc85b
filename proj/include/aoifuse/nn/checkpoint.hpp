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

// Versioned JSON checkpoints: named row-major tensors with shapes, the model
// configuration and its hash, frozen normalisation statistics and free-form
// training metadata.
//
//   {"format": "aoifuse-checkpoint", "version": 1, "model": "...",
//    "config": {...}, "config_hash": "<16 hex>", "seed": n,
//    "tensors": [{"name": "...", "shape": [r, c], "data": [...]}, ...],
//    "stats": {...}, "meta": {...}}

#ifndef AOIFUSE_NN_CHECKPOINT_HPP_
#define AOIFUSE_NN_CHECKPOINT_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "aoifuse/jsonutil.hpp"
#include "aoifuse/nn/graph.hpp"

namespace aoif::nn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string model;
  json::Json config = json::Json::object();
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, Mat> tensors;
  json::Json stats = json::Json::object();
  json::Json meta = json::Json::object();
};

void capture(const ParamSet& ps, Checkpoint& ck);
// Copies tensors into same-named parameters; shapes must match.
void restore(const Checkpoint& ck, ParamSet& ps);

std::string to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);
void save(const std::string& path, const Checkpoint& ck);
Checkpoint load(const std::string& path);

// Hash over the canonical dump of a JSON value.
std::string config_hash(const json::Json& config);

}  // namespace aoif::nn

#endif  // AOIFUSE_NN_CHECKPOINT_HPP_
