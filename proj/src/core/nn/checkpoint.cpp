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

#include "aoifuse/nn/checkpoint.hpp"

namespace aoif::nn {

void capture(const ParamSet& ps, Checkpoint& ck) {
  for (const auto& p : ps) ck.tensors[p->name] = p->value;
}

void restore(const Checkpoint& ck, ParamSet& ps) {
  for (auto& p : ps) {
    const auto it = ck.tensors.find(p->name);
    if (it == ck.tensors.end()) fail(ErrorCode::kParse, "checkpoint lacks tensor '" + p->name + "'");
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      fail(ErrorCode::kDimensionMismatch, "checkpoint tensor '" + p->name + "' has the wrong shape");
    p->value = it->second;
  }
}

std::string to_json(const Checkpoint& ck) {
  json::Json j;
  j["format"] = "aoifuse-checkpoint";
  j["version"] = kCheckpointVersion;
  j["model"] = ck.model;
  j["config"] = ck.config;
  j["config_hash"] = ck.config_hash;
  j["seed"] = ck.seed;
  json::Json ts = json::Json::array();
  for (const auto& [name, m] : ck.tensors) {
    json::Json t;
    t["name"] = name;
    t["shape"] = {m.rows(), m.cols()};
    json::Json data = json::Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    t["data"] = std::move(data);
    ts.push_back(std::move(t));
  }
  j["tensors"] = std::move(ts);
  j["stats"] = ck.stats;
  j["meta"] = ck.meta;
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const json::Json j = json::parse(text);
  try {
    if (j.at("format").get<std::string>() != "aoifuse-checkpoint")
      fail(ErrorCode::kParse, "not an aoifuse checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      fail(ErrorCode::kParse, "unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.model = j.at("model").get<std::string>();
    ck.config = j.at("config");
    ck.config_hash = j.at("config_hash").get<std::string>();
    ck.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<Eigen::Index>();
      const auto cols = t.at("shape").at(1).get<Eigen::Index>();
      const auto& data = t.at("data");
      if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        fail(ErrorCode::kParse, "tensor data length does not match its shape");
      Mat m(rows, cols);
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
      ck.tensors[t.at("name").get<std::string>()] = std::move(m);
    }
    ck.stats = j.value("stats", json::Json::object());
    ck.meta = j.value("meta", json::Json::object());
    return ck;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
}

void save(const std::string& path, const Checkpoint& ck) { json::write_file(path, to_json(ck)); }

Checkpoint load(const std::string& path) { return checkpoint_from_json(json::read_file(path)); }

std::string config_hash(const json::Json& config) { return hex64(fnv1a64(config.dump())); }

}  // namespace aoif::nn
