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

#include "aoifuse/logio.hpp"

#include <sstream>

#include "aoifuse/jsonutil.hpp"

namespace aoif::logio {
namespace {

using json::append17;
using json::Json;

void put_vec(std::string& s, const Vec3& v) {
  s += '[';
  append17(s, v.x());
  s += ',';
  append17(s, v.y());
  s += ',';
  append17(s, v.z());
  s += ']';
}

template <typename F>
void for_each_line(const std::string& text, F&& f) {
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++lineno;
    if (end > pos) {
      const std::string line = text.substr(pos, end - pos);
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        Json j;
        try {
          j = Json::parse(line);
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorCode::kParse, "line " + std::to_string(lineno) + ": " + e.what());
        }
        f(j);
      }
    }
    pos = end + 1;
  }
}

void check_increasing(double prev, double t, const char* stream) {
  if (!(t > prev)) fail(ErrorCode::kParse, std::string("timestamps not strictly increasing in ") + stream + " stream");
}

}  // namespace

std::string to_jsonl(const sim::MeasurementLog& log) {
  std::string s;
  s.reserve(200 * (log.imu.size() + log.truth.size() + log.uwb.size() + log.ref.size()) + 1024);
  s += "{\"kind\":\"meta\",\"anchors\":[";
  for (std::size_t i = 0; i < log.anchors.size(); ++i) {
    if (i) s += ',';
    put_vec(s, log.anchors[i]);
  }
  s += "],\"imu_rate\":";
  append17(s, log.imu_rate);
  s += ",\"uwb_rate\":";
  append17(s, log.uwb_rate);
  s += ",\"ref_rate\":";
  append17(s, log.ref_rate);
  s += ",\"seed\":" + std::to_string(log.seed) + ",\"mount\":[";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      if (r || c) s += ',';
      append17(s, log.mount(r, c));
    }
  s += "]}\n";
  for (const auto& m : log.imu) {
    s += "{\"kind\":\"imu\",\"t\":";
    append17(s, m.t);
    s += ",\"accel\":";
    put_vec(s, m.accel);
    s += ",\"gyro\":";
    put_vec(s, m.gyro);
    s += "}\n";
  }
  for (const auto& r : log.uwb) {
    s += "{\"kind\":\"uwb\",\"t\":";
    append17(s, r.t);
    s += ",\"anchor\":" + std::to_string(r.anchor) + ",\"range\":";
    append17(s, r.range);
    s += r.valid ? ",\"valid\":true}\n" : ",\"valid\":false}\n";
  }
  for (const auto& r : log.ref) {
    s += "{\"kind\":\"ref\",\"t\":";
    append17(s, r.t);
    s += ",\"position\":";
    put_vec(s, r.position);
    s += "}\n";
  }
  for (const auto& r : log.truth) {
    s += "{\"kind\":\"truth\",\"t\":";
    append17(s, r.t);
    s += ",\"position\":";
    put_vec(s, r.position);
    s += ",\"velocity\":";
    put_vec(s, r.velocity);
    s += ",\"acceleration\":";
    put_vec(s, r.acceleration);
    s += "}\n";
  }
  return s;
}

sim::MeasurementLog from_jsonl(const std::string& text) {
  sim::MeasurementLog log;
  bool have_meta = false;
  for_each_line(text, [&](const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "meta") {
      have_meta = true;
      log.anchors.clear();
      for (const auto& a : j.at("anchors")) log.anchors.push_back(json::vec3(a));
      log.imu_rate = j.at("imu_rate").get<double>();
      log.uwb_rate = j.at("uwb_rate").get<double>();
      log.ref_rate = j.at("ref_rate").get<double>();
      log.seed = j.at("seed").get<std::uint64_t>();
      const auto& m = j.at("mount");
      require(m.size() == 9, ErrorCode::kParse, "mount must have 9 entries");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) log.mount(r, c) = m[r * 3 + c].get<double>();
    } else if (kind == "imu") {
      sim::ImuSample s{j.at("t").get<double>(), json::vec3(j.at("accel")), json::vec3(j.at("gyro"))};
      if (!log.imu.empty()) check_increasing(log.imu.back().t, s.t, "imu");
      log.imu.push_back(s);
    } else if (kind == "uwb") {
      sim::UwbRecord r{j.at("t").get<double>(), j.at("anchor").get<int>(), j.at("range").get<double>(),
                       j.at("valid").get<bool>()};
      if (!log.uwb.empty()) check_increasing(log.uwb.back().t, r.t, "uwb");
      log.uwb.push_back(r);
    } else if (kind == "ref") {
      sim::RefSample r{j.at("t").get<double>(), json::vec3(j.at("position"))};
      if (!log.ref.empty()) check_increasing(log.ref.back().t, r.t, "ref");
      log.ref.push_back(r);
    } else if (kind == "truth") {
      sim::TruthSample r{j.at("t").get<double>(), json::vec3(j.at("position")), json::vec3(j.at("velocity")),
                         json::vec3(j.at("acceleration"))};
      if (!log.truth.empty()) check_increasing(log.truth.back().t, r.t, "truth");
      log.truth.push_back(r);
    } else {
      fail(ErrorCode::kParse, "unknown record kind '" + kind + "'");
    }
  });
  require(have_meta, ErrorCode::kParse, "log has no meta record");
  for (const auto& r : log.uwb)
    require(r.anchor >= 0 && static_cast<std::size_t>(r.anchor) < log.anchors.size(), ErrorCode::kParse,
            "uwb record references an unknown anchor");
  return log;
}

void write_log(const std::string& path, const sim::MeasurementLog& log) { json::write_file(path, to_jsonl(log)); }

sim::MeasurementLog read_log(const std::string& path) { return from_jsonl(json::read_file(path)); }

std::string trajectory_to_jsonl(const EstTrajectory& traj, const std::string& method) {
  std::string s;
  for (const auto& tp : traj) {
    s += "{\"kind\":\"estimate\",\"method\":\"" + method + "\",\"t\":";
    append17(s, tp.t);
    s += ",\"position\":";
    put_vec(s, tp.p);
    s += "}\n";
  }
  return s;
}

EstTrajectory trajectory_from_jsonl(const std::string& text) {
  EstTrajectory out;
  for_each_line(text, [&](const Json& j) {
    if (j.value("kind", std::string("estimate")) != "estimate") return;
    out.push_back({j.at("t").get<double>(), json::vec3(j.at("position"))});
  });
  return out;
}

}  // namespace aoif::logio
