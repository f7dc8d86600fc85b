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

#include "aoifuse/jsonutil.hpp"

#include <cmath>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace aoif::json {

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("JSON parse error: ") + e.what());
  }
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
  require(j.is_object(), ErrorCode::kParse, where);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) fail(ErrorCode::kParse, std::string("unknown key '") + it.key() + "' in " + where);
  }
}

Vec3 vec3(const Json& j) {
  require(j.is_array() && j.size() == 3, ErrorCode::kParse, "expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json from_vec3(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

std::string fmt17(double v) {
  std::string s;
  append17(s, v);
  return s;
}

// Negative zero is written as 0 (the parser would read "-0" back as an
// integer) and non-finite values as null.
void append17(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v + 0.0);
  out.append(buf, static_cast<std::size_t>(n));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out << content;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path);
}

}  // namespace aoif::json
