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

#ifndef AOIFUSE_JSONUTIL_HPP_
#define AOIFUSE_JSONUTIL_HPP_

#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoifuse/common.hpp"

namespace aoif::json {

using Json = nlohmann::json;

Json parse(const std::string& text);
// Rejects any key of `j` not in `allowed`.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where);
Vec3 vec3(const Json& j);
Json from_vec3(const Vec3& v);

// %.17g; round-trips every finite double.
std::string fmt17(double v);
void append17(std::string& out, double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace aoif::json

#endif  // AOIFUSE_JSONUTIL_HPP_
