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

#include <cstdlib>
#include <filesystem>

#include "aoifuse/logio.hpp"
#include "aoifuse/pipeline.hpp"
#include "doctest.h"

using namespace aoif;
using namespace aoif::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("aoifuse_unit_" + name);
  fs::remove_all(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

RunConfig classical(const fs::path& dir) {
  RunConfig c;
  c.seeds = {3};
  c.methods = {"uwb-only", "akf"};
  c.output_dir = dir.string();
  return c;
}

}  // namespace

TEST_CASE("run config patches sections over the defaults and rejects unknown keys") {
  const auto c = run_config_from_json(json::parse(R"({"seeds": [4, 5], "fusionnet": {"max_epochs": 7}})"));
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.fusionnet.max_epochs == 7);
  CHECK(c.fusionnet.model.hidden == RunConfig::desk_fusionnet().model.hidden);
  CHECK(code_of([] { run_config_from_json(json::parse(R"({"sedes": [1]})")); }) == ErrorCode::kParse);
  CHECK(code_of([] { run_config_from_json(json::parse(R"({"fusionnet": {"model": {"hiden": 3}}})")); }) ==
        ErrorCode::kParse);
  const auto back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("config hash ignores output location and thread count") {
  RunConfig a, b;
  b.output_dir = "elsewhere";
  b.threads = 4;
  CHECK(config_hash(a) == config_hash(b));
  b.block_len = 64;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("unknown method fails validation before any work") {
  const auto dir = fresh_dir("badmethod");
  auto c = classical(dir);
  c.methods = {"akf", "kalman"};
  CHECK(code_of([&] { run_benchmark(c, false); }) == ErrorCode::kInvalidArgument);
  CHECK(!fs::exists(dir / "seed_3"));
  c.methods = {"akf"};
  c.seeds = {};
  CHECK(code_of([&] { validate(c); }) == ErrorCode::kInvalidArgument);
  c.seeds = {1, 1};
  CHECK(code_of([&] { validate(c); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("environment overrides output directory and threads only") {
  RunConfig c;
  setenv("AOIFUSE_OUTPUT_DIR", "/tmp/aoifuse_env_dir", 1);
  setenv("AOIFUSE_THREADS", "3", 1);
  apply_env(c);
  CHECK(c.output_dir == "/tmp/aoifuse_env_dir");
  CHECK(c.threads == 3);
  setenv("AOIFUSE_THREADS", "zero", 1);
  CHECK(code_of([&] { apply_env(c); }) == ErrorCode::kInvalidArgument);
  unsetenv("AOIFUSE_OUTPUT_DIR");
  unsetenv("AOIFUSE_THREADS");
}

TEST_CASE("simulate stage writes a log that round-trips bitwise") {
  const auto dir = fresh_dir("simulate");
  SeedRun run(classical(dir), 3, false);
  const std::string text = logio::to_jsonl(run.log());
  CHECK(json::read_file((run.dir() / "log.jsonl").string()) == text);
  CHECK(logio::to_jsonl(logio::read_log((run.dir() / "log.jsonl").string())) == text);
  CHECK(logio::to_jsonl(sim::generate(sim::reference_scenario(3))) == text);
}

TEST_CASE("shipped scenario file reproduces the built-in reference scenario") {
  const std::string path = std::string(AOIFUSE_SOURCE_DIR) + "/data/reference_scenario.json";
  const auto a = logio::to_jsonl(sim::generate(resolve_scenario(path, 2)));
  const auto b = logio::to_jsonl(sim::generate(sim::reference_scenario(2)));
  CHECK(a == b);
}

TEST_CASE("completed stages are skipped unless forced") {
  const auto dir = fresh_dir("skip");
  const auto c = classical(dir);
  const auto first = run_benchmark(c, false);
  REQUIRE(first.rows.size() == 2);
  CHECK(first.rows[0].report.method == "uwb-only");
  CHECK(first.rows[1].report.method == "akf");
  CHECK(fs::exists(dir / "comparison.csv"));

  // A changed artifact is detected by its digest and regenerated.
  const auto report = dir / "seed_3" / "report_akf.json";
  const std::string original = json::read_file(report.string());
  json::write_file(report.string(), "{}");
  run_benchmark(c, false);
  CHECK(json::read_file(report.string()) == original);

  // A stage whose recorded digest matches is not rerun.
  const auto manifest_path = dir / "seed_3" / "manifest.json";
  auto manifest = json::parse(json::read_file(manifest_path.string()));
  const std::string marker = "{\"kind\":\"meta\",\"marker\":true}\n";
  const auto est = dir / "seed_3" / "est_akf.jsonl";
  json::write_file(est.string(), marker);
  manifest["stages"]["evaluate-akf"]["artifacts"]["est_akf.jsonl"] = hex64(fnv1a64(marker));
  json::write_file(manifest_path.string(), manifest.dump(1));
  const auto second = run_benchmark(c, false);
  CHECK(json::read_file(est.string()) == marker);
  CHECK(second.rows[1].report.rmse == first.rows[1].report.rmse);

  run_benchmark(c, true);
  CHECK(json::read_file(est.string()) != marker);
}

TEST_CASE("two runs of the same config give identical artifacts") {
  RunConfig c;
  c.seeds = {2};
  c.methods = {"uwb-only", "fusionnet"};
  c.fusionnet.model.hidden = 8;
  c.fusionnet.max_epochs = 2;
  c.fusionnet.warmup_epochs = 1;
  std::vector<std::vector<std::pair<std::string, std::string>>> digests;
  for (const char* name : {"det_a", "det_b"}) {
    const auto dir = fresh_dir(name);
    c.output_dir = dir.string();
    run_benchmark(c, false);
    SeedRun run(c, 2, false);
    digests.push_back(run.artifact_digests());
  }
  CHECK(digests[0].size() >= 8);
  CHECK(digests[0] == digests[1]);
  const auto tmp = fs::temp_directory_path();
  CHECK(json::read_file((tmp / "aoifuse_unit_det_a" / "comparison.csv").string()) ==
        json::read_file((tmp / "aoifuse_unit_det_b" / "comparison.csv").string()));
}

TEST_CASE("report rebuilds the comparison from per-seed reports") {
  const auto dir = fresh_dir("report");
  const auto c = classical(dir);
  const auto res = run_benchmark(c, false);
  const std::string csv = json::read_file((dir / "comparison.csv").string());
  fs::remove(dir / "comparison.csv");
  const auto rows = write_report(c);
  CHECK(rows.size() == res.rows.size());
  CHECK(json::read_file((dir / "comparison.csv").string()) == csv);
  fs::remove(dir / "seed_3" / "report_akf.json");
  CHECK(code_of([&] { write_report(c); }) == ErrorCode::kIo);
}

TEST_CASE("variant names map both ways") {
  for (const char* n : {"fusionnet", "fusionnet-dgan", "fusionnet-noatt", "fusionnet-noaoi", "fusionnet-noatt-noaoi"})
    CHECK(variant_of(n)->name() == n);
  CHECK(!variant_of("bilstm"));
}
