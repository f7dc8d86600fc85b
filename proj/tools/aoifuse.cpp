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

// aoifuse command-line front end over the C API.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aoifuse/aoifuse.h"

namespace {

struct Failure {
  aoif_status status;
};

void check(aoif_status st) {
  if (st != AOIF_OK) throw Failure{st};
}

void print_and_free(char* s) {
  if (s) {
    std::printf("%s\n", s);
    aoif_string_free(s);
  }
}

struct LogHandle {
  aoif_log* p = nullptr;
  ~LogHandle() { aoif_log_free(p); }
};

struct ConfigHandle {
  aoif_config* p = nullptr;
  ~ConfigHandle() { aoif_config_free(p); }
};

// Options shared by the pipeline subcommands.
struct RunOptions {
  std::string config;
  std::string output_dir;
  int threads = 0;
  std::string seeds;
  std::string methods;
  bool force = false;
};

void add_run_options(CLI::App* app, RunOptions& o, bool with_methods) {
  app->add_option("-c,--config", o.config, "Run config JSON (defaults: built-in desk configuration)")
      ->check(CLI::ExistingFile);
  app->add_option("--output-dir", o.output_dir, "Output directory (default: config value, then AOIFUSE_OUTPUT_DIR)");
  app->add_option("--threads", o.threads, "Seeds run in parallel (default: config value, then AOIFUSE_THREADS)")
      ->check(CLI::PositiveNumber);
  app->add_option("--seeds", o.seeds, "Comma-separated seed list (default: 1,2,3,4,5)");
  if (with_methods)
    app->add_option("--methods", o.methods,
                    "Comma-separated methods from uwb-only, akf, bilstm, fusionnet, fusionnet-dgan (default: all)");
  app->add_flag("--force", o.force, "Rerun stages whose artifacts are current");
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    const auto v = std::stoull(item, &pos);
    if (pos != item.size()) throw CLI::ValidationError("--seeds", "not an integer: " + item);
    out.push_back(v);
  }
  return out;
}

// Config file, then environment, then flags.
aoif_config* make_config(const RunOptions& o) {
  aoif_config* cfg = nullptr;
  check(o.config.empty() ? aoif_config_default(&cfg) : aoif_config_load(o.config.c_str(), &cfg));
  ConfigHandle h{cfg};
  check(aoif_config_apply_env(cfg));
  if (!o.output_dir.empty()) check(aoif_config_set_output_dir(cfg, o.output_dir.c_str()));
  if (o.threads > 0) check(aoif_config_set_threads(cfg, o.threads));
  if (!o.seeds.empty()) {
    const auto seeds = parse_seeds(o.seeds);
    check(aoif_config_set_seeds(cfg, seeds.data(), seeds.size()));
  }
  if (!o.methods.empty()) check(aoif_config_set_methods(cfg, o.methods.c_str()));
  check(aoif_config_validate(cfg));
  h.p = nullptr;
  return cfg;
}

std::string default_out(const std::string& output_dir, const std::string& file) {
  std::string dir = output_dir;
  if (dir.empty()) {
    ConfigHandle h;
    check(aoif_config_default(&h.p));
    check(aoif_config_apply_env(h.p));
    dir = aoif_config_output_dir(h.p);
  }
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / file).string();
}

std::string escaped(const char* s) {
  std::string out;
  for (const char* c = s; *c; ++c) {
    if (*c == '"' || *c == '\\') out += '\\';
    out += *c == '\n' ? ' ' : *c;
  }
  return out;
}

aoif_log* read_log(const std::string& path) {
  aoif_log* log = nullptr;
  check(aoif_log_read(path.c_str(), &log));
  return log;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AoIFuse: UWB/IMU fusion workbench"};
  app.set_version_flag("--version", aoif_version());
  app.require_subcommand(1);

  std::string output_dir;
  auto add_output_dir = [&](CLI::App* sub) {
    sub->add_option("--output-dir", output_dir, "Directory for default output paths (default: AOIFUSE_OUTPUT_DIR, then aoifuse_out)");
  };

  // simulate
  std::string scenario = "reference";
  std::uint64_t seed = 1;
  std::string out;
  auto* sim = app.add_subcommand("simulate", "Generate a measurement log from a scenario");
  sim->add_option("--scenario", scenario, "\"reference\" or a scenario JSON file")->capture_default_str();
  sim->add_option("--seed", seed, "Scenario seed")->capture_default_str();
  sim->add_option("-o,--out", out, "Output log (default: <output-dir>/log_seed<seed>.jsonl)");
  add_output_dir(sim);

  // trilaterate / imu-integrate / fuse-akf
  std::string log_path;
  double window = 0.05;
  bool no_bias = false;
  auto* tri = app.add_subcommand("trilaterate", "Multilaterate every UWB epoch of a log");
  tri->add_option("--log", log_path, "Measurement log")->required()->check(CLI::ExistingFile);
  tri->add_option("--window", window, "Epoch window in seconds")->capture_default_str();
  tri->add_option("-o,--out", out, "Output fixes (default: <output-dir>/fixes.jsonl)");
  add_output_dir(tri);

  auto* imu = app.add_subcommand("imu-integrate", "Dead-reckon the IMU stream from the known start");
  imu->add_option("--log", log_path, "Measurement log")->required()->check(CLI::ExistingFile);
  imu->add_flag("--no-bias-correction", no_bias, "Skip the first-order accelerometer bias fit");
  imu->add_option("-o,--out", out, "Output trajectory (default: <output-dir>/imu.jsonl)");
  add_output_dir(imu);

  auto* akf = app.add_subcommand("fuse-akf", "Adaptive Kalman filter over fixes and IMU");
  akf->add_option("--log", log_path, "Measurement log")->required()->check(CLI::ExistingFile);
  akf->add_option("--window", window, "Epoch window in seconds")->capture_default_str();
  akf->add_option("-o,--out", out, "Output trajectory (default: <output-dir>/akf.jsonl)");
  add_output_dir(akf);

  // train
  RunOptions ro;
  std::string method = "fusionnet";
  auto* train = app.add_subcommand("train", "Train one model for one seed");
  add_run_options(train, ro, false);
  train->add_option("--method", method,
                    "bilstm, fusionnet, fusionnet-dgan, fusionnet-noatt, fusionnet-noaoi or fusionnet-noatt-noaoi")
      ->capture_default_str();
  train->add_option("--seed", seed, "Seed")->capture_default_str();

  // infer
  std::string checkpoint;
  std::vector<double> start;
  auto* infer = app.add_subcommand("infer", "Chained trajectory inference with a checkpoint");
  infer->add_option("--checkpoint", checkpoint, "FusionNet or Bi-LSTM checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--log", log_path, "Measurement log")->required()->check(CLI::ExistingFile);
  infer->add_option("--start", start, "Start position x y z (default: first truth position)")->expected(3);
  infer->add_option("-o,--out", out, "Output trajectory (default: <output-dir>/infer.jsonl)");
  add_output_dir(infer);

  // augment
  auto* aug = app.add_subcommand("augment", "Residual generator training and comparison");
  aug->require_subcommand(1);
  auto* gen = aug->add_subcommand("train-generator", "Train the diffusion residual sampler for one seed");
  add_run_options(gen, ro, false);
  gen->add_option("--seed", seed, "Seed")->capture_default_str();
  auto* cmp = aug->add_subcommand("compare", "KS comparison of generators against held-out residuals");
  add_run_options(cmp, ro, false);

  // evaluate
  std::string estimates;
  auto* ev = app.add_subcommand("evaluate", "Benchmark the selected methods over all seeds, or score one estimate file");
  add_run_options(ev, ro, true);
  ev->add_option("--estimates", estimates, "Score this estimate file instead of running the benchmark")
      ->check(CLI::ExistingFile);
  ev->add_option("--log", log_path, "Log with truth, used with --estimates")->check(CLI::ExistingFile);
  ev->add_option("--method", method, "Method label, used with --estimates");

  auto* abl = app.add_subcommand("ablate", "Attention/AoI ablation over all seeds");
  add_run_options(abl, ro, false);

  auto* rep = app.add_subcommand("report", "Rebuild comparison tables and plot data from per-seed reports");
  add_run_options(rep, ro, true);

  auto* ckpt = app.add_subcommand("checkpoint", "Checkpoint utilities");
  ckpt->require_subcommand(1);
  auto* inspect = ckpt->add_subcommand("inspect", "Print a checkpoint's configuration, tensors and metadata");
  inspect->add_option("path", checkpoint, "Checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    char* res = nullptr;
    if (*sim) {
      LogHandle log;
      check(aoif_simulate(scenario.c_str(), seed, &log.p));
      if (out.empty()) out = default_out(output_dir, "log_seed" + std::to_string(seed) + ".jsonl");
      check(aoif_log_write(log.p, out.c_str()));
      check(aoif_log_summary(log.p, &res));
      std::printf("wrote %s\n", out.c_str());
    } else if (*tri) {
      LogHandle log{read_log(log_path)};
      if (out.empty()) out = default_out(output_dir, "fixes.jsonl");
      check(aoif_trilaterate(log.p, window, out.c_str(), &res));
    } else if (*imu) {
      LogHandle log{read_log(log_path)};
      if (out.empty()) out = default_out(output_dir, "imu.jsonl");
      check(aoif_imu_integrate(log.p, no_bias ? 0 : 1, out.c_str(), &res));
    } else if (*akf) {
      LogHandle log{read_log(log_path)};
      if (out.empty()) out = default_out(output_dir, "akf.jsonl");
      check(aoif_fuse_akf(log.p, window, out.c_str(), &res));
    } else if (*train) {
      ConfigHandle cfg{make_config(ro)};
      check(aoif_train(cfg.p, method.c_str(), seed, ro.force ? 1 : 0, &res));
    } else if (*infer) {
      LogHandle log{read_log(log_path)};
      if (out.empty()) out = default_out(output_dir, "infer.jsonl");
      check(aoif_infer(checkpoint.c_str(), log.p, start.empty() ? nullptr : start.data(), out.c_str(), &res));
    } else if (*gen) {
      ConfigHandle cfg{make_config(ro)};
      check(aoif_augment_train_generator(cfg.p, seed, ro.force ? 1 : 0, &res));
    } else if (*cmp) {
      ConfigHandle cfg{make_config(ro)};
      check(aoif_augment_compare(cfg.p, ro.force ? 1 : 0, &res));
    } else if (*ev) {
      if (!estimates.empty()) {
        if (log_path.empty()) throw CLI::RequiredError("--log");
        LogHandle log{read_log(log_path)};
        check(aoif_evaluate_estimates(estimates.c_str(), log.p, method.c_str(), &res));
      } else {
        ConfigHandle cfg{make_config(ro)};
        check(aoif_evaluate(cfg.p, ro.force ? 1 : 0, &res));
      }
    } else if (*abl) {
      ConfigHandle cfg{make_config(ro)};
      check(aoif_ablate(cfg.p, ro.force ? 1 : 0, &res));
    } else if (*rep) {
      ConfigHandle cfg{make_config(ro)};
      check(aoif_report(cfg.p, &res));
    } else if (*inspect) {
      check(aoif_checkpoint_inspect(checkpoint.c_str(), &res));
    }
    print_and_free(res);
  } catch (const Failure& f) {
    std::fprintf(stderr, "{\"error\": \"%s\", \"code\": %d, \"message\": \"%s\"}\n", aoif_status_name(f.status),
                 static_cast<int>(f.status), escaped(aoif_last_error()).c_str());
    return static_cast<int>(f.status);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "{\"error\": \"kInternal\", \"code\": 99, \"message\": \"%s\"}\n", escaped(e.what()).c_str());
    return 99;
  }
  return 0;
}
