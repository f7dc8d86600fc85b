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

#include "aoifuse/aoifuse.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "aoifuse/akf.hpp"
#include "aoifuse/eval.hpp"
#include "aoifuse/imuprep.hpp"
#include "aoifuse/jsonutil.hpp"
#include "aoifuse/logio.hpp"
#include "aoifuse/nn/checkpoint.hpp"
#include "aoifuse/pipeline.hpp"
#include "aoifuse/trilat.hpp"

struct aoif_log {
  aoif::sim::MeasurementLog log;
};

struct aoif_config {
  aoif::pipeline::RunConfig cfg;
};

namespace {

using aoif::ErrorCode;
using aoif::json::Json;
namespace pl = aoif::pipeline;

thread_local std::string g_last_error;

template <typename F>
aoif_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return AOIF_OK;
  } catch (const aoif::Error& e) {
    g_last_error = e.what();
    return static_cast<aoif_status>(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return AOIF_PARSE;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return AOIF_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AOIF_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return AOIF_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) aoif::fail(ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) aoif::fail(ErrorCode::kInternal, "out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const Json& j) {
  if (out) *out = dup(j.dump(1));
}

Json report_json(const aoif::eval::ErrorReport& r) {
  return {{"method", r.method}, {"rmse", r.rmse}, {"mae", r.mae}, {"p50", r.p50},
          {"p95", r.p95},       {"p99", r.p99},   {"n", r.per_step.size()}};
}

Json rows_json(const std::vector<aoif::eval::SeedReport>& rows) {
  Json a = Json::array();
  for (const auto& row : rows) {
    Json j = report_json(row.report);
    j["seed"] = row.seed;
    a.push_back(j);
  }
  return a;
}

int output_every(const aoif::sim::MeasurementLog& log) {
  return std::max(1, static_cast<int>(std::lround(log.imu_rate * 0.05)));
}

}  // namespace

extern "C" {

const char* aoif_version(void) { return "1.0.0"; }

const char* aoif_last_error(void) { return g_last_error.c_str(); }

const char* aoif_status_name(aoif_status status) { return aoif::error_code_name(static_cast<ErrorCode>(status)); }

void aoif_string_free(char* s) { std::free(s); }

aoif_status aoif_simulate(const char* scenario, uint64_t seed, aoif_log** out) {
  return guard([&] {
    need(out, "out");
    auto h = std::make_unique<aoif_log>();
    h->log = aoif::sim::generate(pl::resolve_scenario(scenario ? scenario : "reference", seed));
    *out = h.release();
  });
}

aoif_status aoif_log_read(const char* path, aoif_log** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<aoif_log>();
    h->log = aoif::logio::read_log(path);
    *out = h.release();
  });
}

aoif_status aoif_log_write(const aoif_log* log, const char* path) {
  return guard([&] {
    need(log, "log");
    need(path, "path");
    aoif::logio::write_log(path, log->log);
  });
}

aoif_status aoif_log_summary(const aoif_log* log, char** json_out) {
  return guard([&] {
    need(log, "log");
    const auto& l = log->log;
    std::size_t valid = 0;
    for (const auto& r : l.uwb) valid += r.valid ? 1 : 0;
    emit(json_out, {{"seed", l.seed},
                    {"anchors", l.anchors.size()},
                    {"imu_samples", l.imu.size()},
                    {"uwb_records", l.uwb.size()},
                    {"uwb_valid", valid},
                    {"truth_samples", l.truth.size()},
                    {"duration_s", l.t_end()},
                    {"digest", aoif::hex64(aoif::fnv1a64(aoif::logio::to_jsonl(l)))}});
  });
}

void aoif_log_free(aoif_log* log) { delete log; }

aoif_status aoif_trilaterate(const aoif_log* log, double window, const char* out_path, char** json_out) {
  return guard([&] {
    need(log, "log");
    std::optional<aoif::Vec3> start;
    if (!log->log.truth.empty()) start = pl::start_position(log->log);
    const auto fixes = aoif::trilat::trilaterate_log(log->log, window, start);
    if (out_path) aoif::json::write_file(out_path, aoif::trilat::fixes_to_jsonl(fixes));
    int determined = 0, converged = 0;
    for (const auto& f : fixes) {
      determined += (!f.fix.underdetermined && !f.fix.singular) ? 1 : 0;
      converged += f.fix.converged ? 1 : 0;
    }
    emit(json_out, {{"epochs", fixes.size()}, {"determined", determined}, {"converged", converged},
                    {"output", out_path ? out_path : ""}});
  });
}

aoif_status aoif_imu_integrate(const aoif_log* log, int bias_correct, const char* out_path, char** json_out) {
  return guard([&] {
    need(log, "log");
    const auto& l = log->log;
    const aoif::Vec3 p0 = pl::start_position(l);
    const auto bias = bias_correct ? aoif::dataset::fit_bias(l) : aoif::imuprep::BiasCorrection{};
    const auto ga = pl::global_accel(l, aoif::imuprep::BiasCorrection{});
    const auto run = aoif::imuprep::integrate_global(ga, 1.0 / l.imu_rate, bias);
    aoif::logio::EstTrajectory est;
    const int every = output_every(l);
    for (std::size_t k = 0; k + 1 < run.position.size(); k += static_cast<std::size_t>(every))
      est.push_back({l.imu[k].t, p0 + run.position[k]});
    if (out_path) aoif::json::write_file(out_path, aoif::logio::trajectory_to_jsonl(est, "imu"));
    const auto r = aoif::eval::error_stats("imu", est, l.truth);
    Json j = report_json(r);
    j["bias_a0"] = aoif::json::from_vec3(bias.a0);
    j["bias_a1"] = aoif::json::from_vec3(bias.a1);
    j["output"] = out_path ? out_path : "";
    emit(json_out, j);
  });
}

aoif_status aoif_fuse_akf(const aoif_log* log, double window, const char* out_path, char** json_out) {
  return guard([&] {
    need(log, "log");
    const auto& l = log->log;
    const aoif::Vec3 p0 = pl::start_position(l);
    const auto fixes = aoif::trilat::trilaterate_log(l, window, p0);
    std::vector<double> t_imu;
    for (const auto& m : l.imu) t_imu.push_back(m.t);
    const auto ga = pl::global_accel(l, aoif::dataset::fit_bias(l));
    const auto est = aoif::akf::run(t_imu, ga, fixes, aoif::akf::AkfConfig{}, output_every(l), p0);
    if (out_path) aoif::json::write_file(out_path, aoif::logio::trajectory_to_jsonl(est, "akf"));
    Json j = report_json(aoif::eval::error_stats("akf", est, l.truth));
    j["output"] = out_path ? out_path : "";
    emit(json_out, j);
  });
}

aoif_status aoif_config_default(aoif_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new aoif_config();
  });
}

aoif_status aoif_config_load(const char* path, aoif_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<aoif_config>();
    h->cfg = pl::load_run_config(path);
    *out = h.release();
  });
}

aoif_status aoif_config_set_output_dir(aoif_config* cfg, const char* dir) {
  return guard([&] {
    need(cfg, "cfg");
    need(dir, "dir");
    cfg->cfg.output_dir = dir;
  });
}

aoif_status aoif_config_set_threads(aoif_config* cfg, int threads) {
  return guard([&] {
    need(cfg, "cfg");
    aoif::require(threads >= 1, ErrorCode::kInvalidArgument, "threads must be >= 1");
    cfg->cfg.threads = threads;
  });
}

aoif_status aoif_config_set_seeds(aoif_config* cfg, const uint64_t* seeds, size_t n) {
  return guard([&] {
    need(cfg, "cfg");
    need(seeds, "seeds");
    cfg->cfg.seeds.assign(seeds, seeds + n);
  });
}

aoif_status aoif_config_set_methods(aoif_config* cfg, const char* methods) {
  return guard([&] {
    need(cfg, "cfg");
    need(methods, "methods");
    std::vector<std::string> v;
    std::string cur;
    for (const char* c = methods;; ++c) {
      if (*c == ',' || *c == '\0') {
        if (!cur.empty()) v.push_back(cur);
        cur.clear();
        if (*c == '\0') break;
      } else if (*c != ' ') {
        cur += *c;
      }
    }
    cfg->cfg.methods = v;
  });
}

aoif_status aoif_config_apply_env(aoif_config* cfg) {
  return guard([&] {
    need(cfg, "cfg");
    pl::apply_env(cfg->cfg);
  });
}

aoif_status aoif_config_validate(const aoif_config* cfg) {
  return guard([&] {
    need(cfg, "cfg");
    pl::validate(cfg->cfg);
  });
}

aoif_status aoif_config_to_json(const aoif_config* cfg, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    Json j = pl::to_json(cfg->cfg);
    j["config_hash"] = pl::config_hash(cfg->cfg);
    emit(json_out, j);
  });
}

const char* aoif_config_output_dir(const aoif_config* cfg) { return cfg ? cfg->cfg.output_dir.c_str() : ""; }

void aoif_config_free(aoif_config* cfg) { delete cfg; }

aoif_status aoif_train(const aoif_config* cfg, const char* method, uint64_t seed, int force, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(method, "method");
    pl::validate(cfg->cfg);
    pl::SeedRun run(cfg->cfg, seed, force != 0);
    const std::string m = method;
    aoif::nn::Checkpoint ck;
    std::string file;
    if (m == "bilstm") {
      ck = run.bilstm();
      file = "bilstm.ckpt.json";
    } else if (const auto v = pl::variant_of(m)) {
      ck = run.fusionnet(*v);
      file = v->name() + ".ckpt.json";
    } else {
      aoif::fail(ErrorCode::kInvalidArgument, "'" + m + "' is not a trainable method");
    }
    emit(json_out, {{"method", m},
                    {"seed", seed},
                    {"checkpoint", (run.dir() / file).string()},
                    {"config_hash", ck.config_hash},
                    {"meta", ck.meta}});
  });
}

aoif_status aoif_augment_train_generator(const aoif_config* cfg, uint64_t seed, int force, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    pl::validate(cfg->cfg);
    pl::SeedRun run(cfg->cfg, seed, force != 0);
    const auto ck = run.generator();
    emit(json_out, {{"seed", seed},
                    {"checkpoint", (run.dir() / "generator.ckpt.json").string()},
                    {"residuals", (run.dir() / "residuals.jsonl").string()},
                    {"meta", ck.meta}});
  });
}

aoif_status aoif_augment_compare(const aoif_config* cfg, int force, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    Json a = Json::array();
    for (const auto& [seed, scores] : pl::run_generator_comparison(cfg->cfg, force != 0))
      for (const auto& s : scores)
        a.push_back({{"seed", seed}, {"generator", s.name}, {"ks", s.ks}, {"d_p95", s.d_p95}, {"d_p99", s.d_p99}});
    emit(json_out, {{"scores", a}, {"output_dir", cfg->cfg.output_dir}});
  });
}

aoif_status aoif_evaluate(const aoif_config* cfg, int force, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    const auto res = pl::run_benchmark(cfg->cfg, force != 0);
    Json gates = Json::array();
    for (const auto& [seed, g] : res.gates)
      gates.push_back({{"seed", seed},
                       {"mean_alpha_lt3", g.mean_lt3},
                       {"mean_alpha_ge4", g.mean_ge4},
                       {"outage_at_alpha_min", g.outage_at_min}});
    emit(json_out, {{"rows", rows_json(res.rows)}, {"gates", gates}, {"output_dir", cfg->cfg.output_dir}});
  });
}

aoif_status aoif_ablate(const aoif_config* cfg, int force, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    Json a = Json::array();
    for (const auto& [seed, rows] : pl::run_ablation(cfg->cfg, force != 0))
      for (const auto& r : rows) {
        Json j = report_json(r.report);
        j["seed"] = seed;
        j["att"] = r.att;
        j["aoi"] = r.aoi;
        j["d_rmse"] = r.d_rmse;
        j["d_p95"] = r.d_p95;
        a.push_back(j);
      }
    emit(json_out, {{"rows", a}, {"output_dir", cfg->cfg.output_dir}});
  });
}

aoif_status aoif_report(const aoif_config* cfg, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    const auto rows = pl::write_report(cfg->cfg);
    emit(json_out, {{"rows", rows_json(rows)}, {"output_dir", cfg->cfg.output_dir}});
  });
}

aoif_status aoif_infer(const char* checkpoint_path, const aoif_log* log, const double* p_start, const char* out_path,
                       char** json_out) {
  return guard([&] {
    need(checkpoint_path, "checkpoint_path");
    need(log, "log");
    if (!std::filesystem::exists(checkpoint_path))
      aoif::fail(ErrorCode::kMissingCheckpoint, std::string("no checkpoint at ") + checkpoint_path);
    const auto ck = aoif::nn::load(checkpoint_path);
    const aoif::Vec3 p0 = p_start ? aoif::Vec3(p_start[0], p_start[1], p_start[2]) : pl::start_position(log->log);
    const auto est = pl::infer_log(ck, log->log, p0);
    if (out_path) aoif::json::write_file(out_path, aoif::logio::trajectory_to_jsonl(est, ck.model));
    Json j = {{"model", ck.model}, {"points", est.size()}, {"output", out_path ? out_path : ""}};
    if (!log->log.truth.empty() && !est.empty()) j["report"] = report_json(aoif::eval::error_stats(ck.model, est, log->log.truth));
    emit(json_out, j);
  });
}

aoif_status aoif_evaluate_estimates(const char* estimates_path, const aoif_log* log, const char* method,
                                    char** json_out) {
  return guard([&] {
    need(estimates_path, "estimates_path");
    need(log, "log");
    const auto est = aoif::logio::trajectory_from_jsonl(aoif::json::read_file(estimates_path));
    emit(json_out, report_json(aoif::eval::error_stats(method ? method : "estimate", est, log->log.truth)));
  });
}

aoif_status aoif_checkpoint_inspect(const char* path, char** json_out) {
  return guard([&] {
    need(path, "path");
    if (!std::filesystem::exists(path)) aoif::fail(ErrorCode::kMissingCheckpoint, std::string("no checkpoint at ") + path);
    const auto ck = aoif::nn::load(path);
    Json tensors = Json::array();
    long long params = 0;
    for (const auto& [name, m] : ck.tensors) {
      tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}});
      params += m.size();
    }
    Json stats = ck.stats;
    if (stats.contains("train_conditions")) stats["train_conditions"] = stats["train_conditions"].size();
    emit(json_out, {{"model", ck.model},
                    {"config", ck.config},
                    {"config_hash", ck.config_hash},
                    {"seed", ck.seed},
                    {"parameters", params},
                    {"tensors", tensors},
                    {"stats", stats},
                    {"meta", ck.meta}});
  });
}

}  // extern "C"
