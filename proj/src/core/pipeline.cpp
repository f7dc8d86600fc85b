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

#include "aoifuse/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "aoifuse/imuprep.hpp"
#include "aoifuse/logio.hpp"

namespace aoif::pipeline {
namespace fs = std::filesystem;
using dataset::Mat;
using json::Json;

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"uwb-only", "akf", "bilstm", "fusionnet", "fusionnet-dgan"};
  return names;
}

fusionnet::TrainConfig RunConfig::desk_fusionnet() {
  fusionnet::TrainConfig tc;
  tc.model.hidden = 32;
  return tc;
}

json::Json to_json(const RunConfig& c) {
  Json j;
  j["scenario"] = c.scenario;
  j["methods"] = c.methods;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["block_len"] = c.block_len;
  j["epoch_window"] = c.epoch_window;
  j["fusionnet"] = fusionnet::to_json(c.fusionnet);
  j["bilstm"] = bilstm::to_json(c.bilstm);
  j["diffusion"] = augment::to_json(c.diffusion);
  j["residual_pool"] = c.residual_pool;
  j["compare_samples"] = c.compare_samples;
  return j;
}

RunConfig run_config_from_json(const json::Json& j) {
  require(j.is_object(), ErrorCode::kParse, "run config must be a JSON object");
  json::check_keys(j,
                   {"scenario", "methods", "seeds", "output_dir", "threads", "block_len", "epoch_window", "fusionnet",
                    "bilstm", "diffusion", "residual_pool", "compare_samples"},
                   "run config");
  RunConfig c;
  try {
    c.scenario = j.value("scenario", c.scenario);
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.output_dir = j.value("output_dir", c.output_dir);
    c.threads = j.value("threads", c.threads);
    c.block_len = j.value("block_len", c.block_len);
    c.epoch_window = j.value("epoch_window", c.epoch_window);
    c.residual_pool = j.value("residual_pool", c.residual_pool);
    c.compare_samples = j.value("compare_samples", c.compare_samples);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("run config: ") + e.what());
  }
  auto patch = [&](const char* key, Json base) {
    if (j.contains(key)) {
      require(j[key].is_object(), ErrorCode::kParse, "config sections must be objects");
      base.merge_patch(j[key]);
    }
    return base;
  };
  c.fusionnet = fusionnet::train_config_from_json(patch("fusionnet", fusionnet::to_json(c.fusionnet)));
  c.bilstm = bilstm::bilstm_config_from_json(patch("bilstm", bilstm::to_json(c.bilstm)));
  c.diffusion = augment::diffusion_config_from_json(patch("diffusion", augment::to_json(c.diffusion)));
  return c;
}

RunConfig load_run_config(const std::string& path) { return run_config_from_json(json::parse(json::read_file(path))); }

std::string config_hash(const RunConfig& c) {
  Json j = to_json(c);
  j.erase("output_dir");
  j.erase("threads");
  return nn::config_hash(j);
}

void apply_env(RunConfig& c) {
  if (const char* dir = std::getenv("AOIFUSE_OUTPUT_DIR"); dir && *dir) c.output_dir = dir;
  if (const char* th = std::getenv("AOIFUSE_THREADS"); th && *th) {
    char* end = nullptr;
    const long v = std::strtol(th, &end, 10);
    require(end && *end == '\0' && v > 0, ErrorCode::kInvalidArgument, "AOIFUSE_THREADS must be a positive integer");
    c.threads = static_cast<int>(v);
  }
}

void validate(const RunConfig& c) {
  const auto& known = method_names();
  require(!c.methods.empty(), ErrorCode::kInvalidArgument, "no methods selected");
  std::set<std::string> seen_m;
  for (const auto& m : c.methods) {
    if (std::find(known.begin(), known.end(), m) == known.end())
      fail(ErrorCode::kInvalidArgument, "unknown method '" + m + "'");
    require(seen_m.insert(m).second, ErrorCode::kInvalidArgument, "duplicate method");
  }
  require(!c.seeds.empty(), ErrorCode::kInvalidArgument, "at least one seed is required");
  require(std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(),
          ErrorCode::kInvalidArgument, "duplicate seed");
  require(c.threads >= 1, ErrorCode::kInvalidArgument, "threads must be >= 1");
  require(c.block_len >= 1, ErrorCode::kInvalidArgument, "block_len must be >= 1");
  require(c.epoch_window > 0.0, ErrorCode::kInvalidArgument, "epoch_window must be > 0");
  require(c.residual_pool >= 1 && c.compare_samples >= 1, ErrorCode::kInvalidArgument,
          "sample counts must be >= 1");
  require(!c.output_dir.empty(), ErrorCode::kInvalidArgument, "empty output directory");
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  const fs::path probe = fs::path(c.output_dir) / ".write_probe";
  {
    std::ofstream f(probe);
    if (ec || !f) fail(ErrorCode::kIo, "output directory '" + c.output_dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

sim::Scenario resolve_scenario(const std::string& ref, std::uint64_t seed) {
  if (ref == "reference") return sim::reference_scenario(seed);
  auto sc = sim::scenario_from_json(json::read_file(ref));
  sc.seed = seed;
  return sc;
}

Vec3 start_position(const sim::MeasurementLog& log) {
  require(!log.truth.empty(), ErrorCode::kMissingTruth, "the known start needs truth");
  return log.truth.front().position;
}

std::vector<Vec3> global_accel(const sim::MeasurementLog& log, const imuprep::BiasCorrection& bias) {
  const auto acc = imuprep::accel_of(log);
  const Mat3 mount = log.mount;
  auto g = imuprep::to_global(acc, std::span<const Mat3>(&mount, 1));
  const double dt = 1.0 / log.imu_rate;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += bias.a0 + bias.a1 * (static_cast<double>(i) * dt);
  return g;
}

std::string Variant::name() const {
  if (dgan) return "fusionnet-dgan";
  std::string s = "fusionnet";
  if (!att) s += "-noatt";
  if (!aoi) s += "-noaoi";
  return s;
}

std::optional<Variant> variant_of(const std::string& method) {
  if (method == "fusionnet-dgan") return Variant{true, true, true};
  if (method == "fusionnet") return Variant{};
  if (method == "fusionnet-noatt") return Variant{false, true, false};
  if (method == "fusionnet-noaoi") return Variant{true, false, false};
  if (method == "fusionnet-noatt-noaoi") return Variant{false, false, false};
  return std::nullopt;
}

namespace {

std::string file_digest(const fs::path& p) { return hex64(fnv1a64(json::read_file(p.string()))); }

std::string key_of(const Json& parts) { return hex64(fnv1a64(parts.dump())); }

bool in_ranges(const std::vector<dataset::Range>& rs, int k) {
  for (const auto& r : rs)
    if (k >= r.begin && k < r.end) return true;
  return false;
}

// Estimate at time t covers the step ending at t.
int step_ending_at(double t, double dt) { return static_cast<int>(std::ceil(t / dt - 1e-9)) - 1; }

std::string estimates_file(const logio::EstTrajectory& est, const std::string& method, std::uint64_t seed,
                           const std::string& key) {
  std::string s = "{\"kind\":\"meta\",\"method\":\"" + method + "\",\"seed\":" + std::to_string(seed) +
                  ",\"stage_key\":\"" + key + "\"}\n";
  return s + logio::trajectory_to_jsonl(est, method);
}

}  // namespace

void write_report_file(const std::string& path, const eval::ErrorReport& r, std::uint64_t seed,
                       const std::string& key) {
  Json j;
  j["method"] = r.method;
  j["seed"] = seed;
  j["stage_key"] = key;
  j["rmse"] = r.rmse;
  j["mae"] = r.mae;
  j["p50"] = r.p50;
  j["p95"] = r.p95;
  j["p99"] = r.p99;
  j["t"] = r.t;
  j["errors"] = r.per_step;
  json::write_file(path, j.dump(1) + "\n");
}

eval::ErrorReport read_report(const std::string& path) {
  const Json j = json::parse(json::read_file(path));
  try {
    return eval::report_from_errors(j.at("method").get<std::string>(), j.at("t").get<std::vector<double>>(),
                                    j.at("errors").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
}

struct SeedRun::Impl {
  RunConfig cfg;
  bool force = false;
  std::uint64_t seed = 0;
  fs::path dir;
  Json manifest;
  std::set<std::string> done;

  std::optional<sim::MeasurementLog> log;
  std::optional<std::vector<trilat::EpochFix>> fixes;
  std::optional<dataset::Series> series;
  std::optional<dataset::Split> split;
  std::map<std::string, nn::Checkpoint> checkpoints;
  std::map<std::string, eval::ErrorReport> reports;
  std::optional<std::vector<augment::GeneratorScore>> scores;
  std::optional<eval::GateAnalysis> gate;

  fs::path path(const std::string& f) const { return dir / f; }

  std::string digest(const std::string& f) const { return file_digest(path(f)); }

  bool fresh(const std::string& stage, const std::string& key, const std::vector<std::string>& files) const {
    if (force) return false;
    if (!manifest.contains("stages") || !manifest["stages"].contains(stage)) return false;
    const auto& st = manifest["stages"][stage];
    if (st.value("key", std::string()) != key) return false;
    for (const auto& f : files) {
      if (!fs::exists(path(f))) return false;
      if (st["artifacts"].value(f, std::string()) != digest(f)) return false;
    }
    return true;
  }

  void record(const std::string& stage, const std::string& key, const std::vector<std::string>& files) {
    Json arts = Json::object();
    for (const auto& f : files) arts[f] = digest(f);
    manifest["stages"][stage] = {{"key", key}, {"artifacts", arts}};
    json::write_file(path("manifest.json").string(), manifest.dump(1) + "\n");
  }

  // Runs `produce` unless the stage is fresh; returns true when it ran.
  template <typename F>
  bool stage(const std::string& name, const std::string& key, const std::vector<std::string>& files, F&& produce) {
    if (done.count(name)) return false;
    done.insert(name);
    if (fresh(name, key, files)) return false;
    produce();
    record(name, key, files);
    return true;
  }
};

SeedRun::SeedRun(const RunConfig& cfg, std::uint64_t seed, bool force)
    : impl_(std::make_unique<Impl>()), seed_(seed), dir_(fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed))) {
  impl_->cfg = cfg;
  impl_->force = force;
  impl_->seed = seed;
  impl_->dir = dir_;
  fs::create_directories(dir_);
  const fs::path mf = dir_ / "manifest.json";
  if (fs::exists(mf)) {
    try {
      impl_->manifest = json::parse(json::read_file(mf.string()));
    } catch (const Error&) {
      impl_->manifest = Json::object();
    }
  }
  if (!impl_->manifest.is_object()) impl_->manifest = Json::object();
  impl_->manifest["config_hash"] = config_hash(cfg);
  impl_->manifest["seed"] = seed;
  if (!impl_->manifest.contains("stages")) impl_->manifest["stages"] = Json::object();
}

SeedRun::~SeedRun() = default;

const sim::MeasurementLog& SeedRun::log() {
  auto& I = *impl_;
  if (I.log) return *I.log;
  const auto sc = resolve_scenario(I.cfg.scenario, seed_);
  const std::string key = key_of({"simulate", sim::scenario_to_json(sc)});
  const bool ran = I.stage("simulate", key, {"log.jsonl"}, [&] {
    I.log = sim::generate(sc);
    logio::write_log(I.path("log.jsonl").string(), *I.log);
  });
  if (!ran) I.log = logio::read_log(I.path("log.jsonl").string());
  return *I.log;
}

const std::vector<trilat::EpochFix>& SeedRun::fixes() {
  auto& I = *impl_;
  if (I.fixes) return *I.fixes;
  const auto& lg = log();
  const std::string key = key_of({"trilaterate", I.digest("log.jsonl"), I.cfg.epoch_window});
  const bool ran = I.stage("trilaterate", key, {"fixes.jsonl"}, [&] {
    I.fixes = trilat::trilaterate_log(lg, I.cfg.epoch_window, start_position(lg));
    json::write_file(I.path("fixes.jsonl").string(), trilat::fixes_to_jsonl(*I.fixes));
  });
  if (!ran) I.fixes = trilat::fixes_from_jsonl(json::read_file(I.path("fixes.jsonl").string()));
  return *I.fixes;
}

const dataset::Series& SeedRun::series() {
  auto& I = *impl_;
  if (I.series) return *I.series;
  const auto& lg = log();
  dataset::AlignOptions opt;
  opt.bias = dataset::fit_bias(lg);
  opt.fix_fill = start_position(lg);
  I.series = dataset::align(lg, fixes(), opt);
  return *I.series;
}

const dataset::Split& SeedRun::split() {
  auto& I = *impl_;
  if (I.split) return *I.split;
  I.split = dataset::split_blocks(series().steps, I.cfg.block_len, seed_);
  Json j;
  j["block_len"] = I.split->block_len;
  j["assignment"] = I.split->assignment;
  auto ranges = [](const std::vector<dataset::Range>& rs) {
    Json a = Json::array();
    for (const auto& r : rs) a.push_back({r.begin, r.end});
    return a;
  };
  j["train"] = ranges(I.split->train);
  j["val"] = ranges(I.split->val);
  j["test"] = ranges(I.split->test);
  const std::string key = key_of({"split", I.digest("log.jsonl"), I.cfg.block_len, seed_});
  I.stage("split", key, {"split.json"}, [&] { json::write_file(I.path("split.json").string(), j.dump(1) + "\n"); });
  return *I.split;
}

nn::Checkpoint SeedRun::generator() {
  auto& I = *impl_;
  if (auto it = I.checkpoints.find("generator"); it != I.checkpoints.end()) return it->second;
  const auto& lg = log();
  const auto& sp = split();
  const std::string key =
      key_of({"train-generator", I.digest("log.jsonl"), I.cfg.block_len, augment::to_json(I.cfg.diffusion), seed_});
  const std::string file = "generator.ckpt.json";
  const bool ran = I.stage("train-generator", key, {file, "residuals.jsonl"}, [&] {
    const auto rs = augment::extract_residuals(lg, series().dt);
    json::write_file(I.path("residuals.jsonl").string(), augment::residuals_to_jsonl(rs));
    std::vector<augment::ResidualRecord> train;
    for (const auto& r : rs)
      if (in_ranges(sp.train, static_cast<int>(std::floor(r.t / series().dt)))) train.push_back(r);
    const auto corpus = augment::residual_windows(train, I.cfg.diffusion.length, series().dt);
    augment::DiffusionModel m(I.cfg.diffusion, seed_);
    augment::train_diffusion(m, corpus, seed_);
    auto ck = augment::to_checkpoint(m, seed_);
    ck.meta = {{"corpus_windows", corpus.size()}, {"stage_key", key}};
    nn::save(I.path(file).string(), ck);
    I.checkpoints["generator"] = ck;
  });
  if (!ran) I.checkpoints["generator"] = nn::load(I.path(file).string());
  return I.checkpoints["generator"];
}

std::vector<augment::GeneratorScore> SeedRun::compare_generators() {
  auto& I = *impl_;
  if (I.scores) return *I.scores;
  const auto ck = generator();
  const auto& sp = split();
  const std::string key = key_of({"compare-generators", I.digest("generator.ckpt.json"),
                                  I.digest("residuals.jsonl"), I.cfg.compare_samples, seed_});
  const bool ran = I.stage("compare-generators", key, {"generators.json", "generators.csv"}, [&] {
    const auto rs = augment::residuals_from_jsonl(json::read_file(I.path("residuals.jsonl").string()));
    std::vector<double> train, held_out;
    for (const auto& r : rs) {
      const int k = static_cast<int>(std::floor(r.t / series().dt));
      if (in_ranges(sp.train, k)) train.push_back(r.epsilon);
      if (in_ranges(sp.test, k)) held_out.push_back(r.epsilon);
    }
    const auto m = augment::diffusion_from_checkpoint(ck);
    const std::vector<augment::Generator> gens{augment::diffusion(m), augment::gaussian_fit(train),
                                               augment::bootstrap(train), augment::constant(0.0)};
    I.scores = augment::compare_generators(held_out, gens, static_cast<std::size_t>(I.cfg.compare_samples), seed_);
    Json arr = Json::array();
    std::string csv = "generator,ks,d_mean,d_median,d_p95,d_p99\n";
    for (const auto& s : *I.scores) {
      arr.push_back({{"name", s.name},
                     {"ks", s.ks},
                     {"d_mean", s.d_mean},
                     {"d_median", s.d_median},
                     {"d_p95", s.d_p95},
                     {"d_p99", s.d_p99}});
      csv += s.name;
      for (double v : {s.ks, s.d_mean, s.d_median, s.d_p95, s.d_p99}) csv += ',' + json::fmt17(v);
      csv += '\n';
    }
    json::write_file(I.path("generators.json").string(),
                     Json{{"seed", seed_}, {"held_out", held_out.size()}, {"scores", arr}}.dump(1) + "\n");
    json::write_file(I.path("generators.csv").string(), csv);
  });
  if (!ran) {
    const Json j = json::parse(json::read_file(I.path("generators.json").string()));
    std::vector<augment::GeneratorScore> v;
    for (const auto& s : j.at("scores"))
      v.push_back({s.at("name").get<std::string>(), s.at("ks").get<double>(), s.at("d_mean").get<double>(),
                   s.at("d_median").get<double>(), s.at("d_p95").get<double>(), s.at("d_p99").get<double>()});
    I.scores = v;
  }
  return *I.scores;
}

nn::Checkpoint SeedRun::fusionnet(const Variant& v) {
  auto& I = *impl_;
  const std::string name = v.name();
  if (auto it = I.checkpoints.find(name); it != I.checkpoints.end()) return it->second;
  const auto& lg = log();
  fusionnet::TrainConfig tc = I.cfg.fusionnet;
  tc.model.n_anchors = static_cast<int>(lg.anchors.size());
  tc.model.att = v.att;
  tc.model.aoi = v.aoi;
  tc.aug.enabled = v.dgan;
  tc.seed = seed_;
  Json parts = {"train", name, I.digest("log.jsonl"), I.digest("fixes.jsonl"), I.cfg.block_len,
                fusionnet::to_json(tc)};
  if (v.dgan) {
    generator();
    parts.push_back(I.digest("generator.ckpt.json"));
    parts.push_back(I.cfg.residual_pool);
  }
  fixes();
  const std::string key = key_of(parts);
  const std::string file = name + ".ckpt.json";
  const bool ran = I.stage("train-" + name, key, {file}, [&] {
    fusionnet::FakeResidualSource fake;
    if (v.dgan) {
      const auto m = augment::diffusion_from_checkpoint(I.checkpoints.at("generator"));
      Rng rng(seed_ * 0x9E3779B97F4A7C15ULL + 29);
      fake = augment::pool_source(augment::diffusion(m).sample(static_cast<std::size_t>(I.cfg.residual_pool), rng));
    }
    auto r = fusionnet::train(series(), split(), tc, fake);
    r.checkpoint.meta["stage_key"] = key;
    nn::save(I.path(file).string(), r.checkpoint);
    I.checkpoints[name] = r.checkpoint;
  });
  if (!ran) I.checkpoints[name] = nn::load(I.path(file).string());
  return I.checkpoints[name];
}

nn::Checkpoint SeedRun::bilstm() {
  auto& I = *impl_;
  if (auto it = I.checkpoints.find("bilstm"); it != I.checkpoints.end()) return it->second;
  bilstm::BilstmConfig bc = I.cfg.bilstm;
  bc.seed = seed_;
  fixes();
  const std::string key = key_of(
      {"train", "bilstm", I.digest("log.jsonl"), I.digest("fixes.jsonl"), I.cfg.block_len, bilstm::to_json(bc)});
  const std::string file = "bilstm.ckpt.json";
  const bool ran = I.stage("train-bilstm", key, {file}, [&] {
    auto r = bilstm::train(series(), split(), bc);
    r.checkpoint.meta["stage_key"] = key;
    nn::save(I.path(file).string(), r.checkpoint);
    I.checkpoints["bilstm"] = r.checkpoint;
  });
  if (!ran) I.checkpoints["bilstm"] = nn::load(I.path(file).string());
  return I.checkpoints["bilstm"];
}

eval::ErrorReport SeedRun::evaluate(const std::string& method) {
  auto& I = *impl_;
  if (auto it = I.reports.find(method); it != I.reports.end()) return it->second;
  const auto& lg = log();
  const auto& fx = fixes();
  const auto& s = series();
  const auto& sp = split();
  const auto var = variant_of(method);
  Json parts = {"evaluate", method, I.digest("log.jsonl"), I.digest("fixes.jsonl"), I.cfg.block_len};
  if (var) {
    fusionnet(*var);
    parts.push_back(I.digest(var->name() + ".ckpt.json"));
  } else if (method == "bilstm") {
    bilstm();
    parts.push_back(I.digest("bilstm.ckpt.json"));
  } else if (method != "uwb-only" && method != "akf") {
    fail(ErrorCode::kInvalidArgument, "unknown method '" + method + "'");
  }
  const std::string key = key_of(parts);
  const std::string est_file = "est_" + method + ".jsonl";
  const std::string rep_file = "report_" + method + ".json";
  const bool ran = I.stage("evaluate-" + method, key, {est_file, rep_file}, [&] {
    logio::EstTrajectory est;
    auto in_test = [&](double t) { return in_ranges(sp.test, step_ending_at(t, s.dt)); };
    if (method == "uwb-only") {
      for (const auto& f : fx)
        if (!f.fix.underdetermined && !f.fix.singular && f.fix.converged && in_test(f.t))
          est.push_back({f.t, f.fix.position});
    } else if (method == "akf") {
      std::vector<double> t_imu;
      for (const auto& m : lg.imu) t_imu.push_back(m.t);
      const auto ga = global_accel(lg, dataset::fit_bias(lg));
      const int every = std::max(1, static_cast<int>(std::lround(lg.imu_rate * s.dt)));
      for (const auto& e : akf::run(t_imu, ga, fx, akf::AkfConfig{}, every, start_position(lg)))
        if (in_test(e.t)) est.push_back(e);
    } else {
      for (const auto& r : sp.test) {
        const Vec3 p0 = s.P.row(r.begin).transpose();
        Mat p;
        if (var) {
          const auto ck = I.checkpoints.at(var->name());
          auto m = fusionnet::model_from_checkpoint(ck);
          p = fusionnet::infer_range(m, s, r, p0, fusionnet::train_config_from_json(ck.config).window).p;
        } else {
          const auto ck = I.checkpoints.at("bilstm");
          auto m = bilstm::model_from_checkpoint(ck);
          p = bilstm::infer_range(m, s, r, p0, bilstm::bilstm_config_from_json(ck.config).window);
        }
        for (int k = r.begin; k < r.end; ++k) est.push_back({s.t(k + 1), p.row(k - r.begin + 1).transpose()});
      }
    }
    I.reports[method] = eval::error_stats(method, est, lg.truth);
    json::write_file(I.path(est_file).string(), estimates_file(est, method, seed_, key));
    write_report_file(I.path(rep_file).string(), I.reports[method], seed_, key);
  });
  if (!ran) I.reports[method] = read_report(I.path(rep_file).string());
  return I.reports[method];
}

eval::GateAnalysis SeedRun::gate() {
  auto& I = *impl_;
  if (I.gate) return *I.gate;
  const auto ck = fusionnet(Variant{});
  const auto& s = series();
  const std::string key = key_of({"gate", I.digest("fusionnet.ckpt.json"), I.digest("log.jsonl")});
  const auto tc = fusionnet::train_config_from_json(ck.config);
  const bool ran = I.stage("gate", key, {"gate.json", "gate_series.dat", "gate_regime.dat"}, [&] {
    auto m = fusionnet::model_from_checkpoint(ck);
    const auto inf = fusionnet::infer_range(m, s, {0, s.steps}, s.P.row(0).transpose(), tc.window);
    const std::vector<double> alpha(inf.alpha.data(), inf.alpha.data() + inf.alpha.size());
    const std::vector<double> visible(inf.visible.data(), inf.visible.data() + inf.visible.size());
    I.gate = eval::gate_analysis(alpha, visible, tc.model.alpha_min, s.dt);
    Json j = {{"seed", seed_},          {"stage_key", key},          {"alpha_min", tc.model.alpha_min},
              {"dt", s.dt},             {"alpha", alpha},            {"visible", visible},
              {"mean_lt3", I.gate->mean_lt3}, {"mean_ge4", I.gate->mean_ge4},
              {"outage_at_min", I.gate->outage_at_min}};
    json::write_file(I.path("gate.json").string(), j.dump(1) + "\n");
    json::write_file(I.path("gate_series.dat").string(), eval::gate_series_dat(*I.gate));
    json::write_file(I.path("gate_regime.dat").string(), eval::gate_regime_dat(*I.gate));
  });
  if (!ran) {
    const Json j = json::parse(json::read_file(I.path("gate.json").string()));
    I.gate = eval::gate_analysis(j.at("alpha").get<std::vector<double>>(), j.at("visible").get<std::vector<double>>(),
                                 j.at("alpha_min").get<double>(), j.at("dt").get<double>());
  }
  return *I.gate;
}

std::array<eval::AblationRow, 4> SeedRun::ablate() {
  const auto full = evaluate("fusionnet");
  const auto no_att = evaluate("fusionnet-noatt");
  const auto no_aoi = evaluate("fusionnet-noaoi");
  const auto neither = evaluate("fusionnet-noatt-noaoi");
  const auto rows = eval::ablation_table(full, no_att, no_aoi, neither);
  json::write_file((dir_ / "ablation.csv").string(), eval::ablation_csv(rows));
  json::write_file((dir_ / "ablation.md").string(), eval::ablation_markdown(rows));
  return rows;
}

std::vector<std::pair<std::string, std::string>> SeedRun::artifact_digests() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [stage, st] : impl_->manifest["stages"].items())
    for (const auto& [file, d] : st["artifacts"].items()) out.emplace_back(file, d.get<std::string>());
  return out;
}

namespace {

// Runs f(i) for i in [0, n) on up to `threads` workers; rethrows the first
// failure by index.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto nt = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_combined(const RunConfig& cfg, const std::vector<eval::SeedReport>& rows) {
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  const auto means = eval::mean_over_seeds(rows);
  std::string md = "# Comparison\n\nconfig hash: " + config_hash(cfg) + "\n\n## Per seed\n\n" +
                   eval::table_markdown(rows) + "\n## Mean over seeds\n\n" + eval::table_markdown(means);
  json::write_file((out / "comparison.csv").string(), eval::table_csv(rows));
  json::write_file((out / "comparison.md").string(), md);
  json::write_file((out / "cdf.dat").string(), eval::cdf_dat(means));
  json::write_file((out / "box.dat").string(), eval::box_dat(means));
  json::write_file((out / "bar.dat").string(), eval::bar_dat(means));
  json::write_file((out / "config.json").string(), to_json(cfg).dump(1) + "\n");
}

}  // namespace

BenchmarkResult run_benchmark(const RunConfig& cfg, bool force) {
  validate(cfg);
  std::vector<std::vector<eval::SeedReport>> per_seed(cfg.seeds.size());
  std::vector<std::optional<eval::GateAnalysis>> gates(cfg.seeds.size());
  const bool with_gate = std::find(cfg.methods.begin(), cfg.methods.end(), "fusionnet") != cfg.methods.end();
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    SeedRun run(cfg, cfg.seeds[i], force);
    for (const auto& m : cfg.methods) per_seed[i].push_back({cfg.seeds[i], run.evaluate(m)});
    json::write_file((run.dir() / "reports.csv").string(), eval::table_csv(per_seed[i]));
    if (with_gate) gates[i] = run.gate();
  });
  BenchmarkResult res;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    res.rows.insert(res.rows.end(), per_seed[i].begin(), per_seed[i].end());
    if (gates[i]) res.gates.emplace_back(cfg.seeds[i], *gates[i]);
  }
  write_combined(cfg, res.rows);
  if (with_gate) {
    std::string s = "# seed mean_lt3 mean_ge3 mean_ge4 mean_outage outage_at_min\n";
    for (const auto& [seed, g] : res.gates) {
      s += std::to_string(seed);
      for (double v : {g.mean_lt3, g.mean_ge3, g.mean_ge4, g.mean_outage}) s += ' ' + json::fmt17(v);
      s += g.outage_at_min ? " 1\n" : " 0\n";
    }
    json::write_file((fs::path(cfg.output_dir) / "gate_regimes.dat").string(), s);
  }
  return res;
}

std::vector<std::pair<std::uint64_t, std::array<eval::AblationRow, 4>>> run_ablation(const RunConfig& cfg,
                                                                                      bool force) {
  validate(cfg);
  std::vector<std::array<eval::AblationRow, 4>> rows(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    SeedRun run(cfg, cfg.seeds[i], force);
    rows[i] = run.ablate();
  });
  std::vector<std::pair<std::uint64_t, std::array<eval::AblationRow, 4>>> out;
  std::string md = "# Ablation\n\nconfig hash: " + config_hash(cfg) + "\n";
  std::string csv = "seed,att,aoi,rmse,mae,p50,p95,p99,d_rmse,d_p95,d_p99\n";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    out.emplace_back(cfg.seeds[i], rows[i]);
    md += "\n## Seed " + std::to_string(cfg.seeds[i]) + "\n\n" + eval::ablation_markdown(rows[i]);
    const std::string body = eval::ablation_csv(rows[i]);
    std::size_t pos = body.find('\n') + 1;
    while (pos < body.size()) {
      const std::size_t end = body.find('\n', pos);
      csv += std::to_string(cfg.seeds[i]) + ',' + body.substr(pos, end - pos) + '\n';
      pos = end + 1;
    }
  }
  fs::create_directories(cfg.output_dir);
  json::write_file((fs::path(cfg.output_dir) / "ablation.md").string(), md);
  json::write_file((fs::path(cfg.output_dir) / "ablation.csv").string(), csv);
  return out;
}

std::vector<std::pair<std::uint64_t, std::vector<augment::GeneratorScore>>> run_generator_comparison(
    const RunConfig& cfg, bool force) {
  validate(cfg);
  std::vector<std::vector<augment::GeneratorScore>> scores(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    SeedRun run(cfg, cfg.seeds[i], force);
    scores[i] = run.compare_generators();
  });
  std::vector<std::pair<std::uint64_t, std::vector<augment::GeneratorScore>>> out;
  std::string csv = "seed,generator,ks,d_mean,d_median,d_p95,d_p99\n";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    out.emplace_back(cfg.seeds[i], scores[i]);
    for (const auto& s : scores[i]) {
      csv += std::to_string(cfg.seeds[i]) + ',' + s.name;
      for (double v : {s.ks, s.d_mean, s.d_median, s.d_p95, s.d_p99}) csv += ',' + json::fmt17(v);
      csv += '\n';
    }
  }
  fs::create_directories(cfg.output_dir);
  json::write_file((fs::path(cfg.output_dir) / "generators.csv").string(), csv);
  return out;
}

std::vector<eval::SeedReport> write_report(const RunConfig& cfg) {
  std::vector<eval::SeedReport> rows;
  for (auto seed : cfg.seeds)
    for (const auto& m : cfg.methods) {
      const fs::path p = fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed)) / ("report_" + m + ".json");
      if (!fs::exists(p)) fail(ErrorCode::kIo, "missing report " + p.string() + "; run evaluate first");
      rows.push_back({seed, read_report(p.string())});
    }
  write_combined(cfg, rows);
  return rows;
}

logio::EstTrajectory infer_log(const nn::Checkpoint& ck, const sim::MeasurementLog& log, const Vec3& p_start,
                               double epoch_window) {
  const auto fixes = trilat::trilaterate_log(log, epoch_window, p_start);
  dataset::AlignOptions opt;
  if (!log.truth.empty()) opt.bias = dataset::fit_bias(log);
  opt.fix_fill = p_start;
  const auto s = dataset::align(log, fixes, opt);
  logio::EstTrajectory est;
  if (s.steps == 0) return est;
  Mat p;
  if (ck.model == "fusionnet") {
    auto m = fusionnet::model_from_checkpoint(ck);
    require(m.cfg.n_anchors == s.n_anchors, ErrorCode::kDimensionMismatch, "checkpoint anchor count differs from the log");
    p = fusionnet::infer_range(m, s, {0, s.steps}, p_start, fusionnet::train_config_from_json(ck.config).window).p;
  } else if (ck.model == "bilstm") {
    auto m = bilstm::model_from_checkpoint(ck);
    p = bilstm::infer_range(m, s, {0, s.steps}, p_start, bilstm::bilstm_config_from_json(ck.config).window);
  } else {
    fail(ErrorCode::kInvalidArgument, "checkpoint holds a '" + ck.model + "' model, which cannot infer trajectories");
  }
  for (int k = 0; k <= s.steps; ++k) est.push_back({s.t(k), p.row(k).transpose()});
  return est;
}

}  // namespace aoif::pipeline
