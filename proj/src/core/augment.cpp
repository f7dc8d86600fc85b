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

#include "aoifuse/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "aoifuse/nn/optim.hpp"

namespace aoif::augment {

using nn::Graph;
using nn::Var;

namespace {

std::size_t pick(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

long long slot_of(double t, double slot) { return static_cast<long long>(std::floor(t / slot + 1e-9)); }

Vec3 velocity_at(const std::vector<sim::TruthSample>& truth, double t) {
  if (t <= truth.front().t) return truth.front().velocity;
  if (t >= truth.back().t) return truth.back().velocity;
  const auto it = std::upper_bound(truth.begin(), truth.end(), t,
                                   [](double v, const sim::TruthSample& s) { return v < s.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double w = (t - a.t) / (b.t - a.t);
  return (1.0 - w) * a.velocity + w * b.velocity;
}

}  // namespace

std::vector<ResidualRecord> extract_residuals(const sim::MeasurementLog& log, double slot) {
  require(!log.truth.empty(), ErrorCode::kMissingTruth, "residual extraction needs truth");
  require(slot > 0.0, ErrorCode::kInvalidArgument, "slot must be > 0");
  std::map<long long, std::vector<int>> visible;
  for (const auto& r : log.uwb)
    if (r.valid) {
      auto& v = visible[slot_of(r.t, slot)];
      if (std::find(v.begin(), v.end(), r.anchor) == v.end()) v.push_back(r.anchor);
    }
  std::vector<ResidualRecord> out;
  for (const auto& r : log.uwb) {
    if (!r.valid) continue;
    const Vec3 p = dataset::truth_at(log.truth, r.t);
    ResidualRecord rec;
    rec.t = r.t;
    rec.anchor = r.anchor;
    rec.epsilon = r.range - (p - log.anchors[static_cast<std::size_t>(r.anchor)]).norm();
    rec.condition = {velocity_at(log.truth, r.t).norm(),
                     static_cast<double>(visible[slot_of(r.t, slot)].size())};
    out.push_back(rec);
  }
  return out;
}

std::string residuals_to_jsonl(const std::vector<ResidualRecord>& rs) {
  std::string s;
  for (const auto& r : rs) {
    s += "{\"kind\":\"residual\",\"t\":";
    json::append17(s, r.t);
    s += ",\"anchor\":" + std::to_string(r.anchor) + ",\"epsilon\":";
    json::append17(s, r.epsilon);
    s += ",\"condition\":[";
    json::append17(s, r.condition(0));
    s += ',';
    json::append17(s, r.condition(1));
    s += "]}\n";
  }
  return s;
}

std::vector<ResidualRecord> residuals_from_jsonl(const std::string& text) {
  std::vector<ResidualRecord> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = json::parse(line);
    try {
      ResidualRecord r;
      r.t = j.at("t").get<double>();
      r.anchor = j.at("anchor").get<int>();
      r.epsilon = j.at("epsilon").get<double>();
      const auto& c = j.at("condition");
      require(c.size() == 2, ErrorCode::kParse, "condition must have 2 entries");
      r.condition = {c[0].get<double>(), c[1].get<double>()};
      require(std::isfinite(r.epsilon), ErrorCode::kParse, "non-finite residual");
      out.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, std::string("residual record: ") + e.what());
    }
  }
  return out;
}

std::vector<ResidualWindow> residual_windows(const std::vector<ResidualRecord>& rs, int length, double slot) {
  require(length > 0, ErrorCode::kInvalidArgument, "window length must be > 0");
  std::map<int, std::vector<const ResidualRecord*>> by_anchor;
  for (const auto& r : rs) by_anchor[r.anchor].push_back(&r);
  std::vector<ResidualWindow> out;
  for (auto& [a, v] : by_anchor) {
    std::stable_sort(v.begin(), v.end(), [](auto* x, auto* y) { return x->t < y->t; });
    std::size_t i = 0;
    while (i + static_cast<std::size_t>(length) <= v.size()) {
      bool run = true;
      for (int k = 1; k < length && run; ++k)
        run = slot_of(v[i + k]->t, slot) == slot_of(v[i + k - 1]->t, slot) + 1;
      if (!run) {
        ++i;
        continue;
      }
      ResidualWindow w;
      w.values.resize(length);
      for (int k = 0; k < length; ++k) {
        w.values(k) = v[i + k]->epsilon;
        w.condition += v[i + k]->condition / length;
      }
      w.anchor = a;
      w.t0 = v[i]->t;
      out.push_back(std::move(w));
      i += static_cast<std::size_t>(length);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.t0 != y.t0 ? x.t0 < y.t0 : x.anchor < y.anchor;
  });
  return out;
}

json::Json to_json(const DiffusionConfig& c) {
  return {{"steps", c.steps},           {"beta_start", c.beta_start}, {"beta_end", c.beta_end},
          {"hidden", c.hidden},         {"length", c.length},         {"time_embed", c.time_embed},
          {"train_iters", c.train_iters}, {"batch", c.batch},         {"lr", c.lr}};
}

DiffusionConfig diffusion_config_from_json(const json::Json& j) {
  json::check_keys(j, {"steps", "beta_start", "beta_end", "hidden", "length", "time_embed", "train_iters", "batch",
                       "lr"},
                   "diffusion config");
  DiffusionConfig c;
  try {
    c.steps = j.value("steps", c.steps);
    c.beta_start = j.value("beta_start", c.beta_start);
    c.beta_end = j.value("beta_end", c.beta_end);
    c.hidden = j.value("hidden", c.hidden);
    c.length = j.value("length", c.length);
    c.time_embed = j.value("time_embed", c.time_embed);
    c.train_iters = j.value("train_iters", c.train_iters);
    c.batch = j.value("batch", c.batch);
    c.lr = j.value("lr", c.lr);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("diffusion config: ") + e.what());
  }
  require(c.steps >= 10, ErrorCode::kInvalidArgument, "diffusion needs at least 10 steps");
  require(c.beta_start > 0.0 && c.beta_end < 1.0 && c.beta_start <= c.beta_end, ErrorCode::kInvalidArgument,
          "beta schedule must satisfy 0 < beta_start <= beta_end < 1");
  require(c.hidden > 0 && c.length > 0 && c.time_embed > 0 && c.time_embed % 2 == 0 && c.batch > 0,
          ErrorCode::kInvalidArgument, "diffusion sizes must be > 0 and time_embed even");
  return c;
}

DiffusionModel::DiffusionModel(const DiffusionConfig& c, std::uint64_t seed) : cfg(c) {
  require(c.steps >= 10, ErrorCode::kInvalidArgument, "diffusion needs at least 10 steps");
  Rng rng(seed);
  double ab = 1.0;
  for (int k = 0; k < c.steps; ++k) {
    const double b = c.beta_start + (c.beta_end - c.beta_start) * k / (c.steps - 1);
    beta.push_back(b);
    alpha.push_back(1.0 - b);
    ab *= 1.0 - b;
    alpha_bar.push_back(ab);
  }
  denoiser = nn::make_mlp(ps, "denoiser", {c.length + c.time_embed + 2, c.hidden, c.hidden, c.length}, rng);
}

Mat time_embedding(const std::vector<int>& k, int dim, int steps) {
  Mat e(dim, static_cast<Eigen::Index>(k.size()));
  const int half = dim / 2;
  for (std::size_t j = 0; j < k.size(); ++j)
    for (int i = 0; i < half; ++i) {
      const double f = std::pow(static_cast<double>(steps), -static_cast<double>(i) / half);
      e(i, static_cast<Eigen::Index>(j)) = std::sin(k[j] * f);
      e(half + i, static_cast<Eigen::Index>(j)) = std::cos(k[j] * f);
    }
  return e;
}

namespace {

Mat standardise_cond(const DiffusionModel& m, const Mat& cond) {
  Mat c(2, cond.cols());
  for (int i = 0; i < 2; ++i) c.row(i) = (cond.row(i).array() - m.cond_mean(i)) / m.cond_scale(i);
  return c;
}

Mat predict_noise(const DiffusionModel& m, const Mat& xk, const Mat& cs, int k) {
  Graph g(false);
  auto& mm = const_cast<DiffusionModel&>(m);
  const std::vector<int> ks(static_cast<std::size_t>(xk.cols()), k);
  const Var in = g.input((Mat(xk.rows() + m.cfg.time_embed + 2, xk.cols()) << xk,
                          time_embedding(ks, m.cfg.time_embed, m.cfg.steps), cs)
                             .finished());
  return g.value(nn::forward(g, mm.denoiser, in));
}

}  // namespace

Var denoiser_loss(Graph& g, DiffusionModel& m, const Mat& x0, const Mat& cond, const std::vector<int>& k,
                  const Mat& noise) {
  const auto B = x0.cols();
  require(x0.rows() == m.cfg.length && noise.rows() == x0.rows() && noise.cols() == B && cond.rows() == 2 &&
              cond.cols() == B && static_cast<Eigen::Index>(k.size()) == B,
          ErrorCode::kDimensionMismatch, "denoiser_loss: shape mismatch");
  Mat xk(x0.rows(), B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const double ab = m.alpha_bar[static_cast<std::size_t>(k[static_cast<std::size_t>(j)])];
    xk.col(j) = std::sqrt(ab) * x0.col(j) + std::sqrt(1.0 - ab) * noise.col(j);
  }
  const Var in = g.concat_rows({g.input(xk), g.input(time_embedding(k, m.cfg.time_embed, m.cfg.steps)),
                                g.input(standardise_cond(m, cond))});
  const Var err = g.sub(nn::forward(g, m.denoiser, in), g.input(noise));
  return g.mean(g.mul(err, err));
}

std::vector<double> train_diffusion(DiffusionModel& m, const std::vector<ResidualWindow>& corpus, std::uint64_t seed) {
  require(!corpus.empty(), ErrorCode::kInvalidArgument, "empty residual corpus");
  const int L = m.cfg.length;
  std::vector<double> all;
  Eigen::Vector2d cs = Eigen::Vector2d::Zero(), cq = Eigen::Vector2d::Zero();
  for (const auto& w : corpus) {
    require(w.values.size() == L, ErrorCode::kDimensionMismatch, "residual window length differs from the model");
    all.insert(all.end(), w.values.data(), w.values.data() + L);
    cs += w.condition;
    cq += w.condition.cwiseProduct(w.condition);
  }
  const double n = static_cast<double>(all.size());
  m.value_mean = std::accumulate(all.begin(), all.end(), 0.0) / n;
  double var = 0.0;
  for (double v : all) var += (v - m.value_mean) * (v - m.value_mean);
  m.value_scale = std::max(std::sqrt(var / n), 1e-6);
  const double nw = static_cast<double>(corpus.size());
  m.cond_mean = cs / nw;
  for (int i = 0; i < 2; ++i)
    m.cond_scale(i) = std::max(std::sqrt(std::max(cq(i) / nw - m.cond_mean(i) * m.cond_mean(i), 0.0)), 1e-6);
  m.train_conditions.clear();
  for (const auto& w : corpus) m.train_conditions.push_back(w.condition);
  m.zero_denoiser = false;

  nn::AdamConfig ac;
  ac.lr = m.cfg.lr;
  nn::Adam opt(m.ps, ac);
  Rng rng(seed);
  std::vector<double> losses;
  const int B = m.cfg.batch;
  Mat x0(L, B), cond(2, B), noise(L, B);
  std::vector<int> k(static_cast<std::size_t>(B));
  for (int it = 0; it < m.cfg.train_iters; ++it) {
    for (int j = 0; j < B; ++j) {
      const auto& w = corpus[pick(rng, corpus.size())];
      x0.col(j) = (w.values.array() - m.value_mean) / m.value_scale;
      cond.col(j) = w.condition;
      k[static_cast<std::size_t>(j)] = static_cast<int>(pick(rng, static_cast<std::size_t>(m.cfg.steps)));
      for (int i = 0; i < L; ++i) noise(i, j) = gauss(rng);
    }
    m.ps.zero_grad();
    Graph g;
    const Var loss = denoiser_loss(g, m, x0, cond, k, noise);
    losses.push_back(g.scalar(loss));
    g.backward(loss);
    opt.step();
  }
  return losses;
}

Mat sample_residuals(const DiffusionModel& m, const Mat& conditions, Rng& rng) {
  require(conditions.rows() == 2, ErrorCode::kDimensionMismatch, "conditions must be 2 x n");
  const int L = m.cfg.length;
  const auto n = conditions.cols();
  const Mat cs = standardise_cond(m, conditions);
  Mat x(L, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (int i = 0; i < L; ++i) x(i, j) = gauss(rng);
  for (int k = m.cfg.steps - 1; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    if (!m.zero_denoiser) {
      const Mat eps = predict_noise(m, x, cs, k);
      x -= (m.beta[ku] / std::sqrt(1.0 - m.alpha_bar[ku])) * eps;
    }
    x /= std::sqrt(m.alpha[ku]);
    if (k > 0) {
      const double sd = std::sqrt(m.beta[ku]);
      for (Eigen::Index j = 0; j < n; ++j)
        for (int i = 0; i < L; ++i) x(i, j) += sd * gauss(rng);
    }
  }
  return (x.array() * m.value_scale + m.value_mean).matrix();
}

double zero_denoiser_variance(const DiffusionModel& m) {
  double v = 1.0;
  for (int k = m.cfg.steps - 1; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    v /= m.alpha[ku];
    if (k > 0) v += m.beta[ku];
  }
  return v;
}

nn::Checkpoint to_checkpoint(const DiffusionModel& m, std::uint64_t seed) {
  nn::Checkpoint ck;
  ck.model = "diffusion";
  ck.config = to_json(m.cfg);
  ck.config_hash = nn::config_hash(ck.config);
  ck.seed = seed;
  nn::capture(m.ps, ck);
  json::Json conds = json::Json::array();
  for (const auto& c : m.train_conditions) conds.push_back({c(0), c(1)});
  ck.stats = {{"value_mean", m.value_mean},
              {"value_scale", m.value_scale},
              {"cond_mean", {m.cond_mean(0), m.cond_mean(1)}},
              {"cond_scale", {m.cond_scale(0), m.cond_scale(1)}},
              {"train_conditions", conds}};
  return ck;
}

DiffusionModel diffusion_from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.model != "diffusion") fail(ErrorCode::kParse, "checkpoint holds a '" + ck.model + "' model, not diffusion");
  DiffusionModel m(diffusion_config_from_json(ck.config), ck.seed);
  nn::restore(ck, m.ps);
  try {
    m.value_mean = ck.stats.at("value_mean").get<double>();
    m.value_scale = ck.stats.at("value_scale").get<double>();
    for (int i = 0; i < 2; ++i) {
      m.cond_mean(i) = ck.stats.at("cond_mean")[i].get<double>();
      m.cond_scale(i) = ck.stats.at("cond_scale")[i].get<double>();
    }
    for (const auto& c : ck.stats.at("train_conditions"))
      m.train_conditions.emplace_back(c[0].get<double>(), c[1].get<double>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("diffusion checkpoint stats: ") + e.what());
  }
  return m;
}

Generator gaussian_fit(const std::vector<double>& train) {
  require(!train.empty(), ErrorCode::kInvalidArgument, "empty training sample");
  const double n = static_cast<double>(train.size());
  const double mean = std::accumulate(train.begin(), train.end(), 0.0) / n;
  double var = 0.0;
  for (double v : train) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  return {"gaussian", [mean, sd](std::size_t k, Rng& rng) {
            std::vector<double> out(k);
            for (auto& v : out) v = mean + sd * gauss(rng);
            return out;
          }};
}

Generator bootstrap(const std::vector<double>& train) {
  require(!train.empty(), ErrorCode::kInvalidArgument, "empty training sample");
  return {"bootstrap", [train](std::size_t k, Rng& rng) {
            std::vector<double> out(k);
            for (auto& v : out) v = train[pick(rng, train.size())];
            return out;
          }};
}

Generator constant(double value) {
  return {"constant", [value](std::size_t k, Rng&) { return std::vector<double>(k, value); }};
}

Generator diffusion(const DiffusionModel& m) {
  require(!m.train_conditions.empty(), ErrorCode::kInvalidArgument, "diffusion generator needs training conditions");
  return {"diffusion", [&m](std::size_t k, Rng& rng) {
            const int L = m.cfg.length;
            const auto nw = static_cast<Eigen::Index>((k + static_cast<std::size_t>(L) - 1) / static_cast<std::size_t>(L));
            Mat cond(2, nw);
            for (Eigen::Index j = 0; j < nw; ++j) cond.col(j) = m.train_conditions[pick(rng, m.train_conditions.size())];
            const Mat x = sample_residuals(m, cond, rng);
            std::vector<double> out(x.data(), x.data() + k);
            return out;
          }};
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::kInvalidArgument, "KS distance needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

std::vector<GeneratorScore> compare_generators(const std::vector<double>& real, const std::vector<Generator>& gens,
                                               std::size_t n_samples, std::uint64_t seed) {
  require(gens.size() >= 2, ErrorCode::kInvalidArgument, "comparison needs at least two generators");
  require(!real.empty() && n_samples > 0, ErrorCode::kInvalidArgument, "comparison needs samples");
  std::vector<double> rs = real;
  std::sort(rs.begin(), rs.end());
  auto stats = [](const std::vector<double>& s) {
    return std::array<double, 4>{std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size()),
                                 percentile_sorted(s, 0.5), percentile_sorted(s, 0.95), percentile_sorted(s, 0.99)};
  };
  const auto ref = stats(rs);
  std::vector<GeneratorScore> out;
  for (std::size_t g = 0; g < gens.size(); ++g) {
    Rng rng(seed + 0x9E3779B97F4A7C15ULL * (g + 1));
    std::vector<double> s = gens[g].sample(n_samples, rng);
    for (double v : s) require(std::isfinite(v), ErrorCode::kNonFinite, "generator produced a non-finite sample");
    std::sort(s.begin(), s.end());
    const auto st = stats(s);
    out.push_back({gens[g].name, ks_distance(rs, s), std::abs(st[0] - ref[0]), std::abs(st[1] - ref[1]),
                   std::abs(st[2] - ref[2]), std::abs(st[3] - ref[3])});
  }
  return out;
}

dataset::FusionWindow mix_and_inject(const dataset::FusionWindow& w, const FakeSource& fake, double alpha_gan,
                                     double subset_frac, Rng& rng) {
  require(alpha_gan >= 0.0 && alpha_gan <= 1.0, ErrorCode::kInvalidArgument, "alpha_gan must be in [0, 1]");
  require(subset_frac >= 0.0 && subset_frac <= 1.0, ErrorCode::kInvalidArgument, "subset_frac must be in [0, 1]");
  require(w.R.size() > 0 && w.R.rows() == w.D.rows() && w.R.cols() == w.D.cols(), ErrorCode::kMissingTruth,
          "injection needs geometric ranges");
  std::vector<std::pair<int, int>> valid;
  for (int t = 0; t < w.M.rows(); ++t)
    for (int a = 0; a < w.M.cols(); ++a)
      if (w.M(t, a) == 1.0) valid.emplace_back(t, a);
  dataset::FusionWindow out = w;
  const auto n_sel = static_cast<std::size_t>(std::ceil(subset_frac * static_cast<double>(valid.size()) - 1e-9));
  for (std::size_t i = 0; i < n_sel; ++i) {
    std::swap(valid[i], valid[i + pick(rng, valid.size() - i)]);
    const auto [t, a] = valid[i];
    const double eps_real = w.D(t, a) - w.R(t, a);
    const double eps_fake = fake(a, rng);
    // Same as R + (1 - alpha) eps_real + alpha eps_fake, exact for alpha = 0.
    out.D(t, a) = w.D(t, a) + alpha_gan * (eps_fake - eps_real);
  }
  return out;
}

FakeSource pool_source(std::vector<double> pool) {
  require(!pool.empty(), ErrorCode::kInvalidArgument, "empty residual pool");
  return [pool = std::move(pool)](int, Rng& rng) { return pool[pick(rng, pool.size())]; };
}

}  // namespace aoif::augment
