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

#include "aoifuse/fusionnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "aoifuse/augment.hpp"
#include "aoifuse/nn/optim.hpp"

namespace aoif::fusionnet {

using nn::Graph;
using nn::Var;

json::Json to_json(const TrainConfig& c) {
  json::Json j;
  j["model"] = {{"n_anchors", c.model.n_anchors}, {"hidden", c.model.hidden},       {"embed", c.model.embed},
                {"alpha_min", c.model.alpha_min}, {"lambda_init", c.model.lambda_init}, {"att", c.model.att},
                {"aoi", c.model.aoi}};
  j["loss"] = {{"w_inc", c.loss.w_inc},         {"w_pos", c.loss.w_pos},         {"w_end", c.loss.w_end},
               {"delta_inc", c.loss.delta_inc}, {"delta_pos", c.loss.delta_pos}, {"delta_end", c.loss.delta_end}};
  j["augment"] = {{"enabled", c.aug.enabled}, {"alpha_gan", c.aug.alpha_gan},  {"subset_frac", c.aug.subset_frac},
                  {"p_max", c.aug.p_max},     {"ramp_epochs", c.aug.ramp_epochs}};
  j["window"] = c.window;
  j["stride"] = c.stride;
  j["batch"] = c.batch;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["warmup_epochs"] = c.warmup_epochs;
  j["plateau"] = c.plateau;
  j["lr"] = c.lr;
  j["lr_factor"] = c.lr_factor;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const json::Json& j) {
  json::check_keys(j, {"model", "loss", "augment", "window", "stride", "batch", "max_epochs", "patience",
                       "warmup_epochs", "plateau", "lr", "lr_factor", "weight_decay", "seed"},
                   "fusionnet config");
  TrainConfig c;
  try {
    if (j.contains("model")) {
      const auto& m = j["model"];
      json::check_keys(m, {"n_anchors", "hidden", "embed", "alpha_min", "lambda_init", "att", "aoi"}, "model");
      c.model.n_anchors = m.value("n_anchors", c.model.n_anchors);
      c.model.hidden = m.value("hidden", c.model.hidden);
      c.model.embed = m.value("embed", c.model.embed);
      c.model.alpha_min = m.value("alpha_min", c.model.alpha_min);
      c.model.lambda_init = m.value("lambda_init", c.model.lambda_init);
      c.model.att = m.value("att", c.model.att);
      c.model.aoi = m.value("aoi", c.model.aoi);
    }
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      json::check_keys(l, {"w_inc", "w_pos", "w_end", "delta_inc", "delta_pos", "delta_end"}, "loss");
      c.loss.w_inc = l.value("w_inc", c.loss.w_inc);
      c.loss.w_pos = l.value("w_pos", c.loss.w_pos);
      c.loss.w_end = l.value("w_end", c.loss.w_end);
      c.loss.delta_inc = l.value("delta_inc", c.loss.delta_inc);
      c.loss.delta_pos = l.value("delta_pos", c.loss.delta_pos);
      c.loss.delta_end = l.value("delta_end", c.loss.delta_end);
    }
    if (j.contains("augment")) {
      const auto& a = j["augment"];
      json::check_keys(a, {"enabled", "alpha_gan", "subset_frac", "p_max", "ramp_epochs"}, "augment");
      c.aug.enabled = a.value("enabled", c.aug.enabled);
      c.aug.alpha_gan = a.value("alpha_gan", c.aug.alpha_gan);
      c.aug.subset_frac = a.value("subset_frac", c.aug.subset_frac);
      c.aug.p_max = a.value("p_max", c.aug.p_max);
      c.aug.ramp_epochs = a.value("ramp_epochs", c.aug.ramp_epochs);
    }
    c.window = j.value("window", c.window);
    c.stride = j.value("stride", c.stride);
    c.batch = j.value("batch", c.batch);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.plateau = j.value("plateau", c.plateau);
    c.lr = j.value("lr", c.lr);
    c.lr_factor = j.value("lr_factor", c.lr_factor);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("fusionnet config: ") + e.what());
  }
  require(c.model.hidden > 0 && c.model.embed > 0 && c.model.n_anchors > 0, ErrorCode::kInvalidArgument,
          "model sizes must be > 0");
  require(c.model.alpha_min >= 0.0 && c.model.alpha_min <= 1.0, ErrorCode::kInvalidArgument,
          "alpha_min must be in [0, 1]");
  require(c.model.lambda_init > 0.0, ErrorCode::kInvalidArgument, "lambda_init must be > 0");
  require(c.window > 0 && c.stride > 0 && c.batch > 0 && c.max_epochs > 0 && c.patience > 0,
          ErrorCode::kInvalidArgument, "training sizes must be > 0");
  require(c.aug.alpha_gan >= 0.0 && c.aug.alpha_gan <= 1.0, ErrorCode::kInvalidArgument,
          "alpha_gan must be in [0, 1]");
  return c;
}

Stats compute_stats(const dataset::Series& s, const std::vector<dataset::Range>& train) {
  require(!train.empty(), ErrorCode::kEmptySplit, "empty training split");
  require(s.has_truth, ErrorCode::kMissingTruth, "statistics need truth positions");
  const int na = s.n_anchors;
  Stats st;
  st.mu = Vec::Zero(na);
  st.sigma = Vec::Ones(na);
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(na));
  std::vector<double> all;
  std::array<std::vector<double>, 3> steps;
  double msum = 0.0;
  long mcount = 0;
  for (const auto& r : train)
    for (int k = r.begin; k < r.end; ++k) {
      for (int a = 0; a < na; ++a) {
        if (s.M(k, a) == 1.0) {
          vals[static_cast<std::size_t>(a)].push_back(s.D(k, a));
          all.push_back(s.D(k, a));
        }
        msum += s.M(k, a);
        ++mcount;
      }
      for (int i = 0; i < 3; ++i) steps[static_cast<std::size_t>(i)].push_back(std::abs(s.P(k + 1, i) - s.P(k, i)));
    }
  const double all_mean = all.empty() ? 0.0 : std::accumulate(all.begin(), all.end(), 0.0) / all.size();
  for (int a = 0; a < na; ++a) {
    const auto& v = vals[static_cast<std::size_t>(a)];
    if (v.size() < 2) {
      st.mu(a) = all_mean;
      continue;
    }
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    st.mu(a) = m;
    st.sigma(a) = std::max(std::sqrt(var / (v.size() - 1)), 1e-6);
  }
  for (int i = 0; i < 3; ++i) {
    auto& v = steps[static_cast<std::size_t>(i)];
    std::sort(v.begin(), v.end());
    st.step_scale(i) = std::max(percentile_sorted(v, 0.99), 1e-3);
  }
  st.q_prior = mcount ? msum / static_cast<double>(mcount) : 0.0;
  return st;
}

namespace {

double inv_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

json::Json stats_to_json(const Stats& st) {
  json::Json j;
  j["mu"] = std::vector<double>(st.mu.data(), st.mu.data() + st.mu.size());
  j["sigma"] = std::vector<double>(st.sigma.data(), st.sigma.data() + st.sigma.size());
  j["step_scale"] = {st.step_scale(0), st.step_scale(1), st.step_scale(2)};
  j["q_prior"] = st.q_prior;
  return j;
}

Stats stats_from_json(const json::Json& j) {
  Stats st;
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto sg = j.at("sigma").get<std::vector<double>>();
  st.mu = Eigen::Map<const Vec>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  st.sigma = Eigen::Map<const Vec>(sg.data(), static_cast<Eigen::Index>(sg.size()));
  st.step_scale = json::vec3(j.at("step_scale"));
  st.q_prior = j.at("q_prior").get<double>();
  return st;
}

}  // namespace

Model::Model(const ModelConfig& c, const Stats& st, std::uint64_t seed) : cfg(c), stats(st) {
  require(st.mu.size() == c.n_anchors && st.sigma.size() == c.n_anchors, ErrorCode::kDimensionMismatch,
          "statistics do not match the anchor count");
  require((st.sigma.array() > 0.0).all() && (st.step_scale.array() > 0.0).all(), ErrorCode::kInvalidArgument,
          "sigma and step scale must be > 0");
  Rng rng(seed);
  const int h = c.hidden;
  imu_enc = nn::make_mlp(ps, "imu_enc", {3, h, h}, rng);
  uwb_enc = nn::make_mlp(ps, "uwb_enc", {(c.aoi ? 2 : 1) + c.embed, h, h}, rng);
  emb = &ps.add("anchor_emb", nn::uniform_init(c.embed, c.n_anchors, 1, rng));
  if (c.aoi) decay = &ps.add("decay_raw", Mat::Constant(c.n_anchors, 1, inv_softplus(c.lambda_init)));
  lstm = nn::make_lstm(ps, "lstm", 2 * h + 2, h, rng);
  if (c.att) gate = nn::make_mlp(ps, "gate", {2 * h + 1, h, 1}, rng);
  head = nn::make_mlp(ps, "head", {2 * h, h, 3}, rng);
}

Vec Model::lambda() const {
  if (!decay) return Vec::Constant(cfg.n_anchors, std::numeric_limits<double>::infinity());
  return nn::softplus(decay->value).col(0);
}

nn::Checkpoint to_checkpoint(const Model& m, const TrainConfig& tc) {
  nn::Checkpoint ck;
  ck.model = "fusionnet";
  TrainConfig c = tc;
  c.model = m.cfg;
  ck.config = to_json(c);
  ck.config_hash = nn::config_hash(ck.config);
  ck.seed = tc.seed;
  nn::capture(m.ps, ck);
  ck.stats = stats_to_json(m.stats);
  return ck;
}

Model model_from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.model != "fusionnet") fail(ErrorCode::kParse, "checkpoint holds a '" + ck.model + "' model, not fusionnet");
  const TrainConfig tc = train_config_from_json(ck.config);
  Model m(tc.model, stats_from_json(ck.stats), tc.seed);
  nn::restore(ck, m.ps);
  return m;
}

Batch make_batch(std::span<const FusionWindow* const> ws, const Stats& st, int n_anchors) {
  require(!ws.empty(), ErrorCode::kInvalidArgument, "empty batch");
  Batch b;
  b.T = ws[0]->steps();
  b.B = static_cast<int>(ws.size());
  b.NA = n_anchors;
  const int T = b.T, B = b.B, NA = b.NA;
  const bool truth = ws[0]->P.size() > 0;
  b.U.resize(3, T * B);
  b.dn.resize(1, T * NA * B);
  b.mask.resize(1, T * NA * B);
  b.tau.resize(1, T * NA * B);
  b.qraw.resize(1, T * B);
  b.anchor.resize(static_cast<std::size_t>(T * NA * B));
  if (truth) {
    b.dP.resize(3, T * B);
    b.P0.resize(3, B);
  }
  for (int w = 0; w < B; ++w) {
    const FusionWindow& fw = *ws[static_cast<std::size_t>(w)];
    if (fw.steps() != T || fw.D.cols() != NA) fail(ErrorCode::kDimensionMismatch, "batch windows differ in shape");
    const Mat filled = dataset::causal_fill(fw.D, fw.M, st.mu);
    if (truth) b.P0.col(w) = fw.P.row(0).transpose();
    for (int t = 0; t < T; ++t) {
      const int c = t * B + w;
      b.U.col(c) = fw.U.row(t).transpose();
      b.qraw(0, c) = fw.M.row(t).sum() / NA;
      if (truth) b.dP.col(c) = (fw.P.row(t + 1) - fw.P.row(t)).transpose();
      for (int a = 0; a < NA; ++a) {
        const int k = (t * NA + a) * B + w;
        b.dn(0, k) = (filled(t, a) - st.mu(a)) / (st.sigma(a) + kEps);
        b.mask(0, k) = fw.M(t, a);
        b.tau(0, k) = fw.tau(t, a);
        b.anchor[static_cast<std::size_t>(k)] = a;
      }
    }
  }
  return b;
}

namespace {

// exp(-tau / softplus(raw[a])) per anchor column.
Var aoi_decay(Graph& g, Var raw, const Mat& tau, const std::vector<int>& anchor) {
  const Mat lam = nn::softplus(g.value(raw));
  Mat out(1, tau.cols());
  for (Eigen::Index k = 0; k < tau.cols(); ++k) out(0, k) = std::exp(-tau(0, k) / lam(anchor[k], 0));
  return g.custom(std::move(out), {raw}, [&g, raw, tau, anchor](const Mat& go) {
    const Mat& r = g.value(raw);
    const Mat lam = nn::softplus(r);
    Mat d = Mat::Zero(r.rows(), 1);
    for (Eigen::Index k = 0; k < tau.cols(); ++k) {
      const int a = anchor[k];
      const double l = lam(a, 0);
      d(a, 0) += go(0, k) * std::exp(-tau(0, k) / l) * tau(0, k) / (l * l);
    }
    g.accumulate(raw, d.cwiseProduct(nn::sigmoid(r)));
  }, "aoi_decay");
}

Var gather_cols(Graph& g, Var table, const std::vector<int>& idx) {
  const Mat& tb = g.value(table);
  Mat out(tb.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = tb.col(idx[k]);
  return g.custom(std::move(out), {table}, [&g, table, idx](const Mat& go) {
    Mat d = Mat::Zero(g.value(table).rows(), g.value(table).cols());
    for (std::size_t k = 0; k < idx.size(); ++k) d.col(idx[k]) += go.col(static_cast<Eigen::Index>(k));
    g.accumulate(table, d);
  }, "gather_cols");
}

// h_t = sum_a mt h_a / (sum_a mt + eps) over anchor columns.
Var aggregate(Graph& g, Var h_each, Var mt, int T, int NA, int B) {
  const Mat& H = g.value(h_each);
  const Mat& W = g.value(mt);
  Mat out = Mat::Zero(H.rows(), T * B);
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b) {
      double s = 0.0;
      for (int a = 0; a < NA; ++a) {
        const int k = (t * NA + a) * B + b;
        s += W(0, k);
        out.col(t * B + b) += W(0, k) * H.col(k);
      }
      out.col(t * B + b) /= s + kEps;
    }
  const int id = static_cast<int>(g.size());
  return g.custom(std::move(out), {h_each, mt}, [&g, h_each, mt, T, NA, B, id](const Mat& go) {
    const Mat& H = g.value(h_each);
    const Mat& W = g.value(mt);
    const Mat& agg = g.value(Var{id});
    Mat dh = g.needs_grad(h_each) ? Mat::Zero(H.rows(), H.cols()) : Mat();
    Mat dw = g.needs_grad(mt) ? Mat::Zero(1, W.cols()) : Mat();
    for (int t = 0; t < T; ++t)
      for (int b = 0; b < B; ++b) {
        double s = 0.0;
        for (int a = 0; a < NA; ++a) s += W(0, (t * NA + a) * B + b);
        const auto gcol = go.col(t * B + b);
        for (int a = 0; a < NA; ++a) {
          const int k = (t * NA + a) * B + b;
          if (dh.size()) dh.col(k) = (W(0, k) / (s + kEps)) * gcol;
          if (dw.size()) dw(0, k) = gcol.dot(H.col(k) - agg.col(t * B + b)) / (s + kEps);
        }
      }
    if (dh.size()) g.accumulate(h_each, dh);
    if (dw.size()) g.accumulate(mt, dw);
  }, "aggregate");
}

// Mean over anchors: 1 x TNB -> 1 x TB.
Var anchor_mean(Graph& g, Var v, int T, int NA, int B) {
  const Mat& V = g.value(v);
  Mat out = Mat::Zero(1, T * B);
  for (int t = 0; t < T; ++t)
    for (int a = 0; a < NA; ++a)
      for (int b = 0; b < B; ++b) out(0, t * B + b) += V(0, (t * NA + a) * B + b) / NA;
  return g.custom(std::move(out), {v}, [&g, v, T, NA, B](const Mat& go) {
    Mat d(1, T * NA * B);
    for (int t = 0; t < T; ++t)
      for (int a = 0; a < NA; ++a)
        for (int b = 0; b < B; ++b) d(0, (t * NA + a) * B + b) = go(0, t * B + b) / NA;
    g.accumulate(v, d);
  }, "anchor_mean");
}

// alpha <- max(alpha, alpha_min) where q_raw = 0.
Var clamp_alpha(Graph& g, Var alpha, const Mat& qraw, double alpha_min) {
  Mat out = g.value(alpha);
  for (Eigen::Index k = 0; k < out.cols(); ++k)
    if (qraw(0, k) == 0.0) out(0, k) = std::max(out(0, k), alpha_min);
  return g.custom(std::move(out), {alpha}, [&g, alpha, qraw, alpha_min](const Mat& go) {
    const Mat& a = g.value(alpha);
    Mat d = go;
    for (Eigen::Index k = 0; k < d.cols(); ++k)
      if (qraw(0, k) == 0.0 && a(0, k) < alpha_min) d(0, k) = 0.0;
    g.accumulate(alpha, d);
  }, "clamp_alpha");
}

Var gate_mix_op(Graph& g, Var alpha, Var a, Var b) {
  Mat out = gate_mix(g.value(alpha), g.value(a), g.value(b));
  return g.custom(std::move(out), {alpha, a, b}, [&g, alpha, a, b](const Mat& go) {
    const Mat& al = g.value(alpha);
    if (g.needs_grad(alpha))
      g.accumulate(alpha, go.cwiseProduct(g.value(a) - g.value(b)).colwise().sum());
    if (g.needs_grad(a)) g.accumulate(a, (go.array().rowwise() * al.row(0).array()).matrix());
    if (g.needs_grad(b)) g.accumulate(b, (go.array().rowwise() * (1.0 - al.row(0).array())).matrix());
  }, "gate_mix");
}

Var bounded_step_op(Graph& g, Var raw, const Vec3& s) {
  Mat out = bounded_step(g.value(raw), s);
  return g.custom(std::move(out), {raw}, [&g, raw, s](const Mat& go) {
    const Mat& r = g.value(raw);
    Mat d(r.rows(), r.cols());
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      for (Eigen::Index k = 0; k < r.cols(); ++k) {
        const double th = std::tanh(r(i, k) / s(i));
        d(i, k) = go(i, k) * (1.0 - th * th);
      }
    g.accumulate(raw, d);
  }, "bounded_step");
}

double huber_d(double e, double delta) { return std::clamp(e, -delta, delta); }

}  // namespace

Mat gate_mix(const Mat& alpha, const Mat& a, const Mat& b) {
  if (alpha.rows() != 1 || alpha.cols() != a.cols() || a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorCode::kDimensionMismatch, "gate_mix: shape mismatch");
  Mat out(a.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double al = alpha(0, k);
    out.col(k) = al * a.col(k) + (1.0 - al) * b.col(k);
  }
  return out;
}

Mat bounded_step(const Mat& raw, const Vec3& s) {
  require(raw.rows() == 3, ErrorCode::kDimensionMismatch, "bounded_step expects 3 rows");
  Mat out(3, raw.cols());
  for (int i = 0; i < 3; ++i) {
    const double lim = std::nextafter(s(i), 0.0);
    for (Eigen::Index k = 0; k < raw.cols(); ++k) out(i, k) = std::clamp(s(i) * std::tanh(raw(i, k) / s(i)), -lim, lim);
  }
  return out;
}

ForwardOut forward(Graph& g, Model& m, const Batch& b, const ForwardOptions& opt) {
  const int T = b.T, B = b.B, NA = b.NA, TB = T * B;
  require(NA == m.cfg.n_anchors, ErrorCode::kDimensionMismatch, "batch anchor count differs from the model");
  ForwardOut o;
  o.h_imu = nn::forward(g, m.imu_enc, g.input(b.U));

  const Var mask = g.input(b.mask);
  const Var emb = gather_cols(g, g.param(*m.emb), b.anchor);
  Var x;
  if (m.cfg.aoi) {
    const Var decay = aoi_decay(g, g.param(*m.decay), b.tau, b.anchor);
    o.mt = g.mul(mask, decay);
    x = g.concat_rows({g.input(b.dn), decay, emb});
  } else {
    o.mt = mask;
    x = g.concat_rows({g.input(b.dn), emb});
  }
  const Var h_each = nn::forward(g, m.uwb_enc, x);
  o.h_uwb = aggregate(g, h_each, o.mt, T, NA, B);
  const Var q_decay = anchor_mean(g, o.mt, T, NA, B);
  o.q = g.add(g.input(0.5 * b.qraw), g.scale(q_decay, 0.5));

  if (opt.fixed_alpha) {
    o.alpha = g.input(Mat::Constant(1, TB, *opt.fixed_alpha));
  } else if (!m.cfg.att) {
    o.alpha = g.input(Mat::Constant(1, TB, 0.5));
  } else {
    const Var raw = nn::forward(g, m.gate, g.concat_rows({o.h_imu, o.h_uwb, o.q}));
    o.alpha = clamp_alpha(g, g.sigmoid(raw), b.qraw, m.cfg.alpha_min);
  }
  o.h_att = gate_mix_op(g, o.alpha, o.h_imu, o.h_uwb);

  const nn::LstmVars lv = nn::bind(g, m.lstm);
  const Var z = g.concat_rows({o.h_imu, o.h_uwb, o.q, g.input(Mat::Constant(1, TB, m.stats.q_prior))});
  const Var gx = g.affine(lv.wx, z, lv.b);
  const int h = m.cfg.hidden;
  Var hs = g.input(Mat::Zero(h, B));
  Var cs = g.input(Mat::Zero(h, B));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const Var gates = g.add(g.cols(gx, t * B, B), g.matmul(lv.wh, hs));
    cs = g.lstm_cell(gates, cs);
    hs = g.lstm_hidden(gates, cs);
    outs.push_back(hs);
  }
  o.h_rnn = g.concat_cols(outs);
  const Var raw = nn::forward(g, m.head, g.concat_rows({o.h_rnn, o.h_att}));
  o.dp = bounded_step_op(g, raw, m.stats.step_scale);
  return o;
}

Var composite_loss(Graph& g, Var dp, const Batch& b, const LossConfig& lc) {
  require(b.dP.size() > 0, ErrorCode::kMissingTruth, "loss needs target increments");
  const int T = b.T, B = b.B;
  const Mat& D = g.value(dp);
  const Mat E = D - b.dP;
  const double n_el = 3.0 * T * B;
  double inc = 0.0, pos = 0.0, end = 0.0;
  Mat epos = Mat::Zero(3, T * B);  // error of position row t (rows 0..T-1)
  Mat eend(3, B);
  for (int w = 0; w < B; ++w) {
    Eigen::Vector3d run = Eigen::Vector3d::Zero();
    for (int t = 0; t < T; ++t) {
      epos.col(t * B + w) = run;
      run += E.col(t * B + w);
    }
    eend.col(w) = run;
  }
  for (Eigen::Index k = 0; k < E.size(); ++k) {
    inc += nn::huber(E.data()[k], lc.delta_inc);
    pos += nn::huber(epos.data()[k], lc.delta_pos);
  }
  for (int w = 0; w < B; ++w) end += nn::huber(eend.col(w).norm(), lc.delta_end);
  Mat out(1, 1);
  out(0, 0) = lc.w_inc * inc / n_el + lc.w_pos * pos / n_el + lc.w_end * end / B;
  return g.custom(std::move(out), {dp}, [&g, dp, E, epos, eend, T, B, n_el, lc](const Mat& go) {
    Mat d(3, T * B);
    for (int w = 0; w < B; ++w) {
      const Eigen::Vector3d ee = eend.col(w);
      const double nrm = ee.norm();
      const Eigen::Vector3d gend = (nrm <= lc.delta_end ? ee : Eigen::Vector3d(lc.delta_end * ee / nrm)) * (lc.w_end / B);
      Eigen::Vector3d tail = Eigen::Vector3d::Zero();  // sum of position-term grads of rows > t
      for (int t = T - 1; t >= 0; --t) {
        const int c = t * B + w;
        Eigen::Vector3d gi;
        for (int i = 0; i < 3; ++i) gi(i) = lc.w_inc * huber_d(E(i, c), lc.delta_inc) / n_el;
        d.col(c) = gi + tail + gend;
        for (int i = 0; i < 3; ++i) tail(i) += lc.w_pos * huber_d(epos(i, c), lc.delta_pos) / n_el;
      }
    }
    g.accumulate(dp, d * go(0, 0));
  }, "composite_loss");
}

double composite_loss(const Mat& dp, const Mat& p_hat, const Mat& P, const LossConfig& lc) {
  const auto T = dp.rows();
  if (dp.cols() != 3 || p_hat.rows() != T + 1 || p_hat.cols() != 3 || P.rows() != T + 1 || P.cols() != 3)
    fail(ErrorCode::kDimensionMismatch, "composite_loss: shape mismatch");
  double inc = 0.0, pos = 0.0;
  for (Eigen::Index t = 0; t < T; ++t)
    for (int i = 0; i < 3; ++i) {
      inc += nn::huber(dp(t, i) - (P(t + 1, i) - P(t, i)), lc.delta_inc);
      pos += nn::huber(p_hat(t, i) - P(t, i), lc.delta_pos);
    }
  const double end = nn::huber((p_hat.row(T) - P.row(T)).norm(), lc.delta_end);
  const double n = 3.0 * static_cast<double>(T);
  return lc.w_inc * inc / n + lc.w_pos * pos / n + lc.w_end * end;
}

UwbFeatures uwb_features(Model& m, const Mat& d_filled, const Mat& M, const Mat& tau) {
  FusionWindow w;
  w.D = d_filled;
  w.M = M;
  w.tau = tau;
  w.U = Mat::Zero(M.rows(), 3);
  const FusionWindow* p = &w;
  Batch b = make_batch(std::span<const FusionWindow* const>(&p, 1), m.stats, m.cfg.n_anchors);
  // The caller's ranges are already filled; use them as given.
  for (int t = 0; t < b.T; ++t)
    for (int a = 0; a < b.NA; ++a) b.dn(0, t * b.NA + a) = (d_filled(t, a) - m.stats.mu(a)) / (m.stats.sigma(a) + kEps);
  Graph g(false);
  const ForwardOut o = forward(g, m, b);
  UwbFeatures f;
  f.h_uwb = g.value(o.h_uwb).transpose();
  f.q = g.value(o.q).row(0).transpose();
  f.q_raw = b.qraw.row(0).transpose();
  f.mt = Mat(b.T, b.NA);
  for (int t = 0; t < b.T; ++t)
    for (int a = 0; a < b.NA; ++a) f.mt(t, a) = g.value(o.mt)(0, t * b.NA + a);
  f.q_decay = Vec(b.T);
  for (int t = 0; t < b.T; ++t) f.q_decay(t) = f.mt.row(t).mean();
  return f;
}

FuseOut fuse_step(Model& m, const Vec& h_imu, const Vec& h_uwb, double q, double q_raw, const FuseState& st,
                  std::optional<double> force_alpha) {
  const int h = m.cfg.hidden;
  if (h_imu.size() != h || h_uwb.size() != h) fail(ErrorCode::kDimensionMismatch, "fuse_step: feature size");
  Graph g(false);
  const Var vi = g.input(h_imu), vu = g.input(h_uwb), vq = g.input(Mat::Constant(1, 1, q));
  const Mat qraw = Mat::Constant(1, 1, q_raw);
  Var alpha;
  if (force_alpha) alpha = g.input(Mat::Constant(1, 1, *force_alpha));
  else if (!m.cfg.att) alpha = g.input(Mat::Constant(1, 1, 0.5));
  else alpha = clamp_alpha(g, g.sigmoid(nn::forward(g, m.gate, g.concat_rows({vi, vu, vq}))), qraw, m.cfg.alpha_min);
  const Var att = gate_mix_op(g, alpha, vi, vu);
  const nn::LstmVars lv = nn::bind(g, m.lstm);
  const Var z = g.concat_rows({vi, vu, vq, g.input(Mat::Constant(1, 1, m.stats.q_prior))});
  const Var h0 = g.input(st.h.size() ? Mat(st.h) : Mat(Mat::Zero(h, 1)));
  const Var c0 = g.input(st.c.size() ? Mat(st.c) : Mat(Mat::Zero(h, 1)));
  const auto [h1, c1] = nn::lstm_step(g, lv, z, h0, c0);
  FuseOut o;
  o.h_rnn = g.value(h1).col(0);
  o.alpha = g.value(alpha)(0, 0);
  o.h_att = g.value(att).col(0);
  o.state = {g.value(h1).col(0), g.value(c1).col(0)};
  return o;
}

Mat predict_deltas(Model& m, const FusionWindow& w) {
  const FusionWindow* p = &w;
  const Batch b = make_batch(std::span<const FusionWindow* const>(&p, 1), m.stats, m.cfg.n_anchors);
  Graph g(false);
  const ForwardOut o = forward(g, m, b);
  return g.value(o.dp).transpose();
}

double snap(double v) {
  constexpr double q = 0x1.0p-32;
  require(std::abs(v) < 0x1.0p20, ErrorCode::kOutOfBounds, "position exceeds the accumulation lattice range");
  return std::nearbyint(v / q) * q;
}

Mat accumulate(const Mat& dp, const Vec3& p_start) {
  require(dp.cols() == 3, ErrorCode::kDimensionMismatch, "accumulate expects T x 3 increments");
  Mat p(dp.rows() + 1, 3);
  for (int i = 0; i < 3; ++i) p(0, i) = snap(p_start(i));
  for (Eigen::Index t = 0; t < dp.rows(); ++t)
    for (int i = 0; i < 3; ++i) p(t + 1, i) = snap(p(t, i) + snap(dp(t, i)));
  return p;
}

namespace {

struct Outputs {
  std::vector<Mat> dp;     // per window T x 3
  std::vector<Vec> alpha;  // per window T
};

Outputs run_windows(Model& m, const std::vector<FusionWindow>& ws, std::optional<double> fixed_alpha) {
  Outputs out;
  out.dp.resize(ws.size());
  out.alpha.resize(ws.size());
  std::map<int, std::vector<std::size_t>> by_len;
  for (std::size_t i = 0; i < ws.size(); ++i) by_len[ws[i].steps()].push_back(i);
  for (const auto& [len, idx] : by_len) {
    std::vector<const FusionWindow*> ptrs;
    for (std::size_t i : idx) ptrs.push_back(&ws[i]);
    const Batch b = make_batch(ptrs, m.stats, m.cfg.n_anchors);
    Graph g(false);
    ForwardOptions fo;
    fo.fixed_alpha = fixed_alpha;
    const ForwardOut o = forward(g, m, b, fo);
    const Mat& dp = g.value(o.dp);
    const Mat& al = g.value(o.alpha);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      Mat d(len, 3);
      Vec a(len);
      for (int t = 0; t < len; ++t) {
        d.row(t) = dp.col(t * b.B + static_cast<int>(j)).transpose();
        a(t) = al(0, t * b.B + static_cast<int>(j));
      }
      out.dp[idx[j]] = std::move(d);
      out.alpha[idx[j]] = std::move(a);
    }
  }
  return out;
}

double validation_error(Model& m, const std::vector<FusionWindow>& ws, std::optional<double> fixed_alpha) {
  const Outputs o = run_windows(m, ws, fixed_alpha);
  double s = 0.0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const Eigen::RowVector3d end = ws[i].P.row(0) + o.dp[i].colwise().sum();
    s += (end - ws[i].P.row(ws[i].steps())).norm();
  }
  return s / static_cast<double>(ws.size());
}

}  // namespace

TrainResult train(const dataset::Series& s, const dataset::Split& split, const TrainConfig& tc0,
                  const FakeResidualSource& fake) {
  if (split.train.empty() || split.val.empty()) fail(ErrorCode::kEmptySplit, "train or validation split is empty");
  TrainConfig tc = tc0;
  tc.model.n_anchors = s.n_anchors;
  const Stats st = compute_stats(s, split.train);
  Model m(tc.model, st, tc.seed);
  const auto train_w = dataset::sliding_windows(s, split.train, tc.window, tc.stride);
  const auto val_w = dataset::tiled_windows(s, split.val, tc.window);
  if (train_w.empty()) fail(ErrorCode::kEmptySplit, "no training windows fit in the training split");
  if (tc.aug.enabled && !fake) fail(ErrorCode::kInvalidArgument, "augmentation enabled without a residual source");

  nn::AdamConfig ac;
  ac.lr = tc.lr;
  ac.weight_decay = tc.weight_decay;
  nn::Adam opt(m.ps, ac);
  Rng rng(tc.seed * 0x9E3779B97F4A7C15ULL + 17);

  TrainResult res;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Mat> best_params;
  int bad = 0, since_best_or_cut = 0;
  std::vector<std::size_t> order(train_w.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    const bool warm = epoch < tc.warmup_epochs;
    if (m.decay) m.decay->frozen = warm;
    double p_aug = 0.0;
    if (tc.aug.enabled && !warm)
      p_aug = tc.aug.p_max *
              std::min(1.0, static_cast<double>(epoch - tc.warmup_epochs + 1) / std::max(tc.aug.ramp_epochs, 1));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
      std::swap(order[i], order[j]);
    }
    double loss_sum = 0.0;
    int n_batches = 0;
    std::size_t n_windows = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(tc.batch)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(tc.batch));
      std::vector<FusionWindow> augmented;
      augmented.reserve(end - at);
      std::vector<const FusionWindow*> ptrs;
      for (std::size_t k = at; k < end; ++k) {
        const FusionWindow& w = train_w[order[k]];
        if (p_aug > 0.0 && uniform01(rng) < p_aug) {
          augmented.push_back(augment::mix_and_inject(w, fake, tc.aug.alpha_gan, tc.aug.subset_frac, rng));
          ptrs.push_back(&augmented.back());
        } else {
          ptrs.push_back(&w);
        }
      }
      const Batch b = make_batch(ptrs, m.stats, m.cfg.n_anchors);
      m.ps.zero_grad();
      try {
        Graph g;
        ForwardOptions fo;
        if (warm) fo.fixed_alpha = 0.5;
        const ForwardOut o = forward(g, m, b, fo);
        const Var loss = composite_loss(g, o.dp, b, tc.loss);
        loss_sum += g.scalar(loss) * static_cast<double>(ptrs.size());
        n_windows += ptrs.size();
        g.backward(loss);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFinite) throw;
        fail(ErrorCode::kNonFinite, "training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(n_batches) + ": " + e.what());
      }
      opt.step();
      ++n_batches;
    }
    res.train_loss.push_back(loss_sum / static_cast<double>(n_windows));
    const double val = validation_error(m, val_w, warm ? std::optional<double>(0.5) : std::nullopt);
    res.val_error.push_back(val);
    if (warm) continue;
    if (val < best) {
      best = val;
      res.best_epoch = epoch;
      best_params.clear();
      for (const auto& p : m.ps) best_params.push_back(p->value);
      bad = 0;
      since_best_or_cut = 0;
    } else {
      ++bad;
      if (++since_best_or_cut >= tc.plateau) {
        opt.set_lr(opt.lr() * tc.lr_factor);
        since_best_or_cut = 0;
      }
      if (bad >= tc.patience) break;
    }
  }
  if (!best_params.empty()) {
    std::size_t k = 0;
    for (auto& p : m.ps) p->value = best_params[k++];
  }
  if (m.decay) m.decay->frozen = false;
  res.checkpoint = to_checkpoint(m, tc);
  res.checkpoint.meta = {{"best_epoch", res.best_epoch},
                         {"epochs_run", static_cast<int>(res.train_loss.size())},
                         {"best_val_endpoint_error", best},
                         {"train_loss", res.train_loss},
                         {"val_endpoint_error", res.val_error}};
  return res;
}

Inference infer_range(Model& m, const dataset::Series& s, dataset::Range r, const Vec3& p_start, int window,
                      bool per_window) {
  require(r.begin >= 0 && r.end <= s.steps && r.begin <= r.end, ErrorCode::kInvalidArgument, "range outside series");
  require(!per_window || s.has_truth, ErrorCode::kMissingTruth, "per-window mode needs truth positions");
  Inference inf;
  const int n = r.end - r.begin;
  inf.p = Mat(n + 1, 3);
  inf.alpha = Vec(n);
  inf.visible = Vec(n);
  inf.p.row(0) = accumulate(Mat(0, 3), p_start).row(0);
  if (n == 0) return inf;
  const auto ws = dataset::tiled_windows(s, {r}, window);
  const Outputs o = run_windows(m, ws, std::nullopt);
  int off = 0;
  Vec3 start = p_start;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (per_window) start = s.P.row(ws[i].start).transpose();
    const Mat p = accumulate(o.dp[i], start);
    const int len = ws[i].steps();
    inf.p.middleRows(off + 1, len) = p.bottomRows(len);
    inf.alpha.segment(off, len) = o.alpha[i];
    for (int t = 0; t < len; ++t) inf.visible(off + t) = ws[i].M.row(t).sum();
    start = p.row(len).transpose();
    off += len;
  }
  return inf;
}

}  // namespace aoif::fusionnet
