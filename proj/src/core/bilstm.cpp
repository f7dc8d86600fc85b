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

#include "aoifuse/bilstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "aoifuse/fusionnet.hpp"
#include "aoifuse/nn/optim.hpp"

namespace aoif::bilstm {

using nn::Graph;
using nn::Var;

json::Json to_json(const BilstmConfig& c) {
  return {{"window", c.window}, {"layers", c.layers},     {"hidden", c.hidden},
          {"lr", c.lr},         {"batch", c.batch},       {"stride", c.stride},
          {"max_epochs", c.max_epochs}, {"patience", c.patience}, {"W", {c.W(0), c.W(1), c.W(2)}},
          {"seed", c.seed}};
}

BilstmConfig bilstm_config_from_json(const json::Json& j) {
  json::check_keys(j, {"window", "layers", "hidden", "lr", "batch", "stride", "max_epochs", "patience", "W", "seed"},
                   "bilstm config");
  BilstmConfig c;
  try {
    c.window = j.value("window", c.window);
    c.layers = j.value("layers", c.layers);
    c.hidden = j.value("hidden", c.hidden);
    c.lr = j.value("lr", c.lr);
    c.batch = j.value("batch", c.batch);
    c.stride = j.value("stride", c.stride);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    if (j.contains("W")) c.W = json::vec3(j["W"]);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("bilstm config: ") + e.what());
  }
  require(c.window > 0 && c.layers > 0 && c.hidden > 0 && c.batch > 0 && c.stride > 0 && c.max_epochs > 0 &&
              c.patience > 0,
          ErrorCode::kInvalidArgument, "bilstm sizes must be > 0");
  require((c.W.array() > 0.0).all(), ErrorCode::kInvalidArgument, "loss weights must be > 0");
  return c;
}

FeatureStats compute_feature_stats(const dataset::Series& s, const std::vector<dataset::Range>& train) {
  require(!train.empty(), ErrorCode::kEmptySplit, "empty training split");
  Eigen::Matrix<double, 6, 1> sum = Eigen::Matrix<double, 6, 1>::Zero(), sq = sum;
  double n = 0.0;
  for (const auto& r : train)
    for (int k = r.begin; k < r.end; ++k) {
      Eigen::Matrix<double, 6, 1> f;
      f << s.U.row(k).transpose(), s.Fix.row(k).transpose();
      sum += f;
      sq += f.cwiseProduct(f);
      n += 1.0;
    }
  FeatureStats st;
  st.mean = sum / n;
  for (int i = 0; i < 6; ++i) st.scale(i) = std::max(std::sqrt(std::max(sq(i) / n - st.mean(i) * st.mean(i), 0.0)), 1e-6);
  return st;
}

Model::Model(const BilstmConfig& c, const FeatureStats& st, std::uint64_t seed) : cfg(c), stats(st) {
  Rng rng(seed);
  int in = 6;
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    Direction d;
    d.fwd = nn::make_lstm(ps, p + ".fwd", in, c.hidden, rng);
    d.bwd = nn::make_lstm(ps, p + ".bwd", in, c.hidden, rng);
    layers.push_back(d);
    in = 2 * c.hidden;
  }
  head = nn::make_dense(ps, "head", 2 * c.hidden, 3, rng);
}

Mat features(const dataset::FusionWindow& w) {
  Mat f(w.steps(), 6);
  f << w.U, w.Fix;
  return f;
}

namespace {

Var run_direction(Graph& g, const nn::Lstm& l, Var x, int T, int B, bool reverse) {
  const nn::LstmVars lv = nn::bind(g, l);
  const Var gx = g.affine(lv.wx, x, lv.b);
  Var h = g.input(Mat::Zero(l.hidden, B));
  Var c = g.input(Mat::Zero(l.hidden, B));
  std::vector<Var> outs(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) {
    const int t = reverse ? T - 1 - i : i;
    const Var gates = g.add(g.cols(gx, t * B, B), g.matmul(lv.wh, h));
    c = g.lstm_cell(gates, c);
    h = g.lstm_hidden(gates, c);
    outs[static_cast<std::size_t>(t)] = h;
  }
  return g.concat_cols(outs);
}

Mat standardise(const Model& m, const Mat& raw) {
  Mat x(6, raw.rows());
  for (int i = 0; i < 6; ++i) x.row(i) = (raw.col(i).transpose().array() - m.stats.mean(i)) / m.stats.scale(i);
  return x;
}

Mat batch_features(const Model& m, const std::vector<const dataset::FusionWindow*>& ws) {
  const int T = ws[0]->steps();
  const int B = static_cast<int>(ws.size());
  Mat x(6, T * B);
  for (int b = 0; b < B; ++b) {
    const Mat xb = standardise(m, features(*ws[static_cast<std::size_t>(b)]));
    for (int t = 0; t < T; ++t) x.col(t * B + b) = xb.col(t);
  }
  return x;
}

std::vector<Mat> run_windows(Model& m, const std::vector<dataset::FusionWindow>& ws) {
  std::vector<Mat> out(ws.size());
  std::map<int, std::vector<std::size_t>> by_len;
  for (std::size_t i = 0; i < ws.size(); ++i) by_len[ws[i].steps()].push_back(i);
  for (const auto& [len, idx] : by_len) {
    std::vector<const dataset::FusionWindow*> ptrs;
    for (std::size_t i : idx) ptrs.push_back(&ws[i]);
    const int B = static_cast<int>(idx.size());
    Graph g(false);
    const Mat& dp = g.value(forward(g, m, g.input(batch_features(m, ptrs)), len, B));
    for (int j = 0; j < B; ++j) {
      Mat d(len, 3);
      for (int t = 0; t < len; ++t) d.row(t) = dp.col(t * B + j).transpose();
      out[idx[static_cast<std::size_t>(j)]] = std::move(d);
    }
  }
  return out;
}

}  // namespace

Var forward(Graph& g, Model& m, Var x, int T, int B) {
  require(g.value(x).rows() == 6 && g.value(x).cols() == T * B, ErrorCode::kDimensionMismatch,
          "bilstm input must be 6 x TB");
  Var h = x;
  for (const auto& d : m.layers)
    h = g.concat_rows({run_direction(g, d.fwd, h, T, B, false), run_direction(g, d.bwd, h, T, B, true)});
  return nn::forward(g, m.head, h);
}

Mat bilstm_forward(Model& m, const Mat& raw_features) {
  if (raw_features.cols() != 6) fail(ErrorCode::kDimensionMismatch, "bilstm features must be T x 6");
  const int T = static_cast<int>(raw_features.rows());
  Graph g(false);
  return g.value(forward(g, m, g.input(standardise(m, raw_features)), T, 1)).transpose();
}

nn::Checkpoint to_checkpoint(const Model& m) {
  nn::Checkpoint ck;
  ck.model = "bilstm";
  ck.config = to_json(m.cfg);
  ck.config_hash = nn::config_hash(ck.config);
  ck.seed = m.cfg.seed;
  nn::capture(m.ps, ck);
  ck.stats = {{"mean", std::vector<double>(m.stats.mean.data(), m.stats.mean.data() + 6)},
              {"scale", std::vector<double>(m.stats.scale.data(), m.stats.scale.data() + 6)}};
  return ck;
}

Model model_from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.model != "bilstm") fail(ErrorCode::kParse, "checkpoint holds a '" + ck.model + "' model, not bilstm");
  FeatureStats st;
  try {
    const auto mean = ck.stats.at("mean").get<std::vector<double>>();
    const auto scale = ck.stats.at("scale").get<std::vector<double>>();
    require(mean.size() == 6 && scale.size() == 6, ErrorCode::kParse, "bilstm stats must have 6 entries");
    for (int i = 0; i < 6; ++i) {
      st.mean(i) = mean[static_cast<std::size_t>(i)];
      st.scale(i) = scale[static_cast<std::size_t>(i)];
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("bilstm checkpoint stats: ") + e.what());
  }
  Model m(bilstm_config_from_json(ck.config), st, ck.seed);
  nn::restore(ck, m.ps);
  return m;
}

TrainResult train(const dataset::Series& s, const dataset::Split& split, const BilstmConfig& cfg) {
  if (split.train.empty() || split.val.empty()) fail(ErrorCode::kEmptySplit, "train or validation split is empty");
  require(s.has_truth, ErrorCode::kMissingTruth, "training needs truth positions");
  Model m(cfg, compute_feature_stats(s, split.train), cfg.seed);
  const auto train_w = dataset::sliding_windows(s, split.train, cfg.window, cfg.stride);
  const auto val_w = dataset::tiled_windows(s, split.val, cfg.window);
  if (train_w.empty()) fail(ErrorCode::kEmptySplit, "no training windows fit in the training split");

  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  nn::Adam opt(m.ps, ac);
  Rng rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 29);
  std::vector<std::size_t> order(train_w.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult res;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Mat> best_params;
  int bad = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
      std::swap(order[i], order[j]);
    }
    double loss_sum = 0.0;
    std::size_t n_windows = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch));
      std::vector<const dataset::FusionWindow*> ptrs;
      for (std::size_t k = at; k < end; ++k) ptrs.push_back(&train_w[order[k]]);
      const int T = cfg.window, B = static_cast<int>(ptrs.size());
      Mat target(3, T * B);
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t)
          target.col(t * B + b) = (ptrs[static_cast<std::size_t>(b)]->P.row(t + 1) -
                                   ptrs[static_cast<std::size_t>(b)]->P.row(t)).transpose();
      m.ps.zero_grad();
      try {
        Graph g;
        const Var dp = forward(g, m, g.input(batch_features(m, ptrs)), T, B);
        const Var loss = nn::wmse(g, dp, target, cfg.W);
        loss_sum += g.scalar(loss) * B;
        n_windows += static_cast<std::size_t>(B);
        g.backward(loss);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFinite) throw;
        fail(ErrorCode::kNonFinite, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      opt.step();
    }
    res.train_loss.push_back(loss_sum / static_cast<double>(n_windows));
    const auto out = run_windows(m, val_w);
    double val = 0.0;
    for (std::size_t i = 0; i < val_w.size(); ++i) {
      const Eigen::RowVector3d end = val_w[i].P.row(0) + out[i].colwise().sum();
      val += (end - val_w[i].P.row(val_w[i].steps())).norm();
    }
    val /= static_cast<double>(val_w.size());
    res.val_error.push_back(val);
    if (val < best) {
      best = val;
      res.best_epoch = epoch;
      best_params.clear();
      for (const auto& p : m.ps) best_params.push_back(p->value);
      bad = 0;
    } else if (++bad >= cfg.patience) {
      break;
    }
  }
  std::size_t k = 0;
  for (auto& p : m.ps) p->value = best_params[k++];
  res.checkpoint = to_checkpoint(m);
  res.checkpoint.meta = {{"best_epoch", res.best_epoch},
                         {"epochs_run", static_cast<int>(res.train_loss.size())},
                         {"best_val_endpoint_error", best},
                         {"train_loss", res.train_loss},
                         {"val_endpoint_error", res.val_error}};
  return res;
}

Mat infer_range(Model& m, const dataset::Series& s, dataset::Range r, const Vec3& p_start, int window) {
  require(r.begin >= 0 && r.end <= s.steps && r.begin <= r.end, ErrorCode::kInvalidArgument, "range outside series");
  const int n = r.end - r.begin;
  Mat p(n + 1, 3);
  p.row(0) = fusionnet::accumulate(Mat(0, 3), p_start).row(0);
  if (n == 0) return p;
  const auto ws = dataset::tiled_windows(s, {r}, window);
  const auto out = run_windows(m, ws);
  int off = 0;
  Vec3 start = p_start;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const Mat pw = fusionnet::accumulate(out[i], start);
    const int len = ws[i].steps();
    p.middleRows(off + 1, len) = pw.bottomRows(len);
    start = pw.row(len).transpose();
    off += len;
  }
  return p;
}

}  // namespace aoif::bilstm
