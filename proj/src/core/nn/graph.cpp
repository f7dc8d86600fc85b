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

#include "aoifuse/nn/graph.hpp"

#include <cmath>

namespace aoif::nn {

Param& ParamSet::add(const std::string& name, Mat init) {
  require(!contains(name), ErrorCode::kInvalidArgument, "duplicate parameter name");
  auto p = std::make_unique<Param>();
  p->name = name;
  p->grad = Mat::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

Param& ParamSet::at(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  fail(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
}

const Param& ParamSet::at(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return *p;
  fail(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return true;
  return false;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

Mat sigmoid(const Mat& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }
Mat softplus(const Mat& x) { return x.unaryExpr([](double v) { return softplus(v); }); }

Var Graph::input(Mat value) { return custom(std::move(value), {}, nullptr, "input"); }

Var Graph::param(Param& p) {
  Var v = custom(p.value, {}, nullptr, "param");
  nodes_[v.id].param = &p;
  nodes_[v.id].needs_grad = record_ && !p.frozen;
  return v;
}

Var Graph::custom(Mat value, std::vector<Var> parents, Backward back, const char* op) {
  if (!value.allFinite()) fail(ErrorCode::kNonFinite, std::string("non-finite value produced by ") + op);
  Node n;
  n.value = std::move(value);
  for (Var p : parents) n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::accumulate(Var v, const Mat& g) {
  Node& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = g;
  else n.grad += g;
}

double Graph::scalar(Var v) const {
  const Mat& m = nodes_[v.id].value;
  require(m.size() == 1, ErrorCode::kDimensionMismatch, "scalar() on a non-scalar node");
  return m(0, 0);
}

void Graph::backward(Var loss) {
  require(nodes_[loss.id].value.size() == 1, ErrorCode::kDimensionMismatch, "loss must be 1x1");
  if (!nodes_[loss.id].needs_grad) return;
  nodes_[loss.id].grad = Mat::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param) {
      if (!n.grad.allFinite()) fail(ErrorCode::kNonFinite, "non-finite gradient for " + n.param->name);
      n.param->grad += n.grad;
    } else if (n.back) {
      const Mat g = n.grad;
      n.back(g);
    }
  }
}

namespace {
void check_same(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorCode::kDimensionMismatch, std::string(op) + ": shape mismatch");
}
}  // namespace

Var Graph::add(Var a, Var b) {
  check_same(value(a), value(b), "add");
  return custom(value(a) + value(b), {a, b}, [this, a, b](const Mat& g) {
    accumulate(a, g);
    accumulate(b, g);
  }, "add");
}

Var Graph::sub(Var a, Var b) {
  check_same(value(a), value(b), "sub");
  return custom(value(a) - value(b), {a, b}, [this, a, b](const Mat& g) {
    accumulate(a, g);
    accumulate(b, -g);
  }, "sub");
}

Var Graph::mul(Var a, Var b) {
  check_same(value(a), value(b), "mul");
  return custom(value(a).cwiseProduct(value(b)), {a, b}, [this, a, b](const Mat& g) {
    if (needs_grad(a)) accumulate(a, g.cwiseProduct(value(b)));
    if (needs_grad(b)) accumulate(b, g.cwiseProduct(value(a)));
  }, "mul");
}

Var Graph::scale(Var a, double s) {
  return custom(s * value(a), {a}, [this, a, s](const Mat& g) { accumulate(a, s * g); }, "scale");
}

Var Graph::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) fail(ErrorCode::kDimensionMismatch, "matmul: inner dimensions differ");
  return custom(value(a) * value(b), {a, b}, [this, a, b](const Mat& g) {
    if (needs_grad(a)) accumulate(a, g * value(b).transpose());
    if (needs_grad(b)) accumulate(b, value(a).transpose() * g);
  }, "matmul");
}

Var Graph::affine(Var w, Var x, Var b) {
  const Mat& W = value(w);
  const Mat& X = value(x);
  const Mat& B = value(b);
  if (W.cols() != X.rows() || B.rows() != W.rows() || B.cols() != 1)
    fail(ErrorCode::kDimensionMismatch, "affine: shape mismatch");
  Mat out = W * X;
  out.colwise() += B.col(0);
  return custom(std::move(out), {w, x, b}, [this, w, x, b](const Mat& g) {
    if (needs_grad(w)) accumulate(w, g * value(x).transpose());
    if (needs_grad(x)) accumulate(x, value(w).transpose() * g);
    if (needs_grad(b)) accumulate(b, g.rowwise().sum());
  }, "affine");
}

Var Graph::mul_row(Var a, Var r) {
  const Mat& A = value(a);
  const Mat& R = value(r);
  if (R.rows() != 1 || R.cols() != A.cols()) fail(ErrorCode::kDimensionMismatch, "mul_row: shape mismatch");
  Mat out = A.array().rowwise() * R.row(0).array();
  return custom(std::move(out), {a, r}, [this, a, r](const Mat& g) {
    if (needs_grad(a)) accumulate(a, (g.array().rowwise() * value(r).row(0).array()).matrix());
    if (needs_grad(r)) accumulate(r, g.cwiseProduct(value(a)).colwise().sum());
  }, "mul_row");
}

Var Graph::tanh(Var a) {
  Mat out = value(a).array().tanh().matrix();
  const int id = static_cast<int>(nodes_.size());
  return custom(std::move(out), {a}, [this, a, id](const Mat& g) {
    const Mat& y = nodes_[id].value;
    accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  }, "tanh");
}

Var Graph::sigmoid(Var a) {
  Mat out = nn::sigmoid(value(a));
  const int id = static_cast<int>(nodes_.size());
  return custom(std::move(out), {a}, [this, a, id](const Mat& g) {
    const Mat& y = nodes_[id].value;
    accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  }, "sigmoid");
}

Var Graph::softplus(Var a) {
  return custom(nn::softplus(value(a)), {a}, [this, a](const Mat& g) {
    accumulate(a, g.cwiseProduct(nn::sigmoid(value(a))));
  }, "softplus");
}

Var Graph::exp(Var a) {
  Mat out = value(a).array().exp().matrix();
  const int id = static_cast<int>(nodes_.size());
  return custom(std::move(out), {a}, [this, a, id](const Mat& g) {
    accumulate(a, g.cwiseProduct(nodes_[id].value));
  }, "exp");
}

Var Graph::rows(Var a, int r0, int n) {
  const Mat& A = value(a);
  if (r0 < 0 || n < 0 || r0 + n > A.rows()) fail(ErrorCode::kDimensionMismatch, "rows: range out of bounds");
  return custom(A.middleRows(r0, n), {a}, [this, a, r0, n](const Mat& g) {
    Mat full = Mat::Zero(value(a).rows(), value(a).cols());
    full.middleRows(r0, n) = g;
    accumulate(a, full);
  }, "rows");
}

Var Graph::cols(Var a, int c0, int n) {
  const Mat& A = value(a);
  if (c0 < 0 || n < 0 || c0 + n > A.cols()) fail(ErrorCode::kDimensionMismatch, "cols: range out of bounds");
  return custom(A.middleCols(c0, n), {a}, [this, a, c0, n](const Mat& g) {
    Node& node = nodes_[a.id];
    if (!node.needs_grad) return;
    if (node.grad.size() == 0) node.grad = Mat::Zero(node.value.rows(), node.value.cols());
    node.grad.middleCols(c0, n) += g;
  }, "cols");
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_rows of nothing");
  const auto c = value(parts[0]).cols();
  Eigen::Index r = 0;
  for (Var p : parts) {
    if (value(p).cols() != c) fail(ErrorCode::kDimensionMismatch, "concat_rows: column counts differ");
    r += value(p).rows();
  }
  Mat out(r, c);
  r = 0;
  for (Var p : parts) {
    out.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  return custom(std::move(out), parts, [this, parts](const Mat& g) {
    Eigen::Index off = 0;
    for (Var p : parts) {
      const auto n = value(p).rows();
      if (needs_grad(p)) accumulate(p, g.middleRows(off, n));
      off += n;
    }
  }, "concat_rows");
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_cols of nothing");
  const auto r = value(parts[0]).rows();
  Eigen::Index c = 0;
  for (Var p : parts) {
    if (value(p).rows() != r) fail(ErrorCode::kDimensionMismatch, "concat_cols: row counts differ");
    c += value(p).cols();
  }
  Mat out(r, c);
  c = 0;
  for (Var p : parts) {
    out.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
  }
  return custom(std::move(out), parts, [this, parts](const Mat& g) {
    Eigen::Index off = 0;
    for (Var p : parts) {
      const auto n = value(p).cols();
      if (needs_grad(p)) accumulate(p, g.middleCols(off, n));
      off += n;
    }
  }, "concat_cols");
}

Var Graph::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return custom(std::move(out), {a}, [this, a](const Mat& g) {
    accumulate(a, Mat::Constant(value(a).rows(), value(a).cols(), g(0, 0)));
  }, "sum");
}

Var Graph::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  require(n > 0, ErrorCode::kInvalidArgument, "mean of an empty matrix");
  Mat out(1, 1);
  out(0, 0) = value(a).sum() / n;
  return custom(std::move(out), {a}, [this, a, n](const Mat& g) {
    accumulate(a, Mat::Constant(value(a).rows(), value(a).cols(), g(0, 0) / n));
  }, "mean");
}

Var Graph::lstm_cell(Var gates, Var c_prev) {
  const Mat& G = value(gates);
  const Mat& C = value(c_prev);
  const auto h = C.rows();
  if (G.rows() != 4 * h || G.cols() != C.cols()) fail(ErrorCode::kDimensionMismatch, "lstm_cell: shape mismatch");
  const Mat i = nn::sigmoid(G.middleRows(0, h));
  const Mat f = nn::sigmoid(G.middleRows(h, h));
  const Mat gg = G.middleRows(2 * h, h).array().tanh().matrix();
  Mat out = f.cwiseProduct(C) + i.cwiseProduct(gg);
  return custom(std::move(out), {gates, c_prev}, [this, gates, c_prev, h](const Mat& dc) {
    const Mat& G = value(gates);
    const Mat& C = value(c_prev);
    const Mat i = nn::sigmoid(G.middleRows(0, h));
    const Mat f = nn::sigmoid(G.middleRows(h, h));
    const Mat gg = G.middleRows(2 * h, h).array().tanh().matrix();
    if (needs_grad(gates)) {
      Mat dG = Mat::Zero(G.rows(), G.cols());
      dG.middleRows(0, h) = (dc.array() * gg.array() * i.array() * (1.0 - i.array())).matrix();
      dG.middleRows(h, h) = (dc.array() * C.array() * f.array() * (1.0 - f.array())).matrix();
      dG.middleRows(2 * h, h) = (dc.array() * i.array() * (1.0 - gg.array().square())).matrix();
      accumulate(gates, dG);
    }
    if (needs_grad(c_prev)) accumulate(c_prev, dc.cwiseProduct(f));
  }, "lstm_cell");
}

Var Graph::lstm_hidden(Var gates, Var c) {
  const Mat& G = value(gates);
  const Mat& C = value(c);
  const auto h = C.rows();
  if (G.rows() != 4 * h || G.cols() != C.cols()) fail(ErrorCode::kDimensionMismatch, "lstm_hidden: shape mismatch");
  const Mat o = nn::sigmoid(G.middleRows(3 * h, h));
  Mat out = o.cwiseProduct(C.array().tanh().matrix());
  return custom(std::move(out), {gates, c}, [this, gates, c, h](const Mat& dh) {
    const Mat& G = value(gates);
    const Mat tc = value(c).array().tanh().matrix();
    const Mat o = nn::sigmoid(G.middleRows(3 * h, h));
    if (needs_grad(gates)) {
      Mat dG = Mat::Zero(G.rows(), G.cols());
      dG.middleRows(3 * h, h) = (dh.array() * tc.array() * o.array() * (1.0 - o.array())).matrix();
      accumulate(gates, dG);
    }
    if (needs_grad(c)) accumulate(c, (dh.array() * o.array() * (1.0 - tc.array().square())).matrix());
  }, "lstm_hidden");
}

}  // namespace aoif::nn
