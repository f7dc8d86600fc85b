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

// Reverse-mode differentiation over a dynamically recorded graph of matrix
// operations. Activations are laid out features x batch (one column per
// sample); every op checks its output for NaN/Inf.

#ifndef AOIFUSE_NN_GRAPH_HPP_
#define AOIFUSE_NN_GRAPH_HPP_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "aoifuse/common.hpp"

namespace aoif::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool frozen = false;
};

// Ordered, owning collection of named parameters.
class ParamSet {
 public:
  Param& add(const std::string& name, Mat init);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  void zero_grad();
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

struct Var {
  int id = -1;
};

class Graph {
 public:
  using Backward = std::function<void(const Mat& gout)>;

  // With record_grad off no backward closures are kept (inference).
  explicit Graph(bool record_grad = true) : record_(record_grad) {}

  Var input(Mat value);
  // Leaf bound to a parameter; backward accumulates into p.grad unless the
  // parameter is frozen.
  Var param(Param& p);

  // Records an op. `back` receives the output gradient and must call
  // accumulate() for each parent that needs it.
  Var custom(Mat value, std::vector<Var> parents, Backward back, const char* op);
  void accumulate(Var v, const Mat& g);
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }

  // Seeds d(loss)/d(loss) = 1 on a 1x1 node and propagates to parameters.
  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);
  // W x + b with b (rows x 1) broadcast over columns.
  Var affine(Var w, Var x, Var b);
  // a (r x c) times row vector r (1 x c), broadcast over rows.
  Var mul_row(Var a, Var r);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var exp(Var a);
  Var rows(Var a, int r0, int n);
  Var cols(Var a, int c0, int n);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var sum(Var a);
  Var mean(Var a);
  // Cell update c' = sigma(f) * c + sigma(i) * tanh(g) for gates [i; f; g; o].
  Var lstm_cell(Var gates, Var c_prev);
  // Hidden output h = sigma(o) * tanh(c).
  Var lstm_hidden(Var gates, Var c);

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward back;
    Param* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_ = true;
};

double sigmoid(double x);
double softplus(double x);
Mat sigmoid(const Mat& x);
Mat softplus(const Mat& x);

}  // namespace aoif::nn

#endif  // AOIFUSE_NN_GRAPH_HPP_
