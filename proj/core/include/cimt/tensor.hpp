// Copyright 2026 The Causal-IMT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense float64 tensors recorded on a dynamic reverse-mode graph.
//
// Every op allocates a Node holding its value, the handles of its inputs and
// a local backward rule. backward() linearises the nodes reachable from a
// scalar root into a Tape (inputs before outputs) and replays the rules in
// reverse. Leaf gradients accumulate across backward() calls until
// zero_grad(); interior gradients are reset on every replay.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cimt {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Backward rule: reads `self.grad` and accumulates into the grads of
// `self.parents` that require grad.
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;

  bool is_leaf() const { return parents.empty(); }
  // Sizes grad to match value (zero-filled) if it has not been allocated.
  std::vector<double>& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> values() const;
  // Mutable access for leaves (parameters, inputs). Mutating an interior
  // node's value after it was recorded invalidates its backward rule.
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  // Empty span while no gradient has been accumulated.
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();

  // Fresh leaf with a copy of the values; no gradient path back to *this.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Builds an interior node. `requires_grad` is inherited from the inputs; the
// backward rule is dropped when no input needs a gradient.
Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<Tensor> inputs, BackwardFn backward);

class Tape {
 public:
  // Topologically ordered nodes reachable from `root` (inputs precede users).
  static Tape record(const Tensor& root);

  std::span<const NodePtr> nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and runs every backward rule in reverse order.
  void replay() const;

 private:
  std::vector<NodePtr> nodes_;
};

// Scoped control over detach() for finite-difference checks. While a
// recorder is alive, every detach() on this thread logs the values it copies;
// while a replayer is alive, the k-th detach() returns the k-th logged values
// instead, so perturbed evaluations see the same stop-gradient constants as
// the analytic pass.
class DetachRecorder {
 public:
  DetachRecorder();
  ~DetachRecorder();
  DetachRecorder(const DetachRecorder&) = delete;
  DetachRecorder& operator=(const DetachRecorder&) = delete;
  std::vector<std::vector<double>> take();
};

class DetachReplayer {
 public:
  explicit DetachReplayer(const std::vector<std::vector<double>>* log);
  ~DetachReplayer();
  DetachReplayer(const DetachReplayer&) = delete;
  DetachReplayer& operator=(const DetachReplayer&) = delete;
};

// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
// `loss`. Throws ShapeError if `loss` is not a single-element tensor.
void backward(const Tensor& loss);

}  // namespace cimt
