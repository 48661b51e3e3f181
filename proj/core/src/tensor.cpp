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

#include "cimt/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "cimt/error.hpp"

namespace cimt {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

namespace {

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
  if (numel(shape) != values.size()) {
    throw ShapeError("shape " + to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

const Node& checked(const NodePtr& node) {
  if (!node) throw std::logic_error("use of undefined Tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = cimt::numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value),
                          requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({1}, {value}, requires_grad));
}

Tensor Tensor::vector(std::initializer_list<double> values,
                      bool requires_grad) {
  return Tensor(make_leaf({values.size()}, std::vector<double>(values),
                          requires_grad));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }

std::span<const double> Tensor::values() const { return checked(node_).value; }

std::span<double> Tensor::mutable_values() {
  checked(node_);
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  checked(node_);
  node_->requires_grad = flag;
}

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

namespace {

struct DetachState {
  enum class Mode { off, record, replay } mode = Mode::off;
  std::vector<std::vector<double>> recorded;
  const std::vector<std::vector<double>>* replay = nullptr;
  std::size_t cursor = 0;
};

thread_local DetachState detach_state;

}  // namespace

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  auto& st = detach_state;
  switch (st.mode) {
    case DetachState::Mode::record:
      st.recorded.push_back(n.value);
      break;
    case DetachState::Mode::replay: {
      if (st.cursor >= st.replay->size() || (*st.replay)[st.cursor].size() != n.value.size()) {
        throw ShapeError("detach replay does not match the recorded graph");
      }
      return Tensor(make_leaf(n.shape, (*st.replay)[st.cursor++], false));
    }
    case DetachState::Mode::off:
      break;
  }
  return Tensor(make_leaf(n.shape, n.value, false));
}

DetachRecorder::DetachRecorder() {
  detach_state = {};
  detach_state.mode = DetachState::Mode::record;
}

DetachRecorder::~DetachRecorder() { detach_state = {}; }

std::vector<std::vector<double>> DetachRecorder::take() {
  return std::exchange(detach_state.recorded, {});
}

DetachReplayer::DetachReplayer(const std::vector<std::vector<double>>* log) {
  detach_state = {};
  detach_state.mode = DetachState::Mode::replay;
  detach_state.replay = log;
}

DetachReplayer::~DetachReplayer() { detach_state = {}; }

Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (numel(node->shape) != node->value.size()) {
    throw ShapeError("op output shape " + to_string(node->shape) +
                     " does not match its value count");
  }
  node->parents.reserve(inputs.size());
  for (auto& in : inputs) {
    node->requires_grad = node->requires_grad || in.requires_grad();
    node->parents.push_back(in.node());
  }
  if (node->requires_grad) {
    node->backward = std::move(backward);
  } else {
    // Nothing upstream needs a gradient; drop the inputs so the graph can be
    // released early.
    node->parents.clear();
  }
  return Tensor(std::move(node));
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.defined()) return tape;
  std::unordered_set<const Node*> visited;
  // Iterative post-order DFS; emits a node after all of its parents.
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const NodePtr& parent = node->parents[next++];
      if (visited.insert(parent.get()).second) stack.emplace_back(parent, 0);
      continue;
    }
    tape.nodes_.push_back(std::move(node));
    stack.pop_back();
  }
  return tape;
}

void Tape::replay() const {
  if (nodes_.empty()) return;
  for (const auto& n : nodes_) {
    if (!n->is_leaf() && n->requires_grad) {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  const auto& root = nodes_.back();
  if (!root->requires_grad) return;
  root->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && n.requires_grad) n.backward(n);
  }
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     to_string(loss.shape()));
  }
  Tape::record(loss).replay();
}

}  // namespace cimt
