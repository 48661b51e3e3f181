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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cimt/error.hpp"
#include "cimt/gradcheck.hpp"
#include "cimt/ops.hpp"
#include "cimt/rng.hpp"

using namespace cimt;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Entries in [-2,2] kept at least `margin` away from zero (the relu kink).
Tensor away_from_zero(Shape shape, Rng& rng, double margin = 1e-3) {
  auto t = random_tensor(std::move(shape), rng);
  for (auto& x : t.mutable_values()) {
    if (std::abs(x) < margin) x = x < 0 ? -margin - 0.1 : margin + 0.1;
  }
  return t;
}

}  // namespace

TEST(Ewise, Examples) {
  EXPECT_EQ(vals(add(Tensor::vector({1, 2}), Tensor::vector({3, 4}))),
            (std::vector<double>{4, 6}));
  EXPECT_EQ(vals(mul(Tensor::vector({1, 2, 3}), 0.0)), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(vals(relu(Tensor::vector({-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
}

TEST(Ewise, ChannelBroadcast) {
  auto a = Tensor::zeros({2, 3, 2, 2});
  auto b = Tensor::vector({1, 2, 3});
  auto c = a + b;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(c[(n * 3 + ch) * 4 + k], ch + 1.0);
}

TEST(Ewise, Errors) {
  EXPECT_THROW(add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), ShapeError);
  EXPECT_THROW(log(Tensor::vector({1, 0})), DomainError);
  EXPECT_THROW(div(Tensor::vector({1, 1}), Tensor::vector({1, 0})), DomainError);
}

TEST(Matmul, Examples) {
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(vals(matmul(eye, m)), vals(m));
  EXPECT_EQ(vals(matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}))),
            (std::vector<double>{11}));
  auto z = matmul(Tensor::zeros({2, 3}), Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(z.shape(), (Shape{2, 2}));
  EXPECT_EQ(vals(z), (std::vector<double>(4, 0.0)));
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(3);
  auto x = random_tensor({1, 1, 5, 5}, rng);
  std::vector<double> k(9, 0.0);
  k[4] = 1.0;
  auto y = conv2d(x, Tensor::from({1, 1, 3, 3}, k), 1, 1);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(vals(y), vals(x));
}

TEST(Conv2d, ZeroKernelAndOnes) {
  Rng rng(4);
  auto x = random_tensor({2, 3, 6, 6}, rng);
  auto y = conv2d(x, Tensor::zeros({4, 3, 3, 3}), 2, 1);
  EXPECT_EQ(y.shape(), (Shape{2, 4, 3, 3}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);

  auto ones = conv2d(Tensor::full({1, 1, 3, 3}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0), 1, 0);
  EXPECT_EQ(ones.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(ones.item(), 9.0);
}

TEST(Conv2d, OutputSizes) {
  EXPECT_EQ(conv2d(Tensor::zeros({1, 1, 64, 64}), Tensor::zeros({8, 1, 3, 3}), 2, 1).shape(),
            (Shape{1, 8, 32, 32}));
  EXPECT_EQ(conv2d(Tensor::zeros({1, 1, 7, 7}), Tensor::zeros({1, 1, 3, 3}), 2, 0).shape(),
            (Shape{1, 1, 3, 3}));
  // (6 - 3) / 2 leaves a row no padding covers.
  EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 6, 6}), Tensor::zeros({1, 1, 3, 3}), 2, 0),
               ShapeError);
  EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 5, 5}), Tensor::zeros({1, 1, 3, 3}), 3, 0),
               ValidationError);
}

TEST(Softmax, Examples) {
  auto a = softmax(Tensor::from({1, 2}, {0, 0}), 1);
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  auto b = softmax(Tensor::from({1, 2}, {1000, 1000}), 1);
  EXPECT_DOUBLE_EQ(b[0], 0.5);
  EXPECT_DOUBLE_EQ(b[1], 0.5);
  auto c = softmax(Tensor::from({1, 2}, {std::log(3.0), 0.0}), 1);
  EXPECT_NEAR(c[0], 0.75, 1e-15);
  EXPECT_NEAR(c[1], 0.25, 1e-15);
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({4, 5}, rng, -300.0, 300.0);
    for (std::size_t axis : {0u, 1u}) {
      auto p = softmax(x, axis);
      const std::size_t rows = axis == 1 ? 4 : 5;
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < (axis == 1 ? 5 : 4); ++k) {
          s += axis == 1 ? p[r * 5 + k] : p[k * 5 + r];
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(Backward, Examples) {
  auto x = Tensor::scalar(3.0, true);
  backward(x * x);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);

  auto v = Tensor::vector({-1, 2}, true);
  backward(sum(relu(v)));
  EXPECT_EQ(std::vector<double>(v.grad().begin(), v.grad().end()), (std::vector<double>{0, 1}));

  EXPECT_THROW(backward(v * 2.0), ShapeError);
}

TEST(Backward, Accumulates) {
  auto x = Tensor::scalar(2.0, true);
  backward(x * x);
  backward(x * x);
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  backward(x * 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
}

TEST(Backward, Linearity) {
  Rng rng(6);
  auto w = random_tensor({3, 4}, rng);
  auto x = random_tensor({2, 3}, rng);
  auto l1 = [&] { return sum(exp(matmul(x, w) * 0.3)); };
  auto l2 = [&] { return mean(relu(matmul(x, w))); };
  const double a = 0.7, b = -1.9;

  backward(l1() * a + l2() * b);
  const std::vector<double> joint(w.grad().begin(), w.grad().end());
  w.zero_grad();
  backward(l1());
  const std::vector<double> g1(w.grad().begin(), w.grad().end());
  w.zero_grad();
  backward(l2());
  const std::vector<double> g2(w.grad().begin(), w.grad().end());
  for (std::size_t i = 0; i < joint.size(); ++i) {
    EXPECT_NEAR(joint[i], a * g1[i] + b * g2[i], 1e-12);
  }
}

TEST(Backward, SoftmaxCrossEntropyMatchesDifferences) {
  Rng rng(7);
  auto logits = random_tensor({3, 2}, rng);
  auto mask = Tensor::from({3, 2}, {1, 0, 0, 1, 1, 0});
  auto fn = [&] { return mean(log(softmax(logits, 1)) * mask) * -1.0; };
  EXPECT_LE(grad_check(fn, {logits}, 1e-6), 1e-6);
}

TEST(Tape, TopologicalOrder) {
  auto x = Tensor::vector({1, 2}, true);
  auto y = exp(x) * x + x;
  auto tape = Tape::record(sum(y));
  const auto nodes = tape.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& p : nodes[i]->parents) {
      bool seen = false;
      for (std::size_t j = 0; j < i; ++j) seen = seen || nodes[j] == p;
      EXPECT_TRUE(seen);
    }
  }
}

TEST(Detach, StopsGradient) {
  auto x = Tensor::vector({1, 2}, true);
  backward(sum(x * x.detach()));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 2}));
}

TEST(GradCheck, Examples) {
  auto x = Tensor::scalar(3.0, true);
  EXPECT_LE(grad_check([&] { return x * x; }, {x}, 1e-6), 1e-8);
  auto c = Tensor::vector({1, 2}, true);
  EXPECT_EQ(grad_check([&] { return Tensor::scalar(4.0); }, {c}, 1e-6), 0.0);
}

TEST(GradCheck, StopGradientReference) {
  // The reference treats detached values as constants at the probe point.
  auto x = Tensor::vector({0.3, -1.2}, true);
  auto fn = [&] { return sum(x * x.detach() * x); };
  EXPECT_LE(grad_check(fn, {x}, 1e-6), 1e-8);
}

TEST(GradCheck, Ops) {
  Rng rng(8);
  const GradCheckOptions opt{1e-6};
  auto a = away_from_zero({2, 3}, rng);
  auto b = away_from_zero({2, 3}, rng);
  auto pos = random_tensor({2, 3}, rng, 0.5, 2.0);
  auto w = random_tensor({3, 2}, rng);
  auto probe = random_tensor({2, 3}, rng);
  probe.set_requires_grad(false);

  struct Case {
    const char* name;
    std::function<Tensor()> fn;
    std::vector<Tensor> params;
  };
  const std::vector<Case> cases = {
      {"add", [&] { return sum((a + b) * probe); }, {a, b}},
      {"sub", [&] { return sum((a - b) * probe); }, {a, b}},
      {"mul", [&] { return sum(a * b * probe); }, {a, b}},
      {"div", [&] { return sum(a / pos * probe); }, {a, pos}},
      {"pow", [&] { return sum(pow(pos, 1.7) * probe); }, {pos}},
      {"exp", [&] { return sum(exp(a) * probe); }, {a}},
      {"log", [&] { return sum(log(pos) * probe); }, {pos}},
      {"relu", [&] { return sum(relu(a) * probe); }, {a}},
      {"matmul", [&] { return sum(exp(matmul(a, w) * 0.5)); }, {a, w}},
      {"softmax", [&] { return sum(softmax(a, 1) * probe); }, {a}},
      {"normalize_rows", [&] { return sum(normalize_rows(a) * probe); }, {a}},
  };
  for (const auto& c : cases) {
    EXPECT_LT(grad_check(c.fn, c.params, opt).max_rel_error, 1e-5) << c.name;
  }
}

TEST(GradCheck, Conv2d) {
  Rng rng(9);
  auto x = random_tensor({2, 2, 5, 5}, rng);
  auto k = random_tensor({3, 2, 3, 3}, rng);
  auto probe = random_tensor({2, 3, 3, 3}, rng);
  probe.set_requires_grad(false);
  auto fn = [&] { return sum(conv2d(x, k, 2, 1) * probe); };
  EXPECT_LT(grad_check(fn, {x, k}).max_rel_error, 1e-5);
}

TEST(Determinism, RepeatedOpsBitIdentical) {
  auto run = [] {
    Rng rng(11);
    auto x = random_tensor({2, 1, 8, 8}, rng);
    auto k = random_tensor({4, 1, 3, 3}, rng);
    auto y = spatial_std(relu(conv2d(x, k, 2, 1)), 1e-5);
    backward(sum(y));
    auto out = vals(y);
    out.insert(out.end(), k.grad().begin(), k.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}
