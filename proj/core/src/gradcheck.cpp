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

#include "cimt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cimt/rng.hpp"

namespace cimt {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

namespace {

// Ridders' extrapolation tableau over steps h, h/c, h/c^2, ...
double ridders(const std::function<double(double)>& central, double h) {
  constexpr int kTable = 12;
  constexpr double kShrink = 1.4, kShrink2 = kShrink * kShrink, kSafe = 2.0;
  double a[kTable][kTable];
  a[0][0] = central(h);
  double best = a[0][0];
  double err = std::numeric_limits<double>::max();
  for (int i = 1; i < kTable; ++i) {
    h /= kShrink;
    a[0][i] = central(h);
    double fac = kShrink2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= kShrink2;
      const double e = std::max(std::abs(a[j][i] - a[j - 1][i]),
                                std::abs(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= kSafe * err) break;
  }
  return best;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& fn,
                           std::vector<Tensor> params,
                           const GradCheckOptions& options) {
  for (auto& p : params) p.zero_grad();
  std::vector<std::vector<double>> frozen;
  {
    DetachRecorder recorder;
    const auto loss = fn();
    frozen = recorder.take();
    backward(loss);
  }
  // Every evaluation replays from the first detach() again.
  auto eval = [&] {
    DetachReplayer replayer(&frozen);
    return fn().item();
  };
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    const auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.numel(), 0.0);
    p.zero_grad();
  }

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_values();
    std::vector<std::size_t> entries(values.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_param > 0 &&
        entries.size() > options.max_entries_per_param) {
      rng.shuffle(entries);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    for (auto i : entries) {
      const double orig = values[i];
      auto central = [&](double h) {
        values[i] = orig + h;
        const double up = eval();
        values[i] = orig - h;
        const double down = eval();
        return (up - down) / (2.0 * h);
      };
      const double numeric = options.method == GradCheckOptions::Method::ridders
                                 ? ridders(central, options.step)
                                 : central(options.step);
      values[i] = orig;
      const double err = relative_error(analytic[pi][i], numeric);
      ++result.probed;
      if (result.probed == 1 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = pi;
        result.worst_index = i;
        result.worst_analytic = analytic[pi][i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace cimt
