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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "cimt/tensor.hpp"

namespace cimt {

struct GradCheckOptions {
  double step = 1e-6;
  // 0 probes every entry; otherwise at most this many entries per parameter,
  // chosen uniformly without replacement from `seed`.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
  // central: (f(x+h) - f(x-h)) / 2h. ridders: polynomial extrapolation of
  // central differences over shrinking steps starting at `step`, keeping the
  // estimate with the smallest internal error (robust for small gradients and
  // objectives with large higher derivatives).
  enum class Method { central, ridders } method = Method::central;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probed = 0;
  // Location of the worst entry.
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Relative error used throughout: |a - n| / max(1e-12, |a| + |n|).
double relative_error(double analytic, double numeric);

// Compares reverse-mode gradients of `fn` (which must rebuild its graph on
// every call and be deterministic) against central differences. Values
// produced by detach() are frozen at the unperturbed point, so the reference
// is the derivative of the stop-gradient objective. Leaves the
// parameters' values unchanged and their grads zeroed.
GradCheckResult grad_check(const std::function<Tensor()>& fn,
                           std::vector<Tensor> params,
                           const GradCheckOptions& options = {});

inline double grad_check(const std::function<Tensor()>& fn,
                         std::vector<Tensor> params, double step) {
  return grad_check(fn, std::move(params), GradCheckOptions{step}).max_rel_error;
}

}  // namespace cimt
