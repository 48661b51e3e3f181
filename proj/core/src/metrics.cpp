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

#include "cimt/metrics.hpp"

#include "cimt/error.hpp"

namespace cimt::harness {

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn,
                                  std::size_t fn) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  const auto total = tp + fp + tn + fn;
  r.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  if (tp + fn) {
    r.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    r.sensitivity_undefined = true;
  }
  if (tp + fp) {
    r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    r.precision_undefined = true;
  }
  if (r.precision + r.sensitivity > 0.0) {
    r.f1 = 2.0 * r.precision * r.sensitivity / (r.precision + r.sensitivity);
  } else {
    r.f1_undefined = true;
  }
  return r;
}

MetricsReport compute_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw ValidationError("prediction and truth lengths differ");
  }
  if (truth.empty()) throw ValidationError("metrics need at least one frame");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1)) {
      throw ValidationError("labels must be 0 or 1");
    }
    if (p == 1 && t == 1) ++tp;
    if (p == 1 && t == 0) ++fp;
    if (p == 0 && t == 0) ++tn;
    if (p == 0 && t == 1) ++fn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

}  // namespace cimt::harness
