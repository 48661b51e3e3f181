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
#include <span>

namespace cimt::harness {

// Binary classification summary; the positive class is thickening (1).
struct MetricsReport {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  // Set when the corresponding ratio had a zero denominator and was reported
  // as 0.
  bool sensitivity_undefined = false;
  bool precision_undefined = false;
  bool f1_undefined = false;
};

// Throws ValidationError on length mismatch, empty input or labels outside
// {0,1}.
MetricsReport compute_metrics(std::span<const int> predicted, std::span<const int> truth);

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn,
                                  std::size_t fn);

}  // namespace cimt::harness
