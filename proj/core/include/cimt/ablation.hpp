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
#include <iosfwd>
#include <string>
#include <vector>

#include "cimt/config.hpp"
#include "cimt/metrics.hpp"

namespace cimt::harness {

struct AblationVariant {
  std::string name;
  model::Toggles toggles;
};

// The four module combinations plus the CE-only control, in report order.
std::vector<AblationVariant> ablation_variants();

struct AblationOptions {
  std::size_t seeds = 5;
  std::size_t jobs = 1;   // concurrent runs
  std::string out_dir;    // per-run logs and checkpoints; empty writes nothing
};

struct AblationRun {
  AblationVariant variant;
  std::size_t seed = 0;
  MetricsReport test;
  MetricsReport shifted;
  double best_val_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};

struct SplitSummary {
  MetricSummary accuracy, sensitivity, precision, f1;
};

struct VariantSummary {
  AblationVariant variant;
  SplitSummary test;
  SplitSummary shifted;
};

struct AblationTable {
  std::vector<AblationRun> runs;  // variant-major, then seed
  std::vector<VariantSummary> summary;

  const VariantSummary& find(const std::string& variant) const;
};

// Config of one ablation cell. Seed k offsets both the dataset and model
// seeds by k. Without cta the cross-entropy term trains the encoder.
RunConfig ablation_config(const RunConfig& base, const AblationVariant& variant, std::size_t seed);

AblationTable ablate(const RunConfig& base, const AblationOptions& options = {});

SplitSummary summarize(const std::vector<MetricsReport>& reports);

// `split` is "test" or "shifted": one row per run, then one "mean±std" row
// per variant.
void write_ablation_csv(std::ostream& out, const AblationTable& table, const std::string& split);

// Human-readable summary with the pairwise shifted accuracy ordering.
std::string format_ablation_report(const AblationTable& table);

}  // namespace cimt::harness
