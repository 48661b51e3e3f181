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
#include <string>
#include <string_view>

#include "cimt/losses.hpp"
#include "cimt/models.hpp"
#include "cimt/synth.hpp"

namespace cimt::harness {

struct RunConfig {
  synth::DatasetSpec dataset;
  std::uint64_t model_seed = 7;
  std::size_t epochs = 60;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  std::string optimizer = "sgd";  // SGD with momentum, the only supported optimizer
  double momentum = 0.9;
  double grad_clip = 0.5;  // global L2 norm per step; 0 disables
  loss::LossWeights weights;
  model::Toggles toggles;
  bool ce_trains_encoder = false;
  double eps_stat = causal::kDefaultStatEps;
  double eps_content = causal::kDefaultContentEps;
  std::string prompt_bank;  // path; empty selects the built-in bank
  std::string output_dir = "out";

  // Throws ValidationError on any out-of-range field.
  void validate() const;
  model::StepOptions step_options() const;
  model::PromptBank load_prompt_bank() const;
};

// JSON keys mirror the field names above; nested objects for dataset,
// weights, toggles and the two style ranges ({"gain": [lo, hi], ...}).
// Missing keys keep their defaults, unknown keys are rejected.
std::string to_json(const RunConfig& config);
RunConfig config_from_json(std::string_view json);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& config);

}  // namespace cimt::harness
