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
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cimt/config.hpp"
#include "cimt/metrics.hpp"
#include "cimt/models.hpp"
#include "cimt/synth.hpp"

namespace cimt::harness {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double l_itcl = 0.0, l_cl = 0.0, l_ce = 0.0, l_adv = 0.0, total = 0.0;
  double val_acc = 0.0, val_f1 = 0.0;
};

struct TrainResult {
  model::ParameterSet best;  // highest validation accuracy (earliest on ties)
  model::ParameterSet last;  // after the final epoch
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0 = initialization
  double best_val_accuracy = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Stacks frames[index...] into a batch.
model::LabeledBatch make_batch(const std::vector<synth::SynthFrame>& frames,
                               std::span<const std::size_t> index);

// SGD with momentum over the configured objective, gradients clipped to
// config.grad_clip in global norm. Deterministic in
// (config, dataset, bank). Throws NumericError naming the first non-finite
// loss term.
TrainResult train(const RunConfig& config, const synth::Dataset& data,
                  const model::PromptBank& bank, const EpochCallback& on_epoch = {});

// Builds an inference model whose parameters carry no gradient.
model::Model inference_model(const model::ParameterSet& params, const model::PromptBank& bank);

struct FramePrediction {
  int truth = 0;
  int pred = 0;
  double p_thickening = 0.0;
};

struct Evaluation {
  MetricsReport metrics;
  std::vector<FramePrediction> frames;
};

// Argmax predictions over a non-empty split.
Evaluation evaluate(const model::Model& model, const std::vector<synth::SynthFrame>& split);

// (N,64) features f of every frame, in order.
std::vector<std::vector<double>> embed(const model::Model& model,
                                       const std::vector<synth::SynthFrame>& split);

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log);
void write_eval_csv(std::ostream& out, const Evaluation& eval);
void write_embeddings_csv(std::ostream& out, const std::vector<std::vector<double>>& features,
                          const std::vector<synth::SynthFrame>& split);

// Named split of a dataset: train, val, test or shifted.
const std::vector<synth::SynthFrame>& split_by_name(const synth::Dataset& data,
                                                    const std::string& name);

// Shortest round-trip decimal form used in every CSV.
std::string format_real(double v);

}  // namespace cimt::harness
