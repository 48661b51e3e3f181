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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cimt/causal.hpp"
#include "cimt/losses.hpp"
#include "cimt/rng.hpp"
#include "cimt/tensor.hpp"

namespace cimt::model {

inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kHookChannels = 16;
inline constexpr std::size_t kFeatureDim = 64;
inline constexpr std::size_t kTokenDim = 32;
inline constexpr std::size_t kNumClasses = 2;
// Fixed gain on the [0,1] input. Glorot-uniform weights shrink activations
// layer by layer; without it f is ~1e-2 and a CE-only model stays at the prior.
inline constexpr double kInputGain = 20.0;

// ---------------------------------------------------------------------------
// Prompt bank

struct PromptEntry {
  int label = 0;  // 0 = non-thickening, 1 = thickening
  std::string text;
};

class PromptBank {
 public:
  PromptBank() = default;
  explicit PromptBank(std::vector<PromptEntry> entries);

  // JSON array of {"class": "thickening"|"non_thickening", "text": "..."}.
  static PromptBank from_json(std::string_view json);
  static PromptBank load(const std::string& path);
  // Eight symptom descriptions per class.
  static PromptBank builtin();

  std::string to_json() const;

  const std::vector<PromptEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  // Indices of the entries carrying `label`.
  std::vector<std::size_t> indices_of(int label) const;

 private:
  std::vector<PromptEntry> entries_;
};

// Lowercases and splits on whitespace and ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::size_t kOov = 0;

  Vocabulary() = default;
  // Sorted unique tokens of every bank entry; index 0 is reserved for OOV.
  static Vocabulary from_bank(const PromptBank& bank);

  std::size_t size() const { return tokens_.size() + 1; }
  std::size_t index(std::string_view token) const;
  // Token ids of `text`; a text without tokens maps to {kOov}.
  std::vector<std::size_t> encode(std::string_view text) const;

 private:
  std::vector<std::string> tokens_;  // sorted
};

// ---------------------------------------------------------------------------
// Parameters

struct NamedParameter {
  std::string name;
  loss::ParamGroup group;
  Tensor tensor;
};

class ParameterSet {
 public:
  void add(std::string name, loss::ParamGroup group, Tensor tensor);
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  std::vector<NamedParameter>& items() { return items_; }
  const std::vector<NamedParameter>& items() const { return items_; }
  std::vector<Tensor> tensors() const;
  std::vector<Tensor> group(loss::ParamGroup g) const;
  void zero_grad();
  // Deep copy with fresh leaves (requires_grad preserved).
  ParameterSet clone() const;

 private:
  std::vector<NamedParameter> items_;
};

// Conv/linear weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); biases
// zero; token embeddings ~ N(0, 0.02). Deterministic in `seed`.
ParameterSet init_parameters(std::uint64_t seed, std::size_t vocab_size);

// ---------------------------------------------------------------------------
// Networks

struct ImageEncoding {
  Tensor map;      // hook point, (N,16,16,16)
  Tensor feature;  // f, (N,64)
};

class Model {
 public:
  Model(ParameterSet params, Vocabulary vocab);

  // Two stride-2 conv blocks: (N,1,64,64) -> (N,16,16,16).
  Tensor stem(const Tensor& images) const;
  // conv block + global average pool + linear: (N,16,16,16) -> (N,64).
  Tensor encode_from_map(const Tensor& map) const;
  ImageEncoding encode_image(const Tensor& images) const;

  // softmax(f W + b). With `frozen`, the classifier weights enter as
  // constants so no gradient reaches them.
  Tensor classify(const Tensor& features, bool frozen = false) const;

  // Unit-norm (1,64) embedding.
  Tensor encode_text(std::string_view prompt) const;
  // (P,64) unit-norm embeddings of every bank entry, in bank order.
  Tensor encode_prompts(const PromptBank& bank) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  Tensor text_head(const std::vector<std::vector<std::size_t>>& tokens) const;

  ParameterSet params_;
  Vocabulary vocab_;
};

// ---------------------------------------------------------------------------
// Training step

struct LabeledBatch {
  Tensor images;  // (N,1,64,64), values in [0,1]
  std::vector<int> labels;

  void validate() const;
};

struct Toggles {
  bool sce = true;
  bool cec = true;
  bool cta = true;
};

struct StepOptions {
  loss::LossWeights weights;
  Toggles toggles;
  bool ce_trains_encoder = false;
  double eps_stat = causal::kDefaultStatEps;
  double eps_content = causal::kDefaultContentEps;
};

// Test hooks that pin the random draws of one step.
struct StepOverrides {
  std::optional<std::vector<double>> lambda;
  bool identity_permutations = false;
};

struct StepResult {
  loss::LossTerms terms;
  Tensor total;
  loss::LossBreakdown breakdown;
  Tensor probs;  // D(f)
  std::optional<causal::StylePerturbMeta> style_meta;
};

// Builds the whole objective for one batch. Random draws happen in a fixed
// order: style metadata (sce), channel permutations (cec), positive prompts
// (cta). Disabled modules contribute a constant zero.
StepResult forward_training_step(const Model& model, const LabeledBatch& batch,
                                 const PromptBank& bank, const StepOptions& options,
                                 Rng& rng, const StepOverrides& overrides = {});

}  // namespace cimt::model
