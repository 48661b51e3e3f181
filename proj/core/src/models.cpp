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

#include "cimt/models.hpp"

#include <cmath>

#include "cimt/error.hpp"
#include "cimt/ops.hpp"

namespace cimt::model {

using loss::ParamGroup;

void ParameterSet::add(std::string name, ParamGroup group, Tensor tensor) {
  for (const auto& p : items_) {
    if (p.name == name) throw ValidationError("duplicate parameter " + name);
  }
  items_.push_back({std::move(name), group, std::move(tensor)});
}

const Tensor& ParameterSet::get(std::string_view name) const {
  for (const auto& p : items_) {
    if (p.name == name) return p.tensor;
  }
  throw ValidationError("unknown parameter " + std::string(name));
}

Tensor& ParameterSet::get(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::vector<Tensor> ParameterSet::tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : items_) out.push_back(p.tensor);
  return out;
}

std::vector<Tensor> ParameterSet::group(ParamGroup g) const {
  std::vector<Tensor> out;
  for (const auto& p : items_) {
    if (p.group == g) out.push_back(p.tensor);
  }
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& p : items_) {
    const auto v = p.tensor.values();
    out.add(p.name, p.group,
            Tensor::from(p.tensor.shape(), {v.begin(), v.end()}, p.tensor.requires_grad()));
  }
  return out;
}

namespace {

Tensor glorot(Rng& rng, Shape shape, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-a, a);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor conv_weight(Rng& rng, std::size_t cout, std::size_t cin) {
  return glorot(rng, {cout, cin, 3, 3}, cin * 9, cout * 9);
}

Tensor bias(std::size_t n) { return Tensor::zeros({n}, true); }

}  // namespace

ParameterSet init_parameters(std::uint64_t seed, std::size_t vocab_size) {
  if (vocab_size < 1) throw ValidationError("vocabulary must contain the OOV token");
  Rng rng(seed);
  ParameterSet ps;
  const auto enc = ParamGroup::image_encoder;
  ps.add("enc.conv1.weight", enc, conv_weight(rng, 8, 1));
  ps.add("enc.conv1.bias", enc, bias(8));
  ps.add("enc.conv2.weight", enc, conv_weight(rng, kHookChannels, 8));
  ps.add("enc.conv2.bias", enc, bias(kHookChannels));
  ps.add("enc.conv3.weight", enc, conv_weight(rng, 32, kHookChannels));
  ps.add("enc.conv3.bias", enc, bias(32));
  ps.add("enc.fc.weight", enc, glorot(rng, {32, kFeatureDim}, 32, kFeatureDim));
  ps.add("enc.fc.bias", enc, bias(kFeatureDim));
  ps.add("cls.weight", ParamGroup::classifier,
         glorot(rng, {kFeatureDim, kNumClasses}, kFeatureDim, kNumClasses));
  ps.add("cls.bias", ParamGroup::classifier, bias(kNumClasses));
  std::vector<double> emb(vocab_size * kTokenDim);
  for (auto& x : emb) x = rng.normal(0.0, 0.02);
  ps.add("txt.embedding", ParamGroup::text_encoder,
         Tensor::from({vocab_size, kTokenDim}, std::move(emb), true));
  ps.add("txt.fc.weight", ParamGroup::text_encoder,
         glorot(rng, {kTokenDim, kFeatureDim}, kTokenDim, kFeatureDim));
  ps.add("txt.fc.bias", ParamGroup::text_encoder, bias(kFeatureDim));
  return ps;
}

Model::Model(ParameterSet params, Vocabulary vocab)
    : params_(std::move(params)), vocab_(std::move(vocab)) {
  const auto& emb = params_.get("txt.embedding");
  if (emb.dim(0) != vocab_.size()) {
    throw ValidationError("embedding table has " + std::to_string(emb.dim(0)) +
                          " rows for a vocabulary of " + std::to_string(vocab_.size()));
  }
}

Tensor Model::stem(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != kImageSize ||
      images.dim(3) != kImageSize) {
    throw ShapeError("images must be (N,1,64,64), got " + to_string(images.shape()));
  }
  auto h = relu(conv2d(images * kInputGain, params_.get("enc.conv1.weight"), 2, 1) +
                params_.get("enc.conv1.bias"));
  return relu(conv2d(h, params_.get("enc.conv2.weight"), 2, 1) +
              params_.get("enc.conv2.bias"));
}

Tensor Model::encode_from_map(const Tensor& map) const {
  auto h = relu(conv2d(map, params_.get("enc.conv3.weight"), 2, 1) +
                params_.get("enc.conv3.bias"));
  return matmul(spatial_mean(h), params_.get("enc.fc.weight")) + params_.get("enc.fc.bias");
}

ImageEncoding Model::encode_image(const Tensor& images) const {
  auto m = stem(images);
  auto f = encode_from_map(m);
  return {std::move(m), std::move(f)};
}

Tensor Model::classify(const Tensor& features, bool frozen) const {
  if (features.rank() != 2 || features.dim(1) != kFeatureDim) {
    throw ShapeError("classifier expects (N,64) features, got " + to_string(features.shape()));
  }
  const auto& w = params_.get("cls.weight");
  const auto& b = params_.get("cls.bias");
  const auto logits = frozen ? matmul(features, w.detach()) + b.detach()
                             : matmul(features, w) + b;
  return softmax(logits, 1);
}

Tensor Model::text_head(const std::vector<std::vector<std::size_t>>& tokens) const {
  const auto pooled = embedding_mean(params_.get("txt.embedding"), tokens);
  return normalize_rows(matmul(pooled, params_.get("txt.fc.weight")) +
                        params_.get("txt.fc.bias"));
}

Tensor Model::encode_text(std::string_view prompt) const {
  return text_head({vocab_.encode(prompt)});
}

Tensor Model::encode_prompts(const PromptBank& bank) const {
  std::vector<std::vector<std::size_t>> tokens;
  tokens.reserve(bank.size());
  for (const auto& e : bank.entries()) tokens.push_back(vocab_.encode(e.text));
  return text_head(tokens);
}

void LabeledBatch::validate() const {
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != kImageSize ||
      images.dim(3) != kImageSize) {
    throw ShapeError("batch images must be (N,1,64,64)");
  }
  if (labels.size() != images.dim(0)) throw ShapeError("batch label count mismatch");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("label must be 0 or 1");
  }
}

StepResult forward_training_step(const Model& model, const LabeledBatch& batch,
                                 const PromptBank& bank, const StepOptions& options,
                                 Rng& rng, const StepOverrides& overrides) {
  batch.validate();
  options.weights.validate();
  const std::size_t n = batch.labels.size();
  const auto& tg = options.toggles;
  if ((tg.sce || tg.cec) && n < 2) {
    throw ValidationError("style and content modules need a batch of at least 2");
  }

  StepResult out;
  const auto enc = model.encode_image(batch.images);
  out.probs = model.classify(enc.feature);
  const auto zero = Tensor::scalar(0.0);
  auto& t = out.terms;

  const auto ce_probs =
      options.ce_trains_encoder ? out.probs : model.classify(enc.feature.detach());
  t.ce = loss::cross_entropy(ce_probs, batch.labels);

  if (tg.sce) {
    auto meta = causal::draw_style_meta(n, rng);
    if (overrides.lambda) meta.lambda = *overrides.lambda;
    const auto perturbed = causal::apply_style_perturb(enc.map, meta, options.eps_stat);
    t.cl = loss::consistency_loss(out.probs, model.classify(model.encode_from_map(perturbed)));
    out.style_meta = std::move(meta);
  } else {
    t.cl = zero;
  }

  if (tg.cec) {
    const std::size_t c = enc.map.dim(1);
    const auto perm = overrides.identity_permutations
                          ? causal::ChannelPermutation::identity(n, c)
                          : causal::ChannelPermutation::random(n, c, rng);
    const auto randomized = causal::content_randomize(enc.map, perm, options.eps_content);
    t.adv = loss::adversarial_uniform_loss(
        model.classify(model.encode_from_map(randomized), /*frozen=*/true));
  } else {
    t.adv = zero;
  }

  if (tg.cta) {
    const std::vector<std::size_t> by_class[2] = {bank.indices_of(0), bank.indices_of(1)};
    std::vector<std::size_t> positive(n);
    std::vector<std::vector<std::size_t>> negatives(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int y = batch.labels[i];
      const auto& own = by_class[y];
      positive[i] = own[rng.below(own.size())];
      negatives[i] = by_class[1 - y];
    }
    t.itcl = loss::info_nce_batch(enc.feature, model.encode_prompts(bank), positive, negatives,
                                  options.weights.tau);
  } else {
    t.itcl = zero;
  }

  out.total = loss::total_loss(t, options.weights);
  out.breakdown = loss::breakdown(t, options.weights);
  return out;
}

}  // namespace cimt::model
