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

#include "cimt/trainer.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "cimt/error.hpp"
#include "cimt/ops.hpp"

namespace cimt::harness {

namespace {

constexpr std::size_t kEvalChunk = 64;

void require_finite(double v, const char* term, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + term + " at epoch " +
                       std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

// Scale applied to the step's gradient so that its global L2 norm is at most
// max_norm (0 leaves it unchanged).
double clip_scale(const model::ParameterSet& params, double max_norm) {
  if (max_norm <= 0.0) return 1.0;
  double sq = 0.0;
  for (const auto& p : params.items()) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  return norm > max_norm ? max_norm / norm : 1.0;
}

void sgd_momentum_step(model::ParameterSet& params, std::vector<std::vector<double>>& velocity,
                       double lr, double momentum, double max_norm) {
  const double scale = clip_scale(params, max_norm);
  auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& t = items[i].tensor;
    if (!t.has_grad()) continue;
    const auto g = t.grad();
    auto v = t.mutable_values();
    auto& vel = velocity[i];
    for (std::size_t k = 0; k < v.size(); ++k) {
      vel[k] = momentum * vel[k] + scale * g[k];
      v[k] -= lr * vel[k];
    }
  }
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

model::LabeledBatch make_batch(const std::vector<synth::SynthFrame>& frames,
                               std::span<const std::size_t> index) {
  constexpr std::size_t px = synth::kFrameSize * synth::kFrameSize;
  std::vector<double> images;
  images.reserve(index.size() * px);
  model::LabeledBatch batch;
  for (auto i : index) {
    const auto& f = frames.at(i);
    images.insert(images.end(), f.image.begin(), f.image.end());
    batch.labels.push_back(f.label);
  }
  batch.images = Tensor::from({index.size(), 1, synth::kFrameSize, synth::kFrameSize},
                              std::move(images));
  return batch;
}

model::Model inference_model(const model::ParameterSet& params, const model::PromptBank& bank) {
  auto frozen = params.clone();
  for (auto& p : frozen.items()) p.tensor.set_requires_grad(false);
  return model::Model(std::move(frozen), model::Vocabulary::from_bank(bank));
}

Evaluation evaluate(const model::Model& model, const std::vector<synth::SynthFrame>& split) {
  if (split.empty()) throw ValidationError("cannot evaluate an empty split");
  Evaluation ev;
  std::vector<int> preds, truth;
  for (std::size_t start = 0; start < split.size(); start += kEvalChunk) {
    const std::size_t end = std::min(split.size(), start + kEvalChunk);
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const auto batch = make_batch(split, idx);
    const auto probs = model.classify(model.encode_image(batch.images).feature);
    const auto pv = probs.values();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      FramePrediction fp;
      fp.truth = batch.labels[k];
      fp.p_thickening = pv[k * 2 + 1];
      fp.pred = pv[k * 2 + 1] > pv[k * 2] ? 1 : 0;
      preds.push_back(fp.pred);
      truth.push_back(fp.truth);
      ev.frames.push_back(fp);
    }
  }
  ev.metrics = compute_metrics(preds, truth);
  return ev;
}

std::vector<std::vector<double>> embed(const model::Model& model,
                                       const std::vector<synth::SynthFrame>& split) {
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start < split.size(); start += kEvalChunk) {
    const std::size_t end = std::min(split.size(), start + kEvalChunk);
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const auto f = model.encode_image(make_batch(split, idx).images).feature;
    const auto v = f.values();
    const std::size_t d = f.dim(1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.emplace_back(v.begin() + k * d, v.begin() + (k + 1) * d);
    }
  }
  return out;
}

TrainResult train(const RunConfig& config, const synth::Dataset& data,
                  const model::PromptBank& bank, const EpochCallback& on_epoch) {
  config.validate();
  if (data.train.empty() || data.val.empty()) {
    throw ValidationError("training needs non-empty train and val splits");
  }
  auto vocab = model::Vocabulary::from_bank(bank);
  model::Model net(model::init_parameters(config.model_seed, vocab.size()), vocab);
  const auto options = config.step_options();
  const bool needs_pairs = options.toggles.sce || options.toggles.cec;

  TrainResult result;
  result.best = net.params().clone();
  result.best_val_accuracy = -1.0;

  std::vector<std::vector<double>> velocity;
  for (const auto& p : net.params().items()) velocity.emplace_back(p.tensor.numel(), 0.0);

  Rng rng(Rng::derive(config.model_seed, 0x7EA1));
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto order = rng.permutation(data.train.size());
    EpochLog log;
    log.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (needs_pairs && end - start < 2) continue;
      const auto batch = make_batch(
          data.train, std::span<const std::size_t>(order.data() + start, end - start));
      net.params().zero_grad();
      const auto step = model::forward_training_step(net, batch, bank, options, rng);
      const auto& b = step.breakdown;
      require_finite(b.l_itcl, "l_itcl", epoch, steps);
      require_finite(b.l_cl, "l_cl", epoch, steps);
      require_finite(b.l_ce, "l_ce", epoch, steps);
      require_finite(b.l_adv, "l_adv", epoch, steps);
      backward(step.total);
      sgd_momentum_step(net.params(), velocity, config.learning_rate, config.momentum,
                        config.grad_clip);
      log.l_itcl += b.l_itcl;
      log.l_cl += b.l_cl;
      log.l_ce += b.l_ce;
      log.l_adv += b.l_adv;
      log.total += b.total;
      ++steps;
    }
    if (steps) {
      const double inv = 1.0 / static_cast<double>(steps);
      log.l_itcl *= inv;
      log.l_cl *= inv;
      log.l_ce *= inv;
      log.l_adv *= inv;
      log.total *= inv;
    }
    const auto val = evaluate(inference_model(net.params(), bank), data.val);
    log.val_acc = val.metrics.accuracy;
    log.val_f1 = val.metrics.f1;
    if (log.val_acc > result.best_val_accuracy) {
      result.best_val_accuracy = log.val_acc;
      result.best_epoch = epoch;
      result.best = net.params().clone();
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (result.best_val_accuracy < 0.0) result.best_val_accuracy = 0.0;
  net.params().zero_grad();
  result.last = net.params().clone();
  return result;
}

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,l_itcl,l_cl,l_ce,l_adv,total,val_acc,val_f1\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_real(e.l_itcl) << ',' << format_real(e.l_cl) << ','
        << format_real(e.l_ce) << ',' << format_real(e.l_adv) << ',' << format_real(e.total)
        << ',' << format_real(e.val_acc) << ',' << format_real(e.val_f1) << '\n';
  }
}

void write_eval_csv(std::ostream& out, const Evaluation& eval) {
  out << "frame,truth,pred,p_thickening\n";
  for (std::size_t i = 0; i < eval.frames.size(); ++i) {
    const auto& f = eval.frames[i];
    out << i << ',' << f.truth << ',' << f.pred << ',' << format_real(f.p_thickening) << '\n';
  }
}

void write_embeddings_csv(std::ostream& out, const std::vector<std::vector<double>>& features,
                          const std::vector<synth::SynthFrame>& split) {
  out << "frame,label";
  const std::size_t d = features.empty() ? 0 : features[0].size();
  for (std::size_t k = 0; k < d; ++k) out << ",f" << k;
  out << '\n';
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << i << ',' << split.at(i).label;
    for (double v : features[i]) out << ',' << format_real(v);
    out << '\n';
  }
}

const std::vector<synth::SynthFrame>& split_by_name(const synth::Dataset& data,
                                                    const std::string& name) {
  if (name == "train") return data.train;
  if (name == "val") return data.val;
  if (name == "test") return data.test;
  if (name == "shifted" || name == "shifted_test") return data.shifted_test;
  throw ValidationError("unknown split \"" + name + "\" (train|val|test|shifted)");
}

}  // namespace cimt::harness
