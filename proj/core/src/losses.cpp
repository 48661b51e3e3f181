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

#include "cimt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "cimt/error.hpp"
#include "cimt/ops.hpp"

namespace cimt::loss {

namespace {

void check_distribution(const Tensor& p, const char* what) {
  if (p.rank() != 2 || p.dim(1) != 2) {
    throw ShapeError(std::string(what) + " expects (N,2) probabilities, got " +
                     to_string(p.shape()));
  }
}

Tensor floored_log(const Tensor& p) { return log(clamp(p, kProbFloor, 1.0)); }

double batch_scale(const Tensor& p) { return 1.0 / static_cast<double>(p.dim(0)); }

}  // namespace

void LossWeights::validate() const {
  if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
  if (!(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha3 >= 0.0)) {
    throw ValidationError("loss weights must be >= 0");
  }
}

Tensor kl_div(const Tensor& p, const Tensor& q) {
  check_distribution(p, "kl_div");
  check_distribution(q, "kl_div");
  if (p.shape() != q.shape()) throw ShapeError("kl_div batch shapes differ");
  const auto pc = clamp(p, kProbFloor, 1.0);
  return sum(pc * (log(pc) - floored_log(q))) * batch_scale(p);
}

Tensor consistency_loss(const Tensor& p, const Tensor& p_pert) {
  return kl_div(p, p_pert) + kl_div(p_pert, p);
}

Tensor cross_entropy(const Tensor& p, std::span<const int> labels) {
  check_distribution(p, "cross_entropy");
  if (labels.size() != p.dim(0)) throw ShapeError("cross_entropy label count mismatch");
  std::vector<double> onehot(p.numel(), 0.0);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] != 0 && labels[n] != 1) throw ValidationError("label must be 0 or 1");
    onehot[n * 2 + static_cast<std::size_t>(labels[n])] = 1.0;
  }
  const auto mask = Tensor::from(p.shape(), std::move(onehot));
  return sum(floored_log(p) * mask) * (-batch_scale(p));
}

Tensor adversarial_uniform_loss(const Tensor& p) {
  check_distribution(p, "adversarial_uniform_loss");
  return sum(floored_log(p)) * (-0.5 * batch_scale(p));
}

Tensor info_nce_from_similarity(const Tensor& sim, std::span<const std::size_t> positive,
                                const std::vector<std::vector<std::size_t>>& negatives,
                                double tau) {
  if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
  if (sim.rank() != 2) throw ShapeError("similarity matrix must be rank 2");
  const std::size_t n = sim.dim(0), cols = sim.dim(1);
  if (positive.size() != n || negatives.size() != n) {
    throw ShapeError("info_nce needs one positive and one negative set per sample");
  }
  // Candidate columns per sample, positive first.
  auto cand = std::make_shared<std::vector<std::vector<std::size_t>>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (negatives[i].empty()) throw ValidationError("info_nce needs at least one negative");
    auto& c = (*cand)[i];
    c.push_back(positive[i]);
    c.insert(c.end(), negatives[i].begin(), negatives[i].end());
    for (auto j : c) {
      if (j >= cols) throw ShapeError("info_nce column index out of range");
    }
  }
  const auto s = sim.values();
  auto soft = std::make_shared<std::vector<std::vector<double>>>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = (*cand)[i];
    double mx = -std::numeric_limits<double>::infinity();
    for (auto j : c) mx = std::max(mx, s[i * cols + j] / tau);
    double z = 0.0;
    auto& w = (*soft)[i];
    w.resize(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
      w[k] = std::exp(s[i * cols + c[k]] / tau - mx);
      z += w[k];
    }
    for (auto& v : w) v /= z;
    // -log softmax_pos = logsumexp - s_pos/tau
    total += mx + std::log(z) - s[i * cols + c[0]] / tau;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return make_op({1}, {total * inv_n}, {sim}, [n, cols, tau, inv_n, cand, soft](Node& self) {
    auto& gs = self.parents[0]->grad_buffer();
    const double g = self.grad[0] * inv_n / tau;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = (*cand)[i];
      const auto& w = (*soft)[i];
      for (std::size_t k = 0; k < c.size(); ++k) gs[i * cols + c[k]] += g * w[k];
      gs[i * cols + c[0]] -= g;
    }
  });
}

Tensor info_nce_batch(const Tensor& image, const Tensor& prompts,
                      std::span<const std::size_t> positive,
                      const std::vector<std::vector<std::size_t>>& negatives, double tau) {
  if (image.rank() != 2 || prompts.rank() != 2 || image.dim(1) != prompts.dim(1)) {
    throw ShapeError("info_nce embeddings must share their dimension");
  }
  const auto sim = matmul(normalize_rows(image), transpose(normalize_rows(prompts)));
  return info_nce_from_similarity(sim, positive, negatives, tau);
}

Tensor info_nce(const Tensor& f, const Tensor& f_pos, const std::vector<Tensor>& negatives,
                double tau) {
  if (negatives.empty()) throw ValidationError("info_nce needs at least one negative");
  const std::size_t d = f.numel();
  auto as_row = [d](const Tensor& t) {
    if (t.numel() != d) throw ShapeError("info_nce embeddings must share their dimension");
    return reshape(t, {1, d});
  };
  std::vector<Tensor> rows{as_row(f_pos)};
  std::vector<std::size_t> neg_idx;
  for (const auto& neg : negatives) {
    neg_idx.push_back(rows.size());
    rows.push_back(as_row(neg));
  }
  const std::vector<std::size_t> pos{0};
  return info_nce_batch(as_row(f), concat_rows(rows), pos, {neg_idx}, tau);
}

Routing routing(bool ce_trains_encoder) {
  Routing r;
  r.itcl = {ParamGroup::image_encoder, ParamGroup::text_encoder};
  r.cl = {ParamGroup::image_encoder, ParamGroup::classifier};
  r.ce = ce_trains_encoder
             ? std::vector<ParamGroup>{ParamGroup::image_encoder, ParamGroup::classifier}
             : std::vector<ParamGroup>{ParamGroup::classifier};
  r.adv = {ParamGroup::image_encoder};
  return r;
}

Tensor total_loss(const LossTerms& terms, const LossWeights& w) {
  w.validate();
  return terms.itcl + terms.cl * w.alpha1 + terms.ce * w.alpha2 + terms.adv * w.alpha3;
}

LossBreakdown breakdown(const LossTerms& terms, const LossWeights& w) {
  LossBreakdown b;
  b.l_itcl = terms.itcl.item();
  b.l_cl = terms.cl.item();
  b.l_ce = terms.ce.item();
  b.l_adv = terms.adv.item();
  b.total = b.l_itcl + w.alpha1 * b.l_cl + w.alpha2 * b.l_ce + w.alpha3 * b.l_adv;
  return b;
}

}  // namespace cimt::loss
