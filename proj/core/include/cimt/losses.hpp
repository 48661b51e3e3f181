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

// Objectives over two-class prediction distributions (N,2): class 0 is
// non-thickening, class 1 is thickening. All batch reductions are means.

#include <cstddef>
#include <span>
#include <vector>

#include "cimt/tensor.hpp"

namespace cimt::loss {

inline constexpr double kProbFloor = 1e-12;

struct LossWeights {
  double alpha1 = 0.5;  // consistency
  double alpha2 = 0.1;  // cross-entropy
  double alpha3 = 0.1;  // adversarial uniform
  double tau = 0.07;    // contrastive temperature

  // Throws ValidationError unless tau > 0 and every alpha >= 0.
  void validate() const;
};

// Scalar values of one evaluation of the objective, in nats.
struct LossBreakdown {
  double l_itcl = 0.0;
  double l_cl = 0.0;
  double l_ce = 0.0;
  double l_adv = 0.0;
  double total = 0.0;
};

// Recorded loss terms; a disabled term is a constant zero.
struct LossTerms {
  Tensor itcl;
  Tensor cl;
  Tensor ce;
  Tensor adv;
};

// Batch mean of sum_k p_k ln(p_k / q_k), probabilities floored at kProbFloor.
Tensor kl_div(const Tensor& p, const Tensor& q);
// Batch mean of KL(p||q) + KL(q||p).
Tensor consistency_loss(const Tensor& p, const Tensor& p_pert);
// Batch mean of -ln p[n, y_n]; labels must be 0 or 1.
Tensor cross_entropy(const Tensor& p, std::span<const int> labels);
// Batch mean of -(1/2) sum_k ln p[n,k]; minimum ln 2 at the uniform row.
Tensor adversarial_uniform_loss(const Tensor& p);

// -ln softmax over {positive, negatives} of cosine / tau, for one image
// embedding. Throws ValidationError for an empty negative set or tau <= 0,
// DomainError for a zero-norm embedding.
Tensor info_nce(const Tensor& f, const Tensor& f_pos, const std::vector<Tensor>& negatives,
                double tau);

// Batched form over a similarity matrix sim (N,P): for sample n the positive
// is column positive[n] and the negatives are columns negatives[n]. Returns
// the batch mean.
Tensor info_nce_from_similarity(const Tensor& sim, std::span<const std::size_t> positive,
                                const std::vector<std::vector<std::size_t>>& negatives,
                                double tau);

// Batched form over raw embeddings: image (N,D), prompts (P,D). Both sides are
// L2-normalized before the dot product.
Tensor info_nce_batch(const Tensor& image, const Tensor& prompts,
                      std::span<const std::size_t> positive,
                      const std::vector<std::vector<std::size_t>>& negatives, double tau);

enum class ParamGroup { image_encoder, classifier, text_encoder };

// Parameter groups each term is allowed to update.
struct Routing {
  std::vector<ParamGroup> itcl;
  std::vector<ParamGroup> cl;
  std::vector<ParamGroup> ce;
  std::vector<ParamGroup> adv;
};

Routing routing(bool ce_trains_encoder);

// l_itcl + alpha1 l_cl + alpha2 l_ce + alpha3 l_adv. Routing is realised by
// the caller when it builds each term (detached inputs for excluded groups).
Tensor total_loss(const LossTerms& terms, const LossWeights& w);

LossBreakdown breakdown(const LossTerms& terms, const LossWeights& w);

}  // namespace cimt::loss
