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

// Style and content operators on (N,C,H,W) feature maps.
//
// Style is the per-sample, per-channel spatial mean and standard deviation
// of a map; content is what remains after removing it (the normalized
// planes) together with which channel slot each plane occupies.

#include <cstddef>
#include <vector>

#include "cimt/rng.hpp"
#include "cimt/tensor.hpp"

namespace cimt::causal {

inline constexpr double kDefaultStatEps = 1e-5;
inline constexpr double kDefaultContentEps = 1e-5;

struct StyleStats {
  Tensor mu;     // (N,C)
  Tensor sigma;  // (N,C), strictly positive
};

// One permutation of {0..C-1} per sample. Slot c of sample n receives the
// normalized plane of channel per_sample[n][c].
struct ChannelPermutation {
  std::vector<std::vector<std::size_t>> per_sample;

  static ChannelPermutation identity(std::size_t batch, std::size_t channels);
  static ChannelPermutation random(std::size_t batch, std::size_t channels, Rng& rng);
  // Throws ValidationError unless every row is a bijection on {0..channels-1}.
  void validate(std::size_t batch, std::size_t channels) const;
};

// Checks the FeatureMap invariants: rank 4, N,C >= 1, H*W >= 2.
void check_feature_map(const Tensor& m);

// mu = spatial mean, sigma = sqrt(population variance + eps_stat). Both are
// differentiable with respect to m.
StyleStats channel_stats(const Tensor& m, double eps_stat = kDefaultStatEps);

// Per-sample convex mix: lambda[n] * own + (1 - lambda[n]) * other, applied
// to mu and sigma alike. Throws ValidationError for lambda outside [0,1].
StyleStats interpolate_style(const StyleStats& own, const StyleStats& other,
                             const std::vector<double>& lambda);

// target.sigma * (m - mu(m)) / sigma(m) + target.mu, with the source stats
// taken from channel_stats(m, eps_stat). Gradients reach m and, when they
// require grad, the target tensors.
Tensor adain(const Tensor& m, const StyleStats& target,
             double eps_stat = kDefaultStatEps);

struct StylePerturbMeta {
  std::vector<std::size_t> source;  // style donor for each sample
  std::vector<double> lambda;       // per-sample interpolation weight
};

// Random donor permutation (redrawn once if it has a fixed point, then kept)
// and lambda ~ U(0,1) per sample. Throws ValidationError for batch < 2.
StylePerturbMeta draw_style_meta(std::size_t batch, Rng& rng);

// AdaIN of m onto the mixed style of (m, m[source]). The target statistics
// are constants: only the normalization path of each source sample carries
// gradient.
Tensor apply_style_perturb(const Tensor& m, const StylePerturbMeta& meta,
                           double eps_stat = kDefaultStatEps);

struct StylePerturbation {
  Tensor perturbed;
  StylePerturbMeta meta;
};

StylePerturbation style_perturb(const Tensor& m, Rng& rng,
                                double eps_stat = kDefaultStatEps);

// Normalizes each channel with sqrt(raw variance + eps), moves the normalized
// planes between channel slots according to `perm`, then rescales every slot
// with the ORIGINAL statistics of that slot. Differentiable through m on the
// content path and the reinjected-statistics path.
Tensor content_randomize(const Tensor& m, const ChannelPermutation& perm,
                         double eps = kDefaultContentEps);

}  // namespace cimt::causal
