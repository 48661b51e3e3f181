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

#include "cimt/causal.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "cimt/error.hpp"
#include "cimt/ops.hpp"

namespace cimt::causal {

namespace {

struct PlaneStats {
  std::vector<double> mu;
  std::vector<double> scale;  // sqrt(raw variance + eps)
};

PlaneStats plane_stats(std::span<const double> x, std::size_t planes,
                       std::size_t hw, double eps) {
  PlaneStats s{std::vector<double>(planes), std::vector<double>(planes)};
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t i = 0; i < planes; ++i) {
    const double* p = x.data() + i * hw;
    double total = 0.0;
    for (std::size_t j = 0; j < hw; ++j) total += p[j];
    const double mu = total * inv;
    double var = 0.0;
    for (std::size_t j = 0; j < hw; ++j) var += (p[j] - mu) * (p[j] - mu);
    s.mu[i] = mu;
    s.scale[i] = std::sqrt(var * inv + eps);
  }
  return s;
}

// Accumulates into gx the gradient of z = (x - mu) / scale given dL/dz,
// for one plane of length hw (population statistics).
void normalize_backward(const double* gz, const double* z, double scale,
                        std::size_t hw, double* gx) {
  double mean_g = 0.0, mean_gz = 0.0;
  for (std::size_t j = 0; j < hw; ++j) {
    mean_g += gz[j];
    mean_gz += gz[j] * z[j];
  }
  const double inv = 1.0 / static_cast<double>(hw);
  mean_g *= inv;
  mean_gz *= inv;
  const double inv_scale = 1.0 / scale;
  for (std::size_t j = 0; j < hw; ++j) {
    gx[j] += inv_scale * (gz[j] - mean_g - z[j] * mean_gz);
  }
}

void require_positive_eps(double eps, const char* what) {
  if (!(eps > 0.0)) throw ValidationError(std::string(what) + " must be > 0");
}

}  // namespace

ChannelPermutation ChannelPermutation::identity(std::size_t batch,
                                                std::size_t channels) {
  ChannelPermutation p;
  p.per_sample.assign(batch, std::vector<std::size_t>(channels));
  for (auto& row : p.per_sample) std::iota(row.begin(), row.end(), std::size_t{0});
  return p;
}

ChannelPermutation ChannelPermutation::random(std::size_t batch,
                                              std::size_t channels, Rng& rng) {
  ChannelPermutation p;
  p.per_sample.reserve(batch);
  for (std::size_t n = 0; n < batch; ++n) p.per_sample.push_back(rng.permutation(channels));
  return p;
}

void ChannelPermutation::validate(std::size_t batch, std::size_t channels) const {
  if (per_sample.size() != batch) {
    throw ValidationError("channel permutation has " + std::to_string(per_sample.size()) +
                          " rows for a batch of " + std::to_string(batch));
  }
  std::vector<char> seen(channels);
  for (const auto& row : per_sample) {
    if (row.size() != channels) throw ValidationError("channel permutation row has wrong length");
    std::fill(seen.begin(), seen.end(), 0);
    for (auto c : row) {
      if (c >= channels || seen[c]) throw ValidationError("channel permutation is not a bijection");
      seen[c] = 1;
    }
  }
}

void check_feature_map(const Tensor& m) {
  if (m.rank() != 4) {
    throw ShapeError("feature map must be (N,C,H,W), got " + to_string(m.shape()));
  }
  if (m.dim(2) * m.dim(3) < 2) throw ShapeError("feature map needs H*W >= 2");
}

StyleStats channel_stats(const Tensor& m, double eps_stat) {
  check_feature_map(m);
  require_positive_eps(eps_stat, "eps_stat");
  return {spatial_mean(m), spatial_std(m, eps_stat)};
}

StyleStats interpolate_style(const StyleStats& own, const StyleStats& other,
                             const std::vector<double>& lambda) {
  const auto& shape = own.mu.shape();
  if (own.sigma.shape() != shape || other.mu.shape() != shape ||
      other.sigma.shape() != shape || shape.size() != 2) {
    throw ShapeError("interpolate_style needs matching (N,C) statistics");
  }
  const std::size_t n = shape[0], c = shape[1];
  if (lambda.size() != n) throw ShapeError("interpolate_style needs one lambda per sample");
  std::vector<double> w(n * c), w_other(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lambda[i] >= 0.0 && lambda[i] <= 1.0)) {
      throw ValidationError("interpolation weight outside [0,1]");
    }
    std::fill_n(w.begin() + i * c, c, lambda[i]);
    std::fill_n(w_other.begin() + i * c, c, 1.0 - lambda[i]);
  }
  const auto lw = Tensor::from(shape, std::move(w));
  const auto lo = Tensor::from(shape, std::move(w_other));
  return {own.mu * lw + other.mu * lo, own.sigma * lw + other.sigma * lo};
}

Tensor adain(const Tensor& m, const StyleStats& target, double eps_stat) {
  check_feature_map(m);
  require_positive_eps(eps_stat, "eps_stat");
  const std::size_t planes = m.dim(0) * m.dim(1), hw = m.dim(2) * m.dim(3);
  const Shape stat_shape{m.dim(0), m.dim(1)};
  if (target.mu.shape() != stat_shape || target.sigma.shape() != stat_shape) {
    throw ShapeError("adain target statistics must be " + to_string(stat_shape));
  }
  const auto ts = target.sigma.values();
  const auto tm = target.mu.values();
  for (double s : ts) {
    if (!(s > 0.0)) throw ValidationError("adain target sigma must be > 0");
  }
  const auto x = m.values();
  auto stats = std::make_shared<PlaneStats>(plane_stats(x, planes, hw, eps_stat));
  auto z = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < planes; ++i) {
    const double mu = stats->mu[i], inv = 1.0 / stats->scale[i];
    for (std::size_t j = 0; j < hw; ++j) {
      const std::size_t k = i * hw + j;
      (*z)[k] = (x[k] - mu) * inv;
      out[k] = ts[i] * (*z)[k] + tm[i];
    }
  }
  return make_op(m.shape(), std::move(out), {m, target.mu, target.sigma},
                 [planes, hw, stats, z](Node& self) {
                   Node& nm = *self.parents[0];
                   Node& nmu = *self.parents[1];
                   Node& nsig = *self.parents[2];
                   const auto& g = self.grad;
                   if (nmu.requires_grad) {
                     auto& gmu = nmu.grad_buffer();
                     for (std::size_t i = 0; i < planes; ++i) {
                       double s = 0.0;
                       for (std::size_t j = 0; j < hw; ++j) s += g[i * hw + j];
                       gmu[i] += s;
                     }
                   }
                   if (nsig.requires_grad) {
                     auto& gs = nsig.grad_buffer();
                     for (std::size_t i = 0; i < planes; ++i) {
                       double s = 0.0;
                       for (std::size_t j = 0; j < hw; ++j) s += g[i * hw + j] * (*z)[i * hw + j];
                       gs[i] += s;
                     }
                   }
                   if (nm.requires_grad) {
                     auto& gx = nm.grad_buffer();
                     std::vector<double> gz(hw);
                     for (std::size_t i = 0; i < planes; ++i) {
                       const double t = nsig.value[i];
                       for (std::size_t j = 0; j < hw; ++j) gz[j] = g[i * hw + j] * t;
                       normalize_backward(gz.data(), z->data() + i * hw, stats->scale[i], hw,
                                          gx.data() + i * hw);
                     }
                   }
                 });
}

StylePerturbMeta draw_style_meta(std::size_t batch, Rng& rng) {
  if (batch < 2) throw ValidationError("style perturbation needs a batch of at least 2");
  auto has_fixed_point = [](const std::vector<std::size_t>& p) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] == i) return true;
    }
    return false;
  };
  StylePerturbMeta meta;
  meta.source = rng.permutation(batch);
  if (has_fixed_point(meta.source)) meta.source = rng.permutation(batch);
  meta.lambda.resize(batch);
  for (auto& l : meta.lambda) l = rng.uniform();
  return meta;
}

Tensor apply_style_perturb(const Tensor& m, const StylePerturbMeta& meta,
                           double eps_stat) {
  check_feature_map(m);
  const std::size_t n = m.dim(0), c = m.dim(1);
  if (meta.source.size() != n || meta.lambda.size() != n) {
    throw ValidationError("style perturbation metadata does not match the batch");
  }
  for (auto s : meta.source) {
    if (s >= n) throw ValidationError("style donor index out of range");
  }
  const auto own = channel_stats(m.detach(), eps_stat);
  const auto own_mu = own.mu.values();
  const auto own_sig = own.sigma.values();
  std::vector<double> donor_mu(n * c), donor_sig(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(own_mu.begin() + meta.source[i] * c, c, donor_mu.begin() + i * c);
    std::copy_n(own_sig.begin() + meta.source[i] * c, c, donor_sig.begin() + i * c);
  }
  const StyleStats donor{Tensor::from({n, c}, std::move(donor_mu)),
                         Tensor::from({n, c}, std::move(donor_sig))};
  return adain(m, interpolate_style(own, donor, meta.lambda), eps_stat);
}

StylePerturbation style_perturb(const Tensor& m, Rng& rng, double eps_stat) {
  check_feature_map(m);
  auto meta = draw_style_meta(m.dim(0), rng);
  auto out = apply_style_perturb(m, meta, eps_stat);
  return {std::move(out), std::move(meta)};
}

Tensor content_randomize(const Tensor& m, const ChannelPermutation& perm, double eps) {
  check_feature_map(m);
  require_positive_eps(eps, "content eps");
  const std::size_t n = m.dim(0), c = m.dim(1), hw = m.dim(2) * m.dim(3);
  perm.validate(n, c);
  const auto x = m.values();
  auto stats = std::make_shared<PlaneStats>(plane_stats(x, n * c, hw, eps));
  auto z = std::make_shared<std::vector<double>>(x.size());
  for (std::size_t i = 0; i < n * c; ++i) {
    const double mu = stats->mu[i], inv = 1.0 / stats->scale[i];
    for (std::size_t j = 0; j < hw; ++j) (*z)[i * hw + j] = (x[i * hw + j] - mu) * inv;
  }
  std::vector<double> out(x.size());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t slot = 0; slot < c; ++slot) {
      const std::size_t dst = s * c + slot;
      const std::size_t src = s * c + perm.per_sample[s][slot];
      const double scale = stats->scale[dst], mu = stats->mu[dst];
      for (std::size_t j = 0; j < hw; ++j) {
        out[dst * hw + j] = (*z)[src * hw + j] * scale + mu;
      }
    }
  }
  auto rows = std::make_shared<std::vector<std::vector<std::size_t>>>(perm.per_sample);
  return make_op(m.shape(), std::move(out), {m}, [n, c, hw, stats, z, rows](Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    const auto& g = self.grad;
    const double inv_hw = 1.0 / static_cast<double>(hw);
    // dL/dz for every source plane, gathered from the slot it moved to.
    std::vector<double> gz(n * c * hw);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t slot = 0; slot < c; ++slot) {
        const std::size_t dst = s * c + slot;
        const std::size_t src = s * c + (*rows)[s][slot];
        const double scale = stats->scale[dst];
        double g_scale = 0.0, g_mu = 0.0;
        for (std::size_t j = 0; j < hw; ++j) {
          const double gj = g[dst * hw + j];
          gz[src * hw + j] += gj * scale;
          g_scale += gj * (*z)[src * hw + j];
          g_mu += gj;
        }
        // Reinjected statistics of the destination slot depend on its own
        // raw plane: d scale / dx_j = z_j / hw, d mu / dx_j = 1 / hw.
        for (std::size_t j = 0; j < hw; ++j) {
          gx[dst * hw + j] += (g_scale * (*z)[dst * hw + j] + g_mu) * inv_hw;
        }
      }
    }
    for (std::size_t i = 0; i < n * c; ++i) {
      normalize_backward(gz.data() + i * hw, z->data() + i * hw, stats->scale[i], hw,
                         gx.data() + i * hw);
    }
  });
}

}  // namespace cimt::causal
