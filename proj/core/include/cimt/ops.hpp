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
#include <span>
#include <vector>

#include "cimt/tensor.hpp"

namespace cimt {

enum class EwiseOp { add, sub, mul, div, pow, exp, log, relu };

// Elementwise op. For binary ops `b` must have the same shape as `a`, be a
// single element, or be a rank-1 vector matching dim 1 of a rank>=2 `a`
// (per-channel broadcast). Unary ops (exp, log, relu) ignore `b`.
// Throws ShapeError on incompatible shapes and DomainError for log of a
// non-positive value, division by zero, or a negative base under a
// non-integer power.
Tensor ewise(EwiseOp op, const Tensor& a, const Tensor& b);
Tensor ewise(EwiseOp op, const Tensor& a, double b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor pow(const Tensor& a, double exponent);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
// Gradient is passed through strictly inside (lo, hi) and zero elsewhere.
Tensor clamp(const Tensor& a, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }

// (m x k) . (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// 3x3 cross-correlation with zero padding. input (N,Cin,H,W), kernel
// (Cout,Cin,3,3); stride in {1,2}, pad in {0,1}. H' = (H + 2 pad - 3) / stride
// + 1; a remainder is accepted only when it is covered by the padding, so
// every input pixel is read (same for W).
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& logits, std::size_t axis);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// (N,C,H,W) -> (N,C) spatial mean; also the global average pool.
Tensor spatial_mean(const Tensor& m);
// (N,C,H,W) -> (N,C): sqrt(population variance over H*W + eps).
Tensor spatial_std(const Tensor& m, double eps);

// Rows of a rank-2 tensor scaled to unit L2 norm. Throws DomainError on a
// zero row.
Tensor normalize_rows(const Tensor& a);

// out[i] = mean over tokens[i] of table[token] ; table (V,D) -> (P,D).
// Every token list must be non-empty.
Tensor embedding_mean(const Tensor& table,
                      const std::vector<std::vector<std::size_t>>& tokens);

// Rows `index` of a rank-2 tensor, in order (duplicates allowed).
Tensor select_rows(const Tensor& a, std::span<const std::size_t> index);

// Stacks rank-2 tensors with equal column counts along dim 0.
Tensor concat_rows(const std::vector<Tensor>& parts);

}  // namespace cimt
