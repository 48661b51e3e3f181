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

#include "cimt/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cimt/error.hpp"

namespace cimt {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

enum class Broadcast { same, scalar, channel };

struct BroadcastPlan {
  Broadcast kind;
  std::size_t channels = 1;
  std::size_t inner = 1;  // contiguous run sharing one channel value
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  if (a == b) return {Broadcast::same};
  if (numel(b) == 1) return {Broadcast::scalar};
  if (b.size() == 1 && a.size() >= 2 && b[0] == a[1]) {
    std::size_t inner = 1;
    for (std::size_t i = 2; i < a.size(); ++i) inner *= a[i];
    return {Broadcast::channel, a[1], inner};
  }
  throw ShapeError("cannot broadcast " + to_string(b) + " against " +
                   to_string(a));
}

// Index into b for flat index i of a.
inline std::size_t b_index(const BroadcastPlan& plan, std::size_t i) {
  switch (plan.kind) {
    case Broadcast::same:
      return i;
    case Broadcast::scalar:
      return 0;
    case Broadcast::channel:
      return (i / plan.inner) % plan.channels;
  }
  return 0;
}

bool is_integer(double x) { return std::floor(x) == x; }

Tensor binary(EwiseOp op, const Tensor& a, const Tensor& b) {
  const auto plan = plan_broadcast(a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t n = av.size();
  std::vector<double> out(n);
  switch (op) {
    case EwiseOp::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[b_index(plan, i)];
      break;
    case EwiseOp::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[b_index(plan, i)];
      break;
    case EwiseOp::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[b_index(plan, i)];
      break;
    case EwiseOp::div:
      for (std::size_t i = 0; i < n; ++i) {
        const double d = bv[b_index(plan, i)];
        if (d == 0.0) throw DomainError("division by zero");
        out[i] = av[i] / d;
      }
      break;
    case EwiseOp::pow:
      for (std::size_t i = 0; i < n; ++i) {
        const double e = bv[b_index(plan, i)];
        if (av[i] < 0.0 && !is_integer(e)) {
          throw DomainError("negative base under non-integer power");
        }
        if (av[i] == 0.0 && e < 0.0) throw DomainError("zero to negative power");
        out[i] = std::pow(av[i], e);
      }
      break;
    default:
      throw std::logic_error("binary() called with unary op");
  }
  auto backward = [op, plan](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const auto& g = self.grad;
    const auto& av = na.value;
    const auto& bv = nb.value;
    const std::size_t n = g.size();
    double* ga = na.requires_grad ? na.grad_buffer().data() : nullptr;
    double* gb = nb.requires_grad ? nb.grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = b_index(plan, i);
      switch (op) {
        case EwiseOp::add:
          if (ga) ga[i] += g[i];
          if (gb) gb[j] += g[i];
          break;
        case EwiseOp::sub:
          if (ga) ga[i] += g[i];
          if (gb) gb[j] -= g[i];
          break;
        case EwiseOp::mul:
          if (ga) ga[i] += g[i] * bv[j];
          if (gb) gb[j] += g[i] * av[i];
          break;
        case EwiseOp::div:
          if (ga) ga[i] += g[i] / bv[j];
          if (gb) gb[j] -= g[i] * av[i] / (bv[j] * bv[j]);
          break;
        case EwiseOp::pow: {
          const double e = bv[j];
          if (ga && !(av[i] == 0.0 && e < 1.0)) {
            ga[i] += g[i] * e * std::pow(av[i], e - 1.0);
          }
          if (gb && av[i] > 0.0) {
            gb[j] += g[i] * self.value[i] * std::log(av[i]);
          }
          break;
        }
        default:
          break;
      }
    }
  };
  return make_op(a.shape(), std::move(out), {a, b}, backward);
}

Tensor unary(EwiseOp op, const Tensor& a) {
  const auto av = a.values();
  const std::size_t n = av.size();
  std::vector<double> out(n);
  switch (op) {
    case EwiseOp::exp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(av[i]);
      break;
    case EwiseOp::log:
      for (std::size_t i = 0; i < n; ++i) {
        if (!(av[i] > 0.0)) throw DomainError("log of non-positive value");
        out[i] = std::log(av[i]);
      }
      break;
    case EwiseOp::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
      break;
    default:
      throw std::logic_error("unary() called with binary op");
  }
  auto backward = [op](Node& self) {
    Node& na = *self.parents[0];
    auto& ga = na.grad_buffer();
    const auto& g = self.grad;
    const auto& av = na.value;
    const std::size_t n = g.size();
    switch (op) {
      case EwiseOp::exp:
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * self.value[i];
        break;
      case EwiseOp::log:
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / av[i];
        break;
      case EwiseOp::relu:
        for (std::size_t i = 0; i < n; ++i) {
          if (av[i] > 0.0) ga[i] += g[i];
        }
        break;
      default:
        break;
    }
  };
  return make_op(a.shape(), std::move(out), {a}, backward);
}

}  // namespace

Tensor ewise(EwiseOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case EwiseOp::exp:
    case EwiseOp::log:
    case EwiseOp::relu:
      return unary(op, a);
    default:
      return binary(op, a, b);
  }
}

Tensor ewise(EwiseOp op, const Tensor& a, double b) {
  return ewise(op, a, Tensor::scalar(b));
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(EwiseOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(EwiseOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(EwiseOp::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(EwiseOp::div, a, b); }
Tensor add(const Tensor& a, double b) { return binary(EwiseOp::add, a, Tensor::scalar(b)); }
Tensor mul(const Tensor& a, double b) { return binary(EwiseOp::mul, a, Tensor::scalar(b)); }
Tensor pow(const Tensor& a, double exponent) {
  return binary(EwiseOp::pow, a, Tensor::scalar(exponent));
}
Tensor exp(const Tensor& a) { return unary(EwiseOp::exp, a); }
Tensor log(const Tensor& a) { return unary(EwiseOp::log, a); }
Tensor relu(const Tensor& a) { return unary(EwiseOp::relu, a); }

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw DomainError("clamp with lo > hi");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::clamp(av[i], lo, hi);
  return make_op(a.shape(), std::move(out), {a}, [lo, hi](Node& self) {
    Node& na = *self.parents[0];
    auto& ga = na.grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double x = na.value[i];
      if (x > lo && x < hi) ga[i] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul of " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  MapMat(out.data(), m, n).noalias() =
      ConstMapMat(a.values().data(), m, k) * ConstMapMat(b.values().data(), k, n);
  return make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    ConstMapMat g(self.grad.data(), m, n);
    if (na.requires_grad) {
      MapMat(na.grad_buffer().data(), m, k).noalias() +=
          g * ConstMapMat(nb.value.data(), k, n).transpose();
    }
    if (nb.requires_grad) {
      MapMat(nb.grad_buffer().data(), k, n).noalias() +=
          ConstMapMat(na.value.data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs rank 2");
  const auto r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  MapMat(out.data(), c, r) = ConstMapMat(a.values().data(), r, c).transpose();
  return make_op({c, r}, std::move(out), {a}, [r, c](Node& self) {
    Node& na = *self.parents[0];
    MapMat(na.grad_buffer().data(), r, c) +=
        ConstMapMat(self.grad.data(), c, r).transpose();
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("reshape " + to_string(a.shape()) + " to " +
                     to_string(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_op(std::move(shape), std::move(out), {a}, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

namespace {

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, ho, wo;
  int stride, pad;
  std::size_t k() const { return cin * 9; }
  std::size_t p() const { return ho * wo; }
};

// col is (Cin*9) x (N*Ho*Wo), column index = n*P + oy*Wo + ox.
void im2col(const ConvGeometry& g, const double* in, double* col) {
  const std::size_t np = g.n * g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col + ((c * 9) + ky * 3 + kx) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          const double* plane = in + (n * g.cin + c) * g.h * g.w;
          double* dst = row + n * g.p();
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy) * g.stride + ky - g.pad;
            double* drow = dst + oy * g.wo;
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill(drow, drow + g.wo, 0.0);
              continue;
            }
            const double* srow = plane + iy * g.w;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox) * g.stride + kx - g.pad;
              drow[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : srow[ix];
            }
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* in) {
  const std::size_t np = g.n * g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col + ((c * 9) + ky * 3 + kx) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          double* plane = in + (n * g.cin + c) * g.h * g.w;
          const double* src = row + n * g.p();
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy) * g.stride + ky - g.pad;
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            double* drow = plane + iy * g.w;
            const double* srow = src + oy * g.wo;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox) * g.stride + kx - g.pad;
              if (ix >= 0 && ix < static_cast<long>(g.w)) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  if (input.rank() != 4) throw ShapeError("conv2d input must be (N,C,H,W)");
  if (kernel.rank() != 4 || kernel.dim(2) != 3 || kernel.dim(3) != 3 ||
      kernel.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d kernel " + to_string(kernel.shape()) +
                     " incompatible with input " + to_string(input.shape()));
  }
  if (stride != 1 && stride != 2) throw ValidationError("conv2d stride must be 1 or 2");
  if (pad != 0 && pad != 1) throw ValidationError("conv2d pad must be 0 or 1");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernel.dim(0);
  g.stride = stride;
  g.pad = pad;
  if (g.h < 3 || g.w < 3) throw ShapeError("conv2d needs H,W >= 3");
  const std::size_t span_h = g.h + 2 * pad - 3, span_w = g.w + 2 * pad - 3;
  // A remainder is tolerated only while it lies in the trailing zero padding;
  // otherwise real input rows or columns would never be read.
  const auto rem_h = span_h % static_cast<std::size_t>(stride);
  const auto rem_w = span_w % static_cast<std::size_t>(stride);
  if (rem_h > static_cast<std::size_t>(pad) || rem_w > static_cast<std::size_t>(pad)) {
    throw ShapeError("conv2d output size is not integral for input " +
                     to_string(input.shape()) + " stride " + std::to_string(stride));
  }
  g.ho = span_h / stride + 1;
  g.wo = span_w / stride + 1;

  const std::size_t k = g.k(), p = g.p(), np = g.n * p;
  auto col = std::make_shared<std::vector<double>>(k * np);
  im2col(g, input.values().data(), col->data());
  RowMat prod = ConstMapMat(kernel.values().data(), g.cout, k) *
                ConstMapMat(col->data(), k, np);
  std::vector<double> out(g.n * g.cout * p);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      const double* src = prod.data() + co * np + n * p;
      std::copy(src, src + p, out.data() + (n * g.cout + co) * p);
    }
  }
  return make_op({g.n, g.cout, g.ho, g.wo}, std::move(out), {input, kernel},
                 [g, col](Node& self) {
                   Node& ni = *self.parents[0];
                   Node& nk = *self.parents[1];
                   const std::size_t k = g.k(), p = g.p(), np = g.n * p;
                   RowMat gout(g.cout, np);
                   for (std::size_t n = 0; n < g.n; ++n) {
                     for (std::size_t co = 0; co < g.cout; ++co) {
                       const double* src = self.grad.data() + (n * g.cout + co) * p;
                       std::copy(src, src + p, gout.data() + co * np + n * p);
                     }
                   }
                   if (nk.requires_grad) {
                     MapMat(nk.grad_buffer().data(), g.cout, k).noalias() +=
                         gout * ConstMapMat(col->data(), k, np).transpose();
                   }
                   if (ni.requires_grad) {
                     RowMat gcol = ConstMapMat(nk.value.data(), g.cout, k).transpose() * gout;
                     col2im_add(g, gcol.data(), ni.grad_buffer().data());
                   }
                 });
}

Tensor softmax(const Tensor& logits, std::size_t axis) {
  const auto& s = logits.shape();
  if (axis >= s.size()) throw ShapeError("softmax axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const auto x = logits.values();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, x[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(x[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  return make_op(s, std::move(out), {logits}, [outer, inner, len](Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          dot += g[base + j * inner] * y[base + j * inner];
        }
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t i = base + j * inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_op({1}, {total}, {a}, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    const double g = self.grad[0];
    for (double& v : ga) v += g;
  });
}

Tensor mean(const Tensor& a) { return mul(sum(a), 1.0 / static_cast<double>(a.numel())); }

namespace {

void check_feature_map(const Tensor& m, const char* what) {
  if (m.rank() != 4) {
    throw ShapeError(std::string(what) + " needs an (N,C,H,W) map, got " +
                     to_string(m.shape()));
  }
}

}  // namespace

Tensor spatial_mean(const Tensor& m) {
  check_feature_map(m, "spatial_mean");
  const std::size_t nc = m.dim(0) * m.dim(1), hw = m.dim(2) * m.dim(3);
  const auto x = m.values();
  std::vector<double> out(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += x[i * hw + j];
    out[i] = s / static_cast<double>(hw);
  }
  return make_op({m.dim(0), m.dim(1)}, std::move(out), {m}, [nc, hw](Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < nc; ++i) {
      const double g = self.grad[i] * inv;
      for (std::size_t j = 0; j < hw; ++j) gx[i * hw + j] += g;
    }
  });
}

Tensor spatial_std(const Tensor& m, double eps) {
  check_feature_map(m, "spatial_std");
  if (!(eps >= 0.0)) throw DomainError("spatial_std eps must be >= 0");
  const std::size_t nc = m.dim(0) * m.dim(1), hw = m.dim(2) * m.dim(3);
  if (hw < 2) throw ShapeError("spatial_std needs H*W >= 2");
  const auto x = m.values();
  std::vector<double> out(nc);
  auto means = std::make_shared<std::vector<double>>(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += x[i * hw + j];
    const double mu = s / static_cast<double>(hw);
    double v = 0.0;
    for (std::size_t j = 0; j < hw; ++j) {
      const double d = x[i * hw + j] - mu;
      v += d * d;
    }
    (*means)[i] = mu;
    out[i] = std::sqrt(v / static_cast<double>(hw) + eps);
    if (!(out[i] > 0.0)) throw DomainError("spatial_std of a constant channel with eps = 0");
  }
  return make_op({m.dim(0), m.dim(1)}, std::move(out), {m},
                 [nc, hw, means](Node& self) {
                   Node& nm = *self.parents[0];
                   auto& gx = nm.grad_buffer();
                   const double inv = 1.0 / static_cast<double>(hw);
                   for (std::size_t i = 0; i < nc; ++i) {
                     const double coef = self.grad[i] * inv / self.value[i];
                     const double mu = (*means)[i];
                     for (std::size_t j = 0; j < hw; ++j) {
                       gx[i * hw + j] += coef * (nm.value[i * hw + j] - mu);
                     }
                   }
                 });
}

Tensor normalize_rows(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("normalize_rows needs rank 2");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto x = a.values();
  std::vector<double> out(x.size());
  auto norms = std::make_shared<std::vector<double>>(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x[i * c + j] * x[i * c + j];
    const double nrm = std::sqrt(s);
    if (!(nrm > 0.0)) throw DomainError("normalize_rows on a zero-norm row");
    (*norms)[i] = nrm;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] / nrm;
  }
  return make_op(a.shape(), std::move(out), {a}, [r, c, norms](Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * y[i * c + j];
      const double inv = 1.0 / (*norms)[i];
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += inv * (self.grad[i * c + j] - dot * y[i * c + j]);
      }
    }
  });
}

Tensor embedding_mean(const Tensor& table,
                      const std::vector<std::vector<std::size_t>>& tokens) {
  if (table.rank() != 2) throw ShapeError("embedding table must be rank 2");
  if (tokens.empty()) throw ShapeError("embedding_mean needs at least one row");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  const auto t = table.values();
  std::vector<double> out(tokens.size() * d, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty()) throw ShapeError("embedding_mean got an empty token list");
    const double inv = 1.0 / static_cast<double>(tokens[i].size());
    for (auto tok : tokens[i]) {
      if (tok >= vocab) throw ShapeError("token index out of vocabulary range");
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += t[tok * d + j] * inv;
    }
  }
  return make_op({tokens.size(), d}, std::move(out), {table},
                 [tokens, d](Node& self) {
                   auto& gt = self.parents[0]->grad_buffer();
                   for (std::size_t i = 0; i < tokens.size(); ++i) {
                     const double inv = 1.0 / static_cast<double>(tokens[i].size());
                     for (auto tok : tokens[i]) {
                       for (std::size_t j = 0; j < d; ++j) {
                         gt[tok * d + j] += self.grad[i * d + j] * inv;
                       }
                     }
                   }
                 });
}

Tensor select_rows(const Tensor& a, std::span<const std::size_t> index) {
  if (a.rank() != 2) throw ShapeError("select_rows needs rank 2");
  if (index.empty()) throw ShapeError("select_rows needs at least one index");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * c);
  const auto x = a.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r) throw ShapeError("select_rows index out of range");
    std::copy_n(x.data() + idx[i] * c, c, out.data() + i * c);
  }
  return make_op({idx.size(), c}, std::move(out), {a}, [idx, c](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) ga[idx[i] * c + j] += self.grad[i * c + j];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows needs at least one tensor");
  const std::size_t c = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(1) != c) throw ShapeError("concat_rows column mismatch");
    rows += p.dim(0);
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return make_op({rows, c}, std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const std::size_t len = parent->value.size();
      if (parent->requires_grad) {
        auto& g = parent->grad_buffer();
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
      }
      offset += len;
    }
  });
}

}  // namespace cimt
