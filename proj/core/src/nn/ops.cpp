// Copyright 2026 The StarLK Authors
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

#include "starlk/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>
#include <string>

namespace starlk::nn {
namespace {

using NodePtr = std::shared_ptr<detail::Node>;

[[noreturn]] void Reject(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

void RequireRank(const std::string& op, const char* name, const Tensor& t, std::size_t rank) {
  if (!t.defined()) Reject(op, std::string(name) + " is undefined");
  if (t.rank() != rank) {
    Reject(op, std::string(name) + " must have rank " + std::to_string(rank) + ", got shape " +
                   ShapeString(t.shape()));
  }
}

bool Wants(const NodePtr& n) { return n && n->requires_grad; }

// Floor division for possibly negative numerators, positive divisor.
std::int64_t FloorDiv(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Output indices o in [lo, hi) such that 0 <= o*stride + offset < extent.
std::pair<std::int64_t, std::int64_t> ValidRange(std::int64_t offset, std::int64_t stride,
                                                 std::int64_t extent, std::int64_t out_extent) {
  std::int64_t lo = std::max<std::int64_t>(0, FloorDiv(-offset + stride - 1, stride));
  std::int64_t hi = std::min<std::int64_t>(out_extent, FloorDiv(extent - 1 - offset, stride) + 1);
  return {lo, std::max(lo, hi)};
}

struct ConvDims {
  std::int64_t batch, in_ch, height, width;
  std::int64_t out_ch, kh, kw;
  std::int64_t out_h, out_w;
  std::int64_t groups, in_per_group, out_per_group;
  int stride, dilation, pad_top, pad_left;
};

// Visits every (input, weight, output) triple of the correlation in a fixed
// order. `fn(out_row, in_row, weight_index, lo, hi, in_offset)` handles one
// contiguous output row segment.
template <typename Fn>
void ForEachConvRow(const ConvDims& d, Fn&& fn) {
  const std::int64_t in_plane = d.height * d.width;
  const std::int64_t out_plane = d.out_h * d.out_w;
  // A pointwise stride-1 convolution maps whole planes; treat each plane as
  // one long row.
  const bool pointwise = d.kh == 1 && d.kw == 1 && d.stride == 1 && d.pad_top == 0 &&
                         d.pad_left == 0 && d.out_h == d.height && d.out_w == d.width;
  std::vector<std::pair<std::int64_t, std::int64_t>> rows(d.kh), cols(d.kw);
  for (std::int64_t ky = 0; ky < d.kh; ++ky) {
    rows[ky] = ValidRange(ky * d.dilation - d.pad_top, d.stride, d.height, d.out_h);
  }
  for (std::int64_t kx = 0; kx < d.kw; ++kx) {
    cols[kx] = ValidRange(kx * d.dilation - d.pad_left, d.stride, d.width, d.out_w);
  }
  for (std::int64_t b = 0; b < d.batch; ++b) {
    for (std::int64_t oc = 0; oc < d.out_ch; ++oc) {
      const std::int64_t g = oc / d.out_per_group;
      const std::int64_t out_base = (b * d.out_ch + oc) * out_plane;
      for (std::int64_t icl = 0; icl < d.in_per_group; ++icl) {
        const std::int64_t ic = g * d.in_per_group + icl;
        const std::int64_t in_base = (b * d.in_ch + ic) * in_plane;
        const std::int64_t w_base = (oc * d.in_per_group + icl) * d.kh * d.kw;
        if (pointwise) {
          fn(out_base, in_base, w_base, std::int64_t{0}, out_plane, std::int64_t{0});
          continue;
        }
        for (std::int64_t ky = 0; ky < d.kh; ++ky) {
          const std::int64_t y_off = ky * d.dilation - d.pad_top;
          const auto [oh_lo, oh_hi] = rows[ky];
          for (std::int64_t kx = 0; kx < d.kw; ++kx) {
            const std::int64_t x_off = kx * d.dilation - d.pad_left;
            const auto [ow_lo, ow_hi] = cols[kx];
            if (ow_lo >= ow_hi) continue;
            for (std::int64_t oh = oh_lo; oh < oh_hi; ++oh) {
              const std::int64_t ih = oh * d.stride + y_off;
              fn(out_base + oh * d.out_w, in_base + ih * d.width, w_base + ky * d.kw + kx, ow_lo,
                 ow_hi, x_off);
            }
          }
        }
      }
    }
  }
}

}  // namespace

ConvGeometry ResolveConvGeometry(const Shape& input, const Shape& weight,
                                 const Conv2dOptions& options) {
  const std::string op = "conv2d";
  if (input.size() != 4) Reject(op, "input must be [B,C,H,W], got " + ShapeString(input));
  if (weight.size() != 4) Reject(op, "weight must be [Cout,Cin/groups,Kh,Kw], got " + ShapeString(weight));
  if (options.stride < 1) Reject(op, "stride must be >= 1");
  if (options.dilation < 1) Reject(op, "dilation must be >= 1");
  if (options.groups < 1) Reject(op, "groups must be >= 1");
  const std::int64_t groups = options.groups;
  if (input[1] % groups != 0) {
    Reject(op, "input channels " + std::to_string(input[1]) + " not divisible by groups " +
                   std::to_string(groups));
  }
  if (weight[0] % groups != 0) {
    Reject(op, "output channels " + std::to_string(weight[0]) + " not divisible by groups " +
                   std::to_string(groups));
  }
  if (weight[1] != input[1] / groups) {
    Reject(op, "weight dim 1 (input channels per group) is " + std::to_string(weight[1]) +
                   ", expected " + std::to_string(input[1] / groups));
  }
  if (weight[2] < 1 || weight[3] < 1) Reject(op, "empty kernel " + ShapeString(weight));

  const std::int64_t ext_h = options.dilation * (weight[2] - 1);
  const std::int64_t ext_w = options.dilation * (weight[3] - 1);
  ConvGeometry g{};
  std::int64_t pt, pb, pl, pr;
  if (options.same_padding) {
    pt = ext_h / 2;
    pb = ext_h - pt;
    pl = ext_w / 2;
    pr = ext_w - pl;
  } else {
    pt = options.pad_top;
    pb = options.pad_bottom;
    pl = options.pad_left;
    pr = options.pad_right;
    if (pt < 0 || pb < 0 || pl < 0 || pr < 0) Reject(op, "negative padding");
    if (ext_h + 1 > input[2] + pt + pb) {
      Reject(op, "kernel height extent " + std::to_string(ext_h + 1) + " exceeds padded height " +
                     std::to_string(input[2] + pt + pb));
    }
    if (ext_w + 1 > input[3] + pl + pr) {
      Reject(op, "kernel width extent " + std::to_string(ext_w + 1) + " exceeds padded width " +
                     std::to_string(input[3] + pl + pr));
    }
  }
  g.out_height = (input[2] + pt + pb - ext_h - 1) / options.stride + 1;
  g.out_width = (input[3] + pl + pr - ext_w - 1) / options.stride + 1;
  if (input[2] < 1 || input[3] < 1) Reject(op, "empty spatial extent " + ShapeString(input));
  g.pad_top = static_cast<int>(pt);
  g.pad_left = static_cast<int>(pl);
  return g;
}

Tensor Conv2d(const Tensor& input, const Tensor& weight, const Conv2dOptions& options,
              const Tensor& bias) {
  RequireRank("conv2d", "input", input, 4);
  RequireRank("conv2d", "weight", weight, 4);
  const auto geo = ResolveConvGeometry(input.shape(), weight.shape(), options);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    Reject("conv2d", "bias shape " + ShapeString(bias.shape()) + " does not match " +
                         std::to_string(weight.dim(0)) + " output channels");
  }

  ConvDims d{};
  d.batch = input.dim(0);
  d.in_ch = input.dim(1);
  d.height = input.dim(2);
  d.width = input.dim(3);
  d.out_ch = weight.dim(0);
  d.kh = weight.dim(2);
  d.kw = weight.dim(3);
  d.out_h = geo.out_height;
  d.out_w = geo.out_width;
  d.groups = options.groups;
  d.in_per_group = d.in_ch / d.groups;
  d.out_per_group = d.out_ch / d.groups;
  d.stride = options.stride;
  d.dilation = options.dilation;
  d.pad_top = geo.pad_top;
  d.pad_left = geo.pad_left;

  const auto x = input.data();
  const auto w = weight.data();
  std::vector<double> out(static_cast<std::size_t>(d.batch * d.out_ch * d.out_h * d.out_w), 0.0);
  if (bias.defined()) {
    const auto bv = bias.data();
    const std::int64_t plane = d.out_h * d.out_w;
    for (std::int64_t b = 0; b < d.batch; ++b) {
      for (std::int64_t oc = 0; oc < d.out_ch; ++oc) {
        std::fill_n(out.begin() + (b * d.out_ch + oc) * plane, plane, bv[oc]);
      }
    }
  }
  const std::int64_t s = d.stride;
  ForEachConvRow(d, [&](std::int64_t o, std::int64_t i, std::int64_t wi, std::int64_t lo,
                        std::int64_t hi, std::int64_t xoff) {
    const double wv = w[wi];
    double* orow = out.data() + o;
    const double* irow = x.data() + i;
    for (std::int64_t ow = lo; ow < hi; ++ow) orow[ow] += wv * irow[ow * s + xoff];
  });

  NodePtr in_node = input.node(), w_node = weight.node(), b_node = bias.defined() ? bias.node() : nullptr;
  return MakeResult(
      {d.batch, d.out_ch, d.out_h, d.out_w}, std::move(out), {input, weight, bias},
      [d, in_node, w_node, b_node](detail::Node& self) {
        const auto& gout = self.grad;
        const std::int64_t s = d.stride;
        if (Wants(in_node)) {
          auto& gin = in_node->EnsureGrad();
          const auto& wv = w_node->value;
          ForEachConvRow(d, [&](std::int64_t o, std::int64_t i, std::int64_t wi, std::int64_t lo,
                                std::int64_t hi, std::int64_t xoff) {
            const double wgt = wv[wi];
            const double* grow = gout.data() + o;
            double* irow = gin.data() + i;
            for (std::int64_t ow = lo; ow < hi; ++ow) irow[ow * s + xoff] += wgt * grow[ow];
          });
        }
        if (Wants(w_node)) {
          auto& gw = w_node->EnsureGrad();
          const auto& xv = in_node->value;
          ForEachConvRow(d, [&](std::int64_t o, std::int64_t i, std::int64_t wi, std::int64_t lo,
                                std::int64_t hi, std::int64_t xoff) {
            const double* grow = gout.data() + o;
            const double* irow = xv.data() + i;
            double acc = 0.0;
            for (std::int64_t ow = lo; ow < hi; ++ow) acc += grow[ow] * irow[ow * s + xoff];
            gw[wi] += acc;
          });
        }
        if (Wants(b_node)) {
          auto& gb = b_node->EnsureGrad();
          const std::int64_t plane = d.out_h * d.out_w;
          for (std::int64_t b = 0; b < d.batch; ++b) {
            for (std::int64_t oc = 0; oc < d.out_ch; ++oc) {
              const double* g = gout.data() + (b * d.out_ch + oc) * plane;
              double acc = 0.0;
              for (std::int64_t p = 0; p < plane; ++p) acc += g[p];
              gb[oc] += acc;
            }
          }
        }
      });
}

BatchNormStats BatchNormStats::ForChannels(std::int64_t channels) {
  BatchNormStats stats;
  stats.running_mean = Tensor::Zeros({channels});
  stats.running_var = Tensor::Full({channels}, 1.0);
  return stats;
}

Tensor BatchNorm2d(const Tensor& input, const Tensor& scale, const Tensor& shift,
                   BatchNormStats& stats, Mode mode) {
  const std::string op = "batchnorm2d";
  RequireRank(op, "input", input, 4);
  RequireRank(op, "scale", scale, 1);
  RequireRank(op, "shift", shift, 1);
  const std::int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (scale.dim(0) != C || shift.dim(0) != C) {
    Reject(op, "scale/shift have " + std::to_string(scale.dim(0)) + "/" +
                   std::to_string(shift.dim(0)) + " channels, input has " + std::to_string(C));
  }
  if (stats.running_mean.numel() != C || stats.running_var.numel() != C) {
    Reject(op, "running statistics do not match " + std::to_string(C) + " channels");
  }
  const std::int64_t plane = H * W;
  const std::int64_t count = B * plane;
  if (mode == Mode::kTrain && count < 2) {
    Reject(op, "train mode needs more than one value per channel (batch " + std::to_string(B) +
                   ", spatial " + std::to_string(H) + "x" + std::to_string(W) + ")");
  }

  const auto x = input.data();
  const auto gamma = scale.data();
  const auto beta = shift.data();
  std::vector<double> mean(C), inv_std(C);
  if (mode == Mode::kTrain) {
    std::vector<double> var(C);
    for (std::int64_t c = 0; c < C; ++c) {
      double sum = 0.0;
      for (std::int64_t b = 0; b < B; ++b) {
        const double* p = x.data() + (b * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) sum += p[i];
      }
      const double mu = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::int64_t b = 0; b < B; ++b) {
        const double* p = x.data() + (b * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      mean[c] = mu;
      var[c] = sq / static_cast<double>(count);
      inv_std[c] = 1.0 / std::sqrt(var[c] + stats.eps);
    }
    auto rm = stats.running_mean.mutable_data();
    auto rv = stats.running_var.mutable_data();
    const double m = stats.momentum;
    const double unbias = static_cast<double>(count) / static_cast<double>(count - 1);
    for (std::int64_t c = 0; c < C; ++c) {
      rm[c] = (1.0 - m) * rm[c] + m * mean[c];
      rv[c] = (1.0 - m) * rv[c] + m * var[c] * unbias;
    }
    RoundToPrecision(rm);
    RoundToPrecision(rv);
  } else {
    const auto rm = stats.running_mean.data();
    const auto rv = stats.running_var.data();
    for (std::int64_t c = 0; c < C; ++c) {
      mean[c] = rm[c];
      inv_std[c] = 1.0 / std::sqrt(rv[c] + stats.eps);
    }
  }

  std::vector<double> normalized(x.size());
  std::vector<double> out(x.size());
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const std::int64_t base = (b * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const double xh = (x[base + i] - mean[c]) * inv_std[c];
        normalized[base + i] = xh;
        out[base + i] = gamma[c] * xh + beta[c];
      }
    }
  }

  NodePtr in_node = input.node(), g_node = scale.node(), b_node = shift.node();
  const bool train = mode == Mode::kTrain;
  return MakeResult(
      input.shape(), std::move(out), {input, scale, shift},
      [=, normalized = std::move(normalized), inv_std = std::move(inv_std)](detail::Node& self) {
        const auto& gout = self.grad;
        std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
        for (std::int64_t b = 0; b < B; ++b) {
          for (std::int64_t c = 0; c < C; ++c) {
            const std::int64_t base = (b * C + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
              sum_g[c] += gout[base + i];
              sum_gx[c] += gout[base + i] * normalized[base + i];
            }
          }
        }
        if (Wants(g_node)) {
          auto& gg = g_node->EnsureGrad();
          for (std::int64_t c = 0; c < C; ++c) gg[c] += sum_gx[c];
        }
        if (Wants(b_node)) {
          auto& gb = b_node->EnsureGrad();
          for (std::int64_t c = 0; c < C; ++c) gb[c] += sum_g[c];
        }
        if (Wants(in_node)) {
          auto& gin = in_node->EnsureGrad();
          const auto& gamma = g_node->value;
          const double n = static_cast<double>(count);
          for (std::int64_t b = 0; b < B; ++b) {
            for (std::int64_t c = 0; c < C; ++c) {
              const std::int64_t base = (b * C + c) * plane;
              const double k = gamma[c] * inv_std[c];
              if (train) {
                const double mg = sum_g[c] / n, mgx = sum_gx[c] / n;
                for (std::int64_t i = 0; i < plane; ++i) {
                  gin[base + i] += k * (gout[base + i] - mg - normalized[base + i] * mgx);
                }
              } else {
                for (std::int64_t i = 0; i < plane; ++i) gin[base + i] += k * gout[base + i];
              }
            }
          }
        }
      });
}

namespace {

template <typename Forward, typename Derivative>
Tensor Elementwise(const Tensor& input, Forward f, Derivative df) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  NodePtr in_node = input.node();
  return MakeResult(input.shape(), std::move(out), {input}, [in_node, df](detail::Node& self) {
    auto& gin = in_node->EnsureGrad();
    const auto& xv = in_node->value;
    for (std::size_t i = 0; i < xv.size(); ++i) gin[i] += self.grad[i] * df(xv[i]);
  });
}

double Logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void RequireSameShape(const std::string& op, const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) Reject(op, "undefined operand");
  if (a.shape() != b.shape()) {
    Reject(op, "shape mismatch " + ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  }
}

}  // namespace

Tensor Relu(const Tensor& input) {
  return Elementwise(
      input, [](double z) { return z > 0.0 ? z : 0.0; },
      [](double z) { return z > 0.0 ? 1.0 : 0.0; });
}

Tensor Silu(const Tensor& input) {
  return Elementwise(
      input, [](double z) { return z * Logistic(z); },
      [](double z) {
        const double s = Logistic(z);
        return s * (1.0 + z * (1.0 - s));
      });
}

Tensor Sigmoid(const Tensor& input) {
  return Elementwise(
      input, [](double z) { return Logistic(z); },
      [](double z) {
        const double s = Logistic(z);
        return s * (1.0 - s);
      });
}

Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape("add", a, b);
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  NodePtr an = a.node(), bn = b.node();
  return MakeResult(a.shape(), std::move(out), {a, b}, [an, bn](detail::Node& self) {
    for (const auto& n : {an, bn}) {
      if (!Wants(n)) continue;
      auto& g = n->EnsureGrad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape("mul", a, b);
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  NodePtr an = a.node(), bn = b.node();
  return MakeResult(a.shape(), std::move(out), {a, b}, [an, bn](detail::Node& self) {
    if (Wants(an)) {
      auto& g = an->EnsureGrad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (Wants(bn)) {
      auto& g = bn->EnsureGrad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor Scale(const Tensor& a, double factor) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  NodePtr an = a.node();
  return MakeResult(a.shape(), std::move(out), {a}, [an, factor](detail::Node& self) {
    auto& g = an->EnsureGrad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor Sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  NodePtr an = a.node();
  return MakeResult({}, {total}, {a}, [an](detail::Node& self) {
    auto& g = an->EnsureGrad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor Pick(const Tensor& a, std::int64_t flat_index) {
  if (flat_index < 0 || flat_index >= a.numel()) {
    Reject("pick", "index " + std::to_string(flat_index) + " out of range for shape " +
                       ShapeString(a.shape()));
  }
  NodePtr an = a.node();
  return MakeResult({}, {a.data()[flat_index]}, {a}, [an, flat_index](detail::Node& self) {
    an->EnsureGrad()[flat_index] += self.grad[0];
  });
}

Tensor Linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  const std::string op = "linear";
  RequireRank(op, "input", input, 2);
  RequireRank(op, "weight", weight, 2);
  const std::int64_t B = input.dim(0), F = input.dim(1), C = weight.dim(0);
  if (weight.dim(1) != F) {
    Reject(op, "feature dimension mismatch: input has " + std::to_string(F) +
                   " features, weight expects " + std::to_string(weight.dim(1)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != C)) {
    Reject(op, "bias shape " + ShapeString(bias.shape()) + " does not match " +
                   std::to_string(C) + " outputs");
  }
  const auto x = input.data(), w = weight.data();
  std::vector<double> out(B * C);
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      double acc = bias.defined() ? bias.data()[c] : 0.0;
      for (std::int64_t f = 0; f < F; ++f) acc += w[c * F + f] * x[b * F + f];
      out[b * C + c] = acc;
    }
  }
  NodePtr xn = input.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr;
  return MakeResult({B, C}, std::move(out), {input, weight, bias},
                    [=](detail::Node& self) {
                      const auto& g = self.grad;
                      if (Wants(xn)) {
                        auto& gx = xn->EnsureGrad();
                        for (std::int64_t b = 0; b < B; ++b)
                          for (std::int64_t c = 0; c < C; ++c)
                            for (std::int64_t f = 0; f < F; ++f)
                              gx[b * F + f] += g[b * C + c] * wn->value[c * F + f];
                      }
                      if (Wants(wn)) {
                        auto& gw = wn->EnsureGrad();
                        for (std::int64_t b = 0; b < B; ++b)
                          for (std::int64_t c = 0; c < C; ++c)
                            for (std::int64_t f = 0; f < F; ++f)
                              gw[c * F + f] += g[b * C + c] * xn->value[b * F + f];
                      }
                      if (Wants(bn)) {
                        auto& gb = bn->EnsureGrad();
                        for (std::int64_t b = 0; b < B; ++b)
                          for (std::int64_t c = 0; c < C; ++c) gb[c] += g[b * C + c];
                      }
                    });
}

Tensor GlobalAvgPool(const Tensor& input) {
  RequireRank("global_avg_pool", "input", input, 4);
  const std::int64_t B = input.dim(0), C = input.dim(1), plane = input.dim(2) * input.dim(3);
  if (plane == 0) Reject("global_avg_pool", "empty spatial extent");
  const auto x = input.data();
  std::vector<double> out(B * C);
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) acc += x[bc * plane + i];
    out[bc] = acc / static_cast<double>(plane);
  }
  NodePtr xn = input.node();
  return MakeResult({B, C}, std::move(out), {input}, [=](detail::Node& self) {
    auto& gx = xn->EnsureGrad();
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
      const double g = self.grad[bc] * inv;
      for (std::int64_t i = 0; i < plane; ++i) gx[bc * plane + i] += g;
    }
  });
}

Tensor SoftCrossEntropy(const Tensor& logits, const Tensor& soft_labels) {
  const std::string op = "soft_cross_entropy";
  RequireRank(op, "logits", logits, 2);
  RequireSameShape(op, logits, soft_labels);
  const std::int64_t B = logits.dim(0), C = logits.dim(1);
  if (B == 0 || C == 0) Reject(op, "empty logits " + ShapeString(logits.shape()));
  const auto z = logits.data(), y = soft_labels.data();
  std::vector<double> probs(B * C);
  double loss = 0.0;
  for (std::int64_t b = 0; b < B; ++b) {
    double row_sum = 0.0;
    for (std::int64_t c = 0; c < C; ++c) row_sum += y[b * C + c];
    if (!(std::abs(row_sum - 1.0) <= 1e-6)) {
      Reject(op, "label row " + std::to_string(b) + " sums to " + std::to_string(row_sum) +
                     ", expected 1");
    }
    double zmax = z[b * C];
    for (std::int64_t c = 1; c < C; ++c) zmax = std::max(zmax, z[b * C + c]);
    double denom = 0.0;
    for (std::int64_t c = 0; c < C; ++c) denom += std::exp(z[b * C + c] - zmax);
    const double log_denom = std::log(denom) + zmax;
    for (std::int64_t c = 0; c < C; ++c) {
      const double log_p = z[b * C + c] - log_denom;
      probs[b * C + c] = std::exp(log_p);
      if (y[b * C + c] != 0.0) loss -= y[b * C + c] * log_p;
    }
  }
  loss /= static_cast<double>(B);
  NodePtr zn = logits.node();
  std::vector<double> labels(y.begin(), y.end());
  return MakeResult({}, {loss}, {logits},
                    [=, probs = std::move(probs), labels = std::move(labels)](detail::Node& self) {
                      auto& gz = zn->EnsureGrad();
                      const double k = self.grad[0] / static_cast<double>(B);
                      for (std::int64_t i = 0; i < B * C; ++i) gz[i] += k * (probs[i] - labels[i]);
                    });
}

}  // namespace starlk::nn
