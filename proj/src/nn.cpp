// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "xdmg/error.hpp"

namespace xdmg::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void im2col(const ConvSpec& s, const Tensor& x, int oh, int ow, std::vector<float>& col) {
  const int k = s.kernel;
  col.assign(static_cast<std::size_t>(s.in_channels) * k * k * oh * ow, 0.0f);
  std::size_t row = 0;
  for (int c = 0; c < s.in_channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        float* dst = col.data() + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= x.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride - s.padding + kx;
            if (ix >= 0 && ix < x.width) dst[oy * ow + ox] = x.at(c, iy, ix);
          }
        }
      }
}

void col2im(const ConvSpec& s, const std::vector<float>& col, int oh, int ow, Tensor& dx) {
  const int k = s.kernel;
  std::size_t row = 0;
  for (int c = 0; c < s.in_channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        const float* src = col.data() + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= dx.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride - s.padding + kx;
            if (ix >= 0 && ix < dx.width) dx.at(c, iy, ix) += src[oy * ow + ox];
          }
        }
      }
}

// Per-axis taps for bilinear resize: output index -> (i0, i1, w1).
struct Taps {
  std::vector<int> i0, i1;
  std::vector<float> w1;
};

Taps bilinear_taps(int in, int factor) {
  const int out = in * factor;
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w1.resize(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) / factor - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    t.i0[o] = i0;
    t.i1[o] = i1;
    t.w1[o] = static_cast<float>(src - i0);
  }
  return t;
}

}  // namespace

Tensor conv2d(const ConvSpec& s, const Tensor& x, std::span<const float> weight, std::span<const float> bias,
              ConvCache* cache) {
  if (x.channels != s.in_channels)
    throw UsageError("conv2d: expected " + std::to_string(s.in_channels) + " input channels, got " +
                     std::to_string(x.channels));
  const int oh = s.out_size(x.height), ow = s.out_size(x.width);
  ConvCache local;
  ConvCache& cc = cache ? *cache : local;
  cc.in_height = x.height;
  cc.in_width = x.width;
  im2col(s, x, oh, ow, cc.columns);
  const int kk = s.in_channels * s.kernel * s.kernel;
  Tensor y(s.out_channels, oh, ow);
  ConstMapMat w(weight.data(), s.out_channels, kk);
  ConstMapMat col(cc.columns.data(), kk, oh * ow);
  MapMat out(y.data.data(), s.out_channels, oh * ow);
  out.noalias() = w * col;
  for (int o = 0; o < s.out_channels; ++o) out.row(o).array() += bias[o];
  return y;
}

Tensor conv2d_backward(const ConvSpec& s, const ConvCache& cc, const Tensor& grad_out, std::span<const float> weight,
                       std::span<float> grad_weight, std::span<float> grad_bias, bool want_input_grad) {
  const int oh = grad_out.height, ow = grad_out.width;
  const int kk = s.in_channels * s.kernel * s.kernel;
  ConstMapMat dy(grad_out.data.data(), s.out_channels, oh * ow);
  ConstMapMat col(cc.columns.data(), kk, oh * ow);
  MapMat dw(grad_weight.data(), s.out_channels, kk);
  dw.noalias() += dy * col.transpose();
  for (int o = 0; o < s.out_channels; ++o) grad_bias[o] += dy.row(o).sum();
  if (!want_input_grad) return {};
  std::vector<float> dcol(static_cast<std::size_t>(kk) * oh * ow);
  MapMat dc(dcol.data(), kk, oh * ow);
  ConstMapMat w(weight.data(), s.out_channels, kk);
  dc.noalias() = w.transpose() * dy;
  Tensor dx(s.in_channels, cc.in_height, cc.in_width);
  col2im(s, dcol, oh, ow, dx);
  return dx;
}

void relu_inplace(Tensor& x) {
  for (float& v : x.data) v = v > 0.0f ? v : 0.0f;
}

void relu_backward_inplace(const Tensor& output, Tensor& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (!(output.data[i] > 0.0f)) grad.data[i] = 0.0f;
}

Tensor upsample_nearest2x(const Tensor& x) {
  Tensor y(x.channels, x.height * 2, x.width * 2);
  for (int c = 0; c < x.channels; ++c)
    for (int r = 0; r < y.height; ++r)
      for (int col = 0; col < y.width; ++col) y.at(c, r, col) = x.at(c, r / 2, col / 2);
  return y;
}

Tensor upsample_nearest2x_backward(const Tensor& g) {
  Tensor dx(g.channels, g.height / 2, g.width / 2);
  for (int c = 0; c < g.channels; ++c)
    for (int r = 0; r < g.height; ++r)
      for (int col = 0; col < g.width; ++col) dx.at(c, r / 2, col / 2) += g.at(c, r, col);
  return dx;
}

Tensor upsample_bilinear(const Tensor& x, int factor) {
  const Taps ty = bilinear_taps(x.height, factor), tx = bilinear_taps(x.width, factor);
  Tensor y(x.channels, x.height * factor, x.width * factor);
  for (int c = 0; c < x.channels; ++c)
    for (int r = 0; r < y.height; ++r) {
      const float wy = ty.w1[r];
      for (int col = 0; col < y.width; ++col) {
        const float wx = tx.w1[col];
        const float top = (1 - wx) * x.at(c, ty.i0[r], tx.i0[col]) + wx * x.at(c, ty.i0[r], tx.i1[col]);
        const float bot = (1 - wx) * x.at(c, ty.i1[r], tx.i0[col]) + wx * x.at(c, ty.i1[r], tx.i1[col]);
        y.at(c, r, col) = (1 - wy) * top + wy * bot;
      }
    }
  return y;
}

Tensor upsample_bilinear_backward(const Tensor& g, int factor) {
  const int ih = g.height / factor, iw = g.width / factor;
  const Taps ty = bilinear_taps(ih, factor), tx = bilinear_taps(iw, factor);
  Tensor dx(g.channels, ih, iw);
  for (int c = 0; c < g.channels; ++c)
    for (int r = 0; r < g.height; ++r) {
      const float wy = ty.w1[r];
      for (int col = 0; col < g.width; ++col) {
        const float wx = tx.w1[col];
        const float v = g.at(c, r, col);
        dx.at(c, ty.i0[r], tx.i0[col]) += (1 - wy) * (1 - wx) * v;
        dx.at(c, ty.i0[r], tx.i1[col]) += (1 - wy) * wx * v;
        dx.at(c, ty.i1[r], tx.i0[col]) += wy * (1 - wx) * v;
        dx.at(c, ty.i1[r], tx.i1[col]) += wy * wx * v;
      }
    }
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.height != b.height || a.width != b.width)
    throw UsageError("concat_channels: spatial shapes differ");
  Tensor y(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return y;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace xdmg::nn
