// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xdmg::nn {

/// Dense CHW float tensor for a single sample.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  float& at(int c, int r, int col) { return data[c * plane() + static_cast<std::size_t>(r) * width + col]; }
  float at(int c, int r, int col) const { return data[c * plane() + static_cast<std::size_t>(r) * width + col]; }
  bool same_shape(const Tensor& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const Tensor&) const = default;
};

struct ConvSpec {
  int in_channels;
  int out_channels;
  int kernel;
  int stride;
  int padding;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
  int out_size(int in) const noexcept { return (in + 2 * padding - kernel) / stride + 1; }
};

/// Saved state for the backward pass of one convolution.
struct ConvCache {
  int in_height = 0;
  int in_width = 0;
  std::vector<float> columns;  // (in*k*k) x (out_h*out_w), row-major
};

/// weight: [out][in][k][k]; bias: [out].
Tensor conv2d(const ConvSpec& spec, const Tensor& x, std::span<const float> weight, std::span<const float> bias,
              ConvCache* cache = nullptr);

/// Accumulates into grad_weight / grad_bias; returns dL/dx unless `want_input_grad` is false.
Tensor conv2d_backward(const ConvSpec& spec, const ConvCache& cache, const Tensor& grad_out,
                       std::span<const float> weight, std::span<float> grad_weight, std::span<float> grad_bias,
                       bool want_input_grad = true);

void relu_inplace(Tensor& x);
/// Zeroes grad where the forward output was not positive.
void relu_backward_inplace(const Tensor& output, Tensor& grad);

Tensor upsample_nearest2x(const Tensor& x);
Tensor upsample_nearest2x_backward(const Tensor& grad_out);

/// Bilinear resize by an integer factor (half-pixel centers, edge clamped).
Tensor upsample_bilinear(const Tensor& x, int factor);
Tensor upsample_bilinear_backward(const Tensor& grad_out, int factor);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& dst, const Tensor& src);

}  // namespace xdmg::nn
