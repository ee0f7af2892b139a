// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xdmg/core_types.hpp"
#include "xdmg/nn.hpp"

namespace xdmg {

/// How the two acquisitions reach the segmentation head.
enum class Fusion {
  feature_concat,  // shared encoder on each image, channel-stacked features
  input_concat,    // 6-channel stacked input through one encoder
  input_diff,      // (post - pre) through one encoder
  mono_post,       // post image only
};

Fusion parse_fusion(std::string_view text);
std::string_view to_string(Fusion f) noexcept;
inline bool needs_pre(Fusion f) noexcept { return f != Fusion::mono_post; }

struct ModelConfig {
  std::vector<int> encoder_channels{16, 32, 64, 128};
  int pyramid_channels = 32;
  Fusion fusion = Fusion::feature_concat;
  int num_classes = kNumClasses;
  std::uint64_t seed = 0;

  /// Throws UsageError on an invalid field.
  void validate() const;
  /// Input height/width must be a multiple of this.
  int required_divisor() const noexcept { return 1 << encoder_channels.size(); }
  int fused_channels() const noexcept {
    return fusion == Fusion::feature_concat ? 2 * pyramid_channels : pyramid_channels;
  }

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Pre-softmax scores, HWC with kNumClasses values per pixel.
struct Logits {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Logits() = default;
  Logits(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w * kNumClasses, fill) {}
  double& at(int r, int c, int k) { return values[(static_cast<std::size_t>(r) * width + c) * kNumClasses + k]; }
  double at(int r, int c, int k) const {
    return values[(static_cast<std::size_t>(r) * width + c) * kNumClasses + k];
  }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height) * width; }
};

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
};

/// One gradient buffer per parameter, same order and sizes.
using Gradients = std::vector<std::vector<float>>;

/// Intermediate activations for one forward pass; opaque to callers.
struct ForwardCache;

namespace detail {
struct EncoderCache;
}

class Model {
 public:
  /// Seeded He-normal initialization; biases start at zero.
  static Model init(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  std::vector<Parameter>& parameters() noexcept { return params_; }

  std::size_t parameter_count() const noexcept;
  /// Parameters of the (shared) encoder and pyramid only.
  std::size_t encoder_parameter_count() const noexcept;
  int encoder_input_channels() const noexcept;

  Gradients zero_gradients() const;

  /// Shared encoder: staged stride-2 convolutions and a top-down pyramid with
  /// lateral connections, returning C channels at 1/4 resolution. Operates on
  /// 3-channel images; input-concat models take a 6-channel tensor instead.
  nn::Tensor encode(const Image& image) const;
  nn::Tensor encode_tensor(const nn::Tensor& x) const;

  /// Logits at input resolution. Rejects a missing pre image when the fusion
  /// mode needs it.
  Logits forward(const ImagePair& pair) const;
  Logits forward(const ImagePair& pair, ForwardCache& cache) const;

  /// Accumulates dL/dparam into `grads` given dL/dlogits.
  void backward(const ForwardCache& cache, const Logits& grad_logits, Gradients& grads) const;

 private:
  Model() = default;

  struct ConvLayer {
    nn::ConvSpec spec;
    std::size_t weight;  // index into params_
    std::size_t bias;
  };
  nn::Tensor encode_impl(const nn::Tensor& x, detail::EncoderCache* cache) const;
  void encode_backward(const detail::EncoderCache& cache, const nn::Tensor& grad_out, Gradients& grads) const;
  nn::Tensor conv(const ConvLayer& l, const nn::Tensor& x, nn::ConvCache* cache) const;
  nn::Tensor conv_back(const ConvLayer& l, const nn::ConvCache& cc, const nn::Tensor& g, Gradients& grads,
                       bool want_input = true) const;
  void check_input(int height, int width) const;

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::vector<ConvLayer> stages_;
  std::vector<ConvLayer> laterals_;  // laterals_[i] serves stages_[i + 1]
  ConvLayer smooth_{};
  ConvLayer head1_{}, head2_{}, classifier_{};
  std::size_t encoder_param_end_ = 0;
};

struct ForwardCache {
  ForwardCache();
  ~ForwardCache();
  ForwardCache(ForwardCache&&) noexcept;
  ForwardCache& operator=(ForwardCache&&) noexcept;

  struct Impl;
  std::unique_ptr<Impl> impl;
};

/// Channel stack for feature-concat, pass-through for the single-branch
/// modes (pre must be null for mono-post).
nn::Tensor fuse(const nn::Tensor* pre, const nn::Tensor& post, Fusion strategy);

/// Per-pixel argmax, ties to the lower class index.
DamageMask predict(const Logits& logits);

/// 1 where class in {1..4}, IGNORE preserved, else 0.
DamageMask derive_localization(const DamageMask& mask);

/// Single-file checkpoint: magic, JSON header (config, parameter table,
/// caller metadata), then little-endian float32 parameter data.
void save_checkpoint(const std::filesystem::path& path, const Model& model, const nlohmann::json& metadata = {});
std::string encode_checkpoint(const Model& model, const nlohmann::json& metadata = {});

struct Checkpoint {
  Model model;
  nlohmann::json metadata;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xdmg
