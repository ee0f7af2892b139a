// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "xdmg/error.hpp"
#include "xdmg/io.hpp"
#include "xdmg/rng.hpp"

namespace xdmg {

using nlohmann::json;
using nn::Tensor;

Fusion parse_fusion(std::string_view text) {
  if (text == "feature-concat") return Fusion::feature_concat;
  if (text == "input-concat") return Fusion::input_concat;
  if (text == "input-diff") return Fusion::input_diff;
  if (text == "mono-post") return Fusion::mono_post;
  throw UsageError("unknown fusion mode '" + std::string(text) +
                   "' (expected feature-concat, input-concat, input-diff or mono-post)");
}

std::string_view to_string(Fusion f) noexcept {
  switch (f) {
    case Fusion::feature_concat: return "feature-concat";
    case Fusion::input_concat: return "input-concat";
    case Fusion::input_diff: return "input-diff";
    case Fusion::mono_post: return "mono-post";
  }
  return "feature-concat";
}

void ModelConfig::validate() const {
  // Two stages is the minimum that yields the 1/4-resolution pyramid level.
  if (encoder_channels.size() < 2)
    throw UsageError("encoder_channels needs at least 2 stages, got " + std::to_string(encoder_channels.size()));
  if (encoder_channels.size() > 8) throw UsageError("encoder_channels supports at most 8 stages");
  for (int c : encoder_channels)
    if (c <= 0) throw UsageError("encoder_channels entries must be positive");
  if (pyramid_channels <= 0) throw UsageError("pyramid_channels must be positive");
  if (num_classes != kNumClasses) throw UsageError("num_classes must be 5");
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"encoder_channels", c.encoder_channels},
           {"pyramid_channels", c.pyramid_channels},
           {"fusion", std::string(to_string(c.fusion))},
           {"num_classes", c.num_classes},
           {"seed", c.seed}};
}

void from_json(const json& j, ModelConfig& c) {
  if (!j.is_object()) throw UsageError("model config must be a JSON object");
  try {
    if (j.contains("encoder_channels")) c.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
    if (j.contains("pyramid_channels")) c.pyramid_channels = j.at("pyramid_channels").get<int>();
    if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("model config: ") + e.what());
  }
}

namespace detail {

struct EncoderCache {
  std::vector<nn::ConvCache> stage_cc;
  std::vector<Tensor> stage_out;
  std::vector<nn::ConvCache> lateral_cc;
  nn::ConvCache smooth_cc;
};

}  // namespace detail

struct ForwardCache::Impl {
  Fusion fusion = Fusion::feature_concat;
  std::vector<detail::EncoderCache> encoders;  // [pre, post] or [single]
  int branch_channels = 0;
  nn::ConvCache head1_cc, head2_cc, classifier_cc;
  Tensor h1, h2;
};

ForwardCache::ForwardCache() : impl(std::make_unique<Impl>()) {}
ForwardCache::~ForwardCache() = default;
ForwardCache::ForwardCache(ForwardCache&&) noexcept = default;
ForwardCache& ForwardCache::operator=(ForwardCache&&) noexcept = default;

Model Model::init(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config_ = config;
  Rng rng(config.seed);
  auto add_conv = [&](const std::string& name, nn::ConvSpec spec, double gain, bool tied_halves = false) {
    Parameter w{name + ".weight", {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}, {}};
    w.value.resize(spec.weight_count());
    const double fan_in = static_cast<double>(spec.in_channels) * spec.kernel * spec.kernel;
    const double sd = std::sqrt(gain / fan_in);
    if (tied_halves) {
      // Both halves of a stacked pre/post input start from the same filters.
      const int half = spec.in_channels / 2;
      const int kk = spec.kernel * spec.kernel;
      for (int o = 0; o < spec.out_channels; ++o)
        for (int i = 0; i < half * kk; ++i) {
          const float v = static_cast<float>(sd * rng.normal());
          w.value[static_cast<std::size_t>(o) * spec.in_channels * kk + i] = v;
          w.value[static_cast<std::size_t>(o) * spec.in_channels * kk + half * kk + i] = v;
        }
    } else {
      for (float& v : w.value) v = static_cast<float>(sd * rng.normal());
    }
    Parameter b{name + ".bias", {spec.out_channels}, std::vector<float>(spec.out_channels, 0.0f)};
    ConvLayer layer{spec, m.params_.size(), m.params_.size() + 1};
    m.params_.push_back(std::move(w));
    m.params_.push_back(std::move(b));
    return layer;
  };
  const int in_ch = config.fusion == Fusion::input_concat ? 6 : 3;
  int prev = in_ch;
  for (std::size_t i = 0; i < config.encoder_channels.size(); ++i) {
    const int out = config.encoder_channels[i];
    m.stages_.push_back(add_conv("encoder.stage" + std::to_string(i), {prev, out, 3, 2, 1}, 2.0,
                                 i == 0 && config.fusion == Fusion::input_concat));
    prev = out;
  }
  const int c = config.pyramid_channels;
  for (std::size_t i = 1; i < config.encoder_channels.size(); ++i)
    m.laterals_.push_back(add_conv("encoder.lateral" + std::to_string(i), {config.encoder_channels[i], c, 1, 1, 0}, 1.0));
  m.smooth_ = add_conv("encoder.smooth", {c, c, 3, 1, 1}, 1.0);
  m.encoder_param_end_ = m.params_.size();
  m.head1_ = add_conv("head.conv1", {config.fused_channels(), c, 3, 1, 1}, 2.0);
  m.head2_ = add_conv("head.conv2", {c, c, 3, 1, 1}, 2.0);
  m.classifier_ = add_conv("head.classifier", {c, kNumClasses, 1, 1, 0}, 1.0);
  return m;
}

std::size_t Model::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t Model::encoder_parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < encoder_param_end_; ++i) n += params_[i].value.size();
  return n;
}

int Model::encoder_input_channels() const noexcept { return stages_.front().spec.in_channels; }

Gradients Model::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.size(), 0.0f);
  return g;
}

Tensor Model::conv(const ConvLayer& l, const Tensor& x, nn::ConvCache* cache) const {
  return nn::conv2d(l.spec, x, params_[l.weight].value, params_[l.bias].value, cache);
}

Tensor Model::conv_back(const ConvLayer& l, const nn::ConvCache& cc, const Tensor& g, Gradients& grads,
                        bool want_input) const {
  return nn::conv2d_backward(l.spec, cc, g, params_[l.weight].value, grads[l.weight], grads[l.bias], want_input);
}

void Model::check_input(int height, int width) const {
  const int d = config_.required_divisor();
  if (height % d != 0 || width % d != 0)
    throw UsageError("input " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by " + std::to_string(d) + " as required by " +
                     std::to_string(config_.encoder_channels.size()) + " encoder stages");
}

namespace {

Tensor to_tensor(const Image& img) {
  Tensor t(3, img.height(), img.width());
  const auto& px = img.pixels();
  const std::size_t plane = t.plane();
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) t.data[c * plane + i] = px[i * 3 + c];
  return t;
}

}  // namespace

Tensor Model::encode_impl(const Tensor& x, detail::EncoderCache* cache) const {
  check_input(x.height, x.width);
  const std::size_t n = stages_.size();
  if (cache) {
    cache->stage_cc.resize(n);
    cache->stage_out.resize(n);
    cache->lateral_cc.resize(n - 1);
  }
  std::vector<Tensor> outs(n);
  const Tensor* cur = &x;
  for (std::size_t i = 0; i < n; ++i) {
    outs[i] = conv(stages_[i], *cur, cache ? &cache->stage_cc[i] : nullptr);
    nn::relu_inplace(outs[i]);
    cur = &outs[i];
  }
  Tensor p = conv(laterals_[n - 2], outs[n - 1], cache ? &cache->lateral_cc[n - 2] : nullptr);
  for (std::size_t i = n - 1; i-- > 1;) {
    Tensor lat = conv(laterals_[i - 1], outs[i], cache ? &cache->lateral_cc[i - 1] : nullptr);
    nn::add_inplace(lat, nn::upsample_nearest2x(p));
    p = std::move(lat);
  }
  Tensor out = conv(smooth_, p, cache ? &cache->smooth_cc : nullptr);
  if (cache) cache->stage_out = std::move(outs);
  return out;
}

void Model::encode_backward(const detail::EncoderCache& cache, const Tensor& grad_out, Gradients& grads) const {
  const std::size_t n = stages_.size();
  Tensor dp = conv_back(smooth_, cache.smooth_cc, grad_out, grads);
  // dstage[i]: gradient reaching stage i's output through its lateral.
  std::vector<Tensor> dstage(n);
  for (std::size_t i = 1; i < n; ++i) {
    dstage[i] = conv_back(laterals_[i - 1], cache.lateral_cc[i - 1], dp, grads);
    if (i + 1 < n) dp = nn::upsample_nearest2x_backward(dp);
  }
  Tensor g = std::move(dstage[n - 1]);
  for (std::size_t i = n; i-- > 0;) {
    nn::relu_backward_inplace(cache.stage_out[i], g);
    Tensor dx = conv_back(stages_[i], cache.stage_cc[i], g, grads, i > 0);
    if (i == 0) break;
    if (!dstage[i - 1].data.empty()) nn::add_inplace(dx, dstage[i - 1]);
    g = std::move(dx);
  }
}

Tensor Model::encode(const Image& image) const {
  if (encoder_input_channels() != 3)
    throw UsageError("encode(Image) needs a 3-channel encoder; input-concat models take a stacked tensor");
  return encode_impl(to_tensor(image), nullptr);
}

Tensor Model::encode_tensor(const Tensor& x) const { return encode_impl(x, nullptr); }

Tensor fuse(const Tensor* pre, const Tensor& post, Fusion strategy) {
  if (strategy == Fusion::feature_concat) {
    if (!pre) throw UsageError("feature-concat fusion needs pre-image features");
    if (!pre->same_shape(post))
      throw UsageError("feature-concat fusion: pre features " + std::to_string(pre->channels) + "x" +
                       std::to_string(pre->height) + "x" + std::to_string(pre->width) + " vs post " +
                       std::to_string(post.channels) + "x" + std::to_string(post.height) + "x" +
                       std::to_string(post.width));
    return nn::concat_channels(*pre, post);
  }
  if (strategy == Fusion::mono_post && pre) throw UsageError("mono-post fusion takes post features only");
  return post;
}

Logits Model::forward(const ImagePair& pair) const {
  ForwardCache cache;
  return forward(pair, cache);
}

Logits Model::forward(const ImagePair& pair, ForwardCache& fc) const {
  const Fusion mode = config_.fusion;
  if (needs_pre(mode) && !pair.pre)
    throw UsageError("fusion mode " + std::string(to_string(mode)) + " needs a pre-disaster image");
  if (pair.pre && (pair.pre->height() != pair.post.height() || pair.pre->width() != pair.post.width()))
    throw DataError("scene '" + pair.scene_id + "': pre and post images differ in size");
  check_input(pair.post.height(), pair.post.width());
  ForwardCache::Impl& c = *fc.impl;
  c.fusion = mode;
  c.encoders.clear();
  Tensor fused;
  switch (mode) {
    case Fusion::feature_concat: {
      c.encoders.resize(2);
      Tensor fpre = encode_impl(to_tensor(*pair.pre), &c.encoders[0]);
      Tensor fpost = encode_impl(to_tensor(pair.post), &c.encoders[1]);
      c.branch_channels = fpre.channels;
      fused = fuse(&fpre, fpost, mode);
      break;
    }
    case Fusion::mono_post:
      c.encoders.resize(1);
      fused = encode_impl(to_tensor(pair.post), &c.encoders[0]);
      break;
    case Fusion::input_concat:
      c.encoders.resize(1);
      fused = encode_impl(nn::concat_channels(to_tensor(*pair.pre), to_tensor(pair.post)), &c.encoders[0]);
      break;
    case Fusion::input_diff: {
      c.encoders.resize(1);
      Tensor diff = to_tensor(pair.post);
      const Tensor pre = to_tensor(*pair.pre);
      for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= pre.data[i];
      fused = encode_impl(diff, &c.encoders[0]);
      break;
    }
  }
  c.h1 = conv(head1_, fused, &c.head1_cc);
  nn::relu_inplace(c.h1);
  c.h2 = conv(head2_, c.h1, &c.head2_cc);
  nn::relu_inplace(c.h2);
  const Tensor up = nn::upsample_bilinear(c.h2, 4);
  const Tensor z = conv(classifier_, up, &c.classifier_cc);
  Logits out(z.height, z.width);
  const std::size_t plane = z.plane();
  for (std::size_t i = 0; i < plane; ++i)
    for (int k = 0; k < kNumClasses; ++k) out.values[i * kNumClasses + k] = z.data[k * plane + i];
  return out;
}

void Model::backward(const ForwardCache& fc, const Logits& grad_logits, Gradients& grads) const {
  const ForwardCache::Impl& c = *fc.impl;
  if (c.encoders.empty()) throw UsageError("backward called without a cached forward pass");
  Tensor dz(kNumClasses, grad_logits.height, grad_logits.width);
  const std::size_t plane = dz.plane();
  for (std::size_t i = 0; i < plane; ++i)
    for (int k = 0; k < kNumClasses; ++k)
      dz.data[k * plane + i] = static_cast<float>(grad_logits.values[i * kNumClasses + k]);
  Tensor dup = conv_back(classifier_, c.classifier_cc, dz, grads);
  Tensor dh2 = nn::upsample_bilinear_backward(dup, 4);
  nn::relu_backward_inplace(c.h2, dh2);
  Tensor dh1 = conv_back(head2_, c.head2_cc, dh2, grads);
  nn::relu_backward_inplace(c.h1, dh1);
  Tensor dfused = conv_back(head1_, c.head1_cc, dh1, grads);
  if (c.fusion == Fusion::feature_concat) {
    const int half = c.branch_channels;
    Tensor dpre(half, dfused.height, dfused.width), dpost(half, dfused.height, dfused.width);
    const auto split = static_cast<std::ptrdiff_t>(dpre.data.size());
    std::copy(dfused.data.begin(), dfused.data.begin() + split, dpre.data.begin());
    std::copy(dfused.data.begin() + split, dfused.data.end(), dpost.data.begin());
    encode_backward(c.encoders[0], dpre, grads);
    encode_backward(c.encoders[1], dpost, grads);
  } else {
    encode_backward(c.encoders[0], dfused, grads);
  }
}

DamageMask predict(const Logits& logits) {
  std::vector<Label> labels(logits.pixels());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* row = logits.values.data() + i * kNumClasses;
    int best = 0;
    for (int k = 1; k < kNumClasses; ++k)
      if (row[k] > row[best]) best = k;
    labels[i] = static_cast<Label>(best);
  }
  return DamageMask(logits.height, logits.width, std::move(labels));
}

DamageMask derive_localization(const DamageMask& mask) {
  DamageMask out(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const Label l = mask.labels()[i];
    out.labels()[i] = l == kIgnore ? kIgnore : (l >= 1 ? 1 : 0);
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'X', 'D', 'M', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("checkpoint is truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_checkpoint(const Model& model, const json& metadata) {
  json header;
  header["config"] = model.config();
  header["metadata"] = metadata.is_null() ? json::object() : metadata;
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& p : model.parameters()) {
    table.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset}, {"count", p.value.size()}});
    offset += p.value.size();
  }
  header["parameters"] = table;
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& p : model.parameters())
    for (float v : p.value) put_le<float>(out, v);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const json& metadata) {
  io::atomic_write(path, encode_checkpoint(model, metadata));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = io::read_text(path);
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("'" + path.string() + "' is not an xdmg checkpoint");
  std::size_t pos = sizeof(kMagic);
  if (get_le<std::uint32_t>(bytes, pos) != kFormatVersion) throw DataError("unsupported checkpoint version");
  const auto len = get_le<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw DataError("checkpoint is truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, len));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header is corrupt: ") + e.what());
  }
  pos += len;
  ModelConfig cfg = header.at("config").get<ModelConfig>();
  Model model = Model::init(cfg);
  const json& table = header.at("parameters");
  if (table.size() != model.parameters().size()) throw DataError("checkpoint parameter table does not match config");
  const std::size_t data_start = pos;
  for (std::size_t i = 0; i < table.size(); ++i) {
    Parameter& p = model.parameters()[i];
    if (table[i].at("name").get<std::string>() != p.name ||
        table[i].at("shape").get<std::vector<int>>() != p.shape)
      throw DataError("checkpoint parameter '" + table[i].at("name").get<std::string>() + "' does not match config");
    std::size_t at = data_start + table[i].at("offset").get<std::size_t>() * sizeof(float);
    for (float& v : p.value) v = get_le<float>(bytes, at);
  }
  return Checkpoint{std::move(model), header.value("metadata", json::object())};
}

}  // namespace xdmg
