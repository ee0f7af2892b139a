// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/core_types.hpp"

#include <algorithm>

#include "xdmg/error.hpp"

namespace xdmg {

DamageClass::DamageClass(int value) : value_(static_cast<std::uint8_t>(value)) {
  if (value < 0 || value >= kNumClasses)
    throw UsageError("damage class out of range [0,4]: " + std::to_string(value));
}

Image::Image(int height, int width) : Image(height, width, std::vector<float>(
    static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0) * kChannels, 0.0f)) {}

Image::Image(int height, int width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height <= 0 || width <= 0)
    throw UsageError("image dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  if (pixels_.size() != static_cast<std::size_t>(height) * width * kChannels)
    throw UsageError("image pixel buffer size does not match " + std::to_string(height) + "x" +
                     std::to_string(width) + "x3");
  for (float v : pixels_)
    if (!(v >= 0.0f && v <= 1.0f)) throw UsageError("image pixel value outside [0,1]");
}

DamageMask::DamageMask(int height, int width, Label fill)
    : DamageMask(height, width,
                 std::vector<Label>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0),
                                    fill)) {}

DamageMask::DamageMask(int height, int width, std::vector<Label> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (height <= 0 || width <= 0)
    throw UsageError("mask dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  if (labels_.size() != static_cast<std::size_t>(height) * width)
    throw UsageError("mask label buffer size does not match dimensions");
  for (Label l : labels_)
    if (!is_valid_label(l)) throw UsageError("mask label outside {0..4, IGNORE}: " + std::to_string(l));
}

LabelHistogram histogram(const DamageMask& mask) {
  LabelHistogram h{};
  for (Label l : mask.labels()) ++h[l == kIgnore ? kNumClasses : l];
  return h;
}

Subtype parse_subtype(std::string_view text) {
  if (text == "no-damage") return Subtype::no_damage;
  if (text == "minor-damage") return Subtype::minor_damage;
  if (text == "major-damage") return Subtype::major_damage;
  if (text == "destroyed") return Subtype::destroyed;
  if (text == "un-classified") return Subtype::un_classified;
  throw UsageError("unknown damage subtype '" + std::string(text) + "'");
}

std::string_view to_string(Subtype s) noexcept {
  switch (s) {
    case Subtype::no_damage: return "no-damage";
    case Subtype::minor_damage: return "minor-damage";
    case Subtype::major_damage: return "major-damage";
    case Subtype::destroyed: return "destroyed";
    case Subtype::un_classified: return "un-classified";
  }
  return "un-classified";
}

Label class_of_subtype(Subtype subtype) noexcept {
  switch (subtype) {
    case Subtype::no_damage: return DamageClass::kUndamaged;
    case Subtype::minor_damage: return DamageClass::kMinor;
    case Subtype::major_damage: return DamageClass::kMajor;
    case Subtype::destroyed: return DamageClass::kDestroyed;
    case Subtype::un_classified: return kIgnore;
  }
  return kIgnore;
}

Label class_of_subtype(std::string_view subtype) { return class_of_subtype(parse_subtype(subtype)); }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw UsageError("unknown split '" + std::string(text) + "' (expected train, val or test)");
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

const IndexEntry* DatasetIndex::find(std::string_view scene_id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), scene_id,
                             [](const IndexEntry& e, std::string_view id) { return e.scene_id < id; });
  if (it == entries.end() || it->scene_id != scene_id) return nullptr;
  return &*it;
}

}  // namespace xdmg
