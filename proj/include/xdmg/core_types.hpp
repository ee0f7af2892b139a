// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xdmg {

inline constexpr int kNumClasses = 5;

/// Mask label for pixels excluded from loss and scoring.
inline constexpr std::uint8_t kIgnore = 255;

/// Ordinal damage scale: 0 = no building, 1..4 = undamaged .. destroyed.
class DamageClass {
 public:
  static constexpr std::uint8_t kNoBuilding = 0;
  static constexpr std::uint8_t kUndamaged = 1;
  static constexpr std::uint8_t kMinor = 2;
  static constexpr std::uint8_t kMajor = 3;
  static constexpr std::uint8_t kDestroyed = 4;

  explicit DamageClass(int value);
  std::uint8_t value() const noexcept { return value_; }
  bool is_building() const noexcept { return value_ >= kUndamaged; }
  auto operator<=>(const DamageClass&) const = default;

 private:
  std::uint8_t value_;
};

/// Raw label value: a damage class in [0,4] or kIgnore.
using Label = std::uint8_t;

inline bool is_valid_label(Label l) noexcept { return l < kNumClasses || l == kIgnore; }

/// RGB image, HWC layout, values normalized to [0,1].
class Image {
 public:
  static constexpr int kChannels = 3;

  Image(int height, int width);  // zero-filled
  Image(int height, int width, std::vector<float> pixels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return kChannels; }

  float at(int row, int col, int ch) const { return pixels_[index(row, col, ch)]; }
  float& at(int row, int col, int ch) { return pixels_[index(row, col, ch)]; }

  const std::vector<float>& pixels() const noexcept { return pixels_; }
  std::vector<float>& pixels() noexcept { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * kChannels + ch;
  }
  int height_;
  int width_;
  std::vector<float> pixels_;
};

/// Per-pixel labels over {0..4} ∪ {kIgnore}, row-major.
class DamageMask {
 public:
  DamageMask(int height, int width, Label fill = 0);
  DamageMask(int height, int width, std::vector<Label> labels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return labels_.size(); }

  Label at(int row, int col) const { return labels_[static_cast<std::size_t>(row) * width_ + col]; }
  Label& at(int row, int col) { return labels_[static_cast<std::size_t>(row) * width_ + col]; }

  const std::vector<Label>& labels() const noexcept { return labels_; }
  std::vector<Label>& labels() noexcept { return labels_; }

  bool operator==(const DamageMask&) const = default;

 private:
  int height_;
  int width_;
  std::vector<Label> labels_;
};

/// Counts for classes 0..4 followed by the IGNORE count; sums to H*W.
using LabelHistogram = std::array<std::uint64_t, kNumClasses + 1>;

LabelHistogram histogram(const DamageMask& mask);

enum class Subtype { no_damage, minor_damage, major_damage, destroyed, un_classified };

Subtype parse_subtype(std::string_view text);
std::string_view to_string(Subtype s) noexcept;

/// Subtype string to mask label. Throws UsageError naming an unknown value.
Label class_of_subtype(std::string_view subtype);
Label class_of_subtype(Subtype subtype) noexcept;

struct Point {
  double x;  // column
  double y;  // row
  bool operator==(const Point&) const = default;
};

struct PolygonAnnotation {
  std::string uid;
  std::vector<Point> ring;  // closed ring as written in the label file
  Subtype subtype;
};

struct ImagePair {
  std::string scene_id;
  std::optional<Image> pre;  // absent only for post-only inference
  Image post;
  std::optional<DamageMask> truth;
};

enum class Split { train, val, test };

Split parse_split(std::string_view text);
std::string_view to_string(Split s) noexcept;

struct IndexEntry {
  std::string scene_id;
  std::string pre_path;
  std::string post_path;
  std::string label_path;
};

struct DatasetIndex {
  Split split = Split::train;
  std::vector<IndexEntry> entries;  // sorted by scene_id, ids unique

  const IndexEntry* find(std::string_view scene_id) const;
};

}  // namespace xdmg
