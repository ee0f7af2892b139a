// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "xdmg/core_types.hpp"

namespace xdmg {

/// Seeded synthetic bi-temporal scenes. Buildings are flat-colored textured
/// rectangles of random hue; the post image rotates each building's color
/// about the gray axis by a class-specific angle (0, 40, 80, 120 degrees,
/// destroyed additionally pixel-scrambled), so damage is only recoverable by
/// comparing the two images.
struct SyntheticSpec {
  int num_scenes = 8;  // train split
  int val_scenes = 2;
  int test_scenes = 0;
  int image_size = 64;
  int buildings_min = 3;
  int buildings_max = 6;
  int building_size_min = 8;
  int building_size_max = 16;
  std::array<double, 4> class_mix{0.25, 0.25, 0.25, 0.25};  // classes 1..4
  double unclassified_fraction = 0.0;
  std::uint64_t seed = 0;

  /// Throws UsageError on an invalid field (odd image size, bad mix, ...).
  void validate() const;
};

/// Building rectangles snap to this pixel grid.
inline constexpr int kSyntheticGrid = 4;

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

struct SyntheticBuilding {
  std::string uid;
  Subtype subtype;
  int x, y, w, h;  // pixel rectangle
};

struct SyntheticScene {
  std::string scene_id;
  Image pre;
  Image post;
  std::vector<SyntheticBuilding> buildings;
  LabelHistogram pixel_counts;  // classes 0..4 then IGNORE
};

/// Scenes of one split, in memory (nothing written).
std::vector<SyntheticScene> synthesize_split(const SyntheticSpec& spec, Split split);

struct SyntheticManifest {
  nlohmann::json json;
  std::array<LabelHistogram, 3> split_counts{};  // indexed by Split
  int scenes = 0;
};

/// Writes <out>/<split>/{images,labels} plus <out>/manifest.json.
SyntheticManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Label document in the ingest schema for one scene.
std::string label_document(const SyntheticScene& scene, int image_size);

}  // namespace xdmg
