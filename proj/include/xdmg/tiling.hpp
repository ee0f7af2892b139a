// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "xdmg/core_types.hpp"

namespace xdmg {

enum class Quadrant { top_left = 0, top_right = 1, bottom_left = 2, bottom_right = 3 };

/// Four equal quadrants in the order top-left, top-right, bottom-left,
/// bottom-right, plus the dimensions of the source raster.
template <typename Raster>
struct TileSet {
  std::array<Raster, 4> tiles;
  int origin_height;
  int origin_width;

  const Raster& operator[](Quadrant q) const { return tiles[static_cast<int>(q)]; }
};

/// Requires even height and width.
TileSet<Image> split_quadrants(const Image& image);
TileSet<DamageMask> split_quadrants(const DamageMask& mask);

/// Requires four tiles of identical dimensions.
Image merge_quadrants(const TileSet<Image>& tiles);
DamageMask merge_quadrants(const TileSet<DamageMask>& tiles);

}  // namespace xdmg
