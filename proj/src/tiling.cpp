// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/tiling.hpp"

#include <algorithm>
#include <string>

#include "xdmg/error.hpp"

namespace xdmg {

namespace {

// Element-level access shared by Image (3 values per pixel) and DamageMask.
template <typename Raster>
constexpr int values_per_pixel() {
  if constexpr (std::is_same_v<Raster, Image>) return Image::kChannels;
  else return 1;
}

template <typename Raster>
auto& storage(Raster& r) {
  if constexpr (std::is_same_v<Raster, Image>) return r.pixels();
  else return r.labels();
}

template <typename Raster>
const auto& storage(const Raster& r) {
  if constexpr (std::is_same_v<Raster, Image>) return r.pixels();
  else return r.labels();
}

template <typename Raster>
TileSet<Raster> split_impl(const Raster& src) {
  if (src.height() % 2 != 0 || src.width() % 2 != 0)
    throw UsageError("quadrant split needs even dimensions, got " + std::to_string(src.height()) + "x" +
                     std::to_string(src.width()));
  const int th = src.height() / 2, tw = src.width() / 2;
  constexpr int vpp = values_per_pixel<Raster>();
  const auto& in = storage(src);
  auto make = [&](int r0, int c0) {
    Raster t(th, tw);
    auto& out = storage(t);
    for (int r = 0; r < th; ++r) {
      const auto* row = in.data() + (static_cast<std::size_t>(r0 + r) * src.width() + c0) * vpp;
      std::copy(row, row + static_cast<std::size_t>(tw) * vpp, out.data() + static_cast<std::size_t>(r) * tw * vpp);
    }
    return t;
  };
  return TileSet<Raster>{{make(0, 0), make(0, tw), make(th, 0), make(th, tw)}, src.height(), src.width()};
}

template <typename Raster>
Raster merge_impl(const TileSet<Raster>& set) {
  const int th = set.tiles[0].height(), tw = set.tiles[0].width();
  for (const Raster& t : set.tiles)
    if (t.height() != th || t.width() != tw) throw UsageError("quadrant merge needs four tiles of identical shape");
  if (set.origin_height != 2 * th || set.origin_width != 2 * tw)
    throw UsageError("quadrant merge: tile shape does not match the recorded origin dimensions");
  Raster dst(2 * th, 2 * tw);
  constexpr int vpp = values_per_pixel<Raster>();
  auto& out = storage(dst);
  const int r0s[4] = {0, 0, th, th}, c0s[4] = {0, tw, 0, tw};
  for (int q = 0; q < 4; ++q) {
    const auto& in = storage(set.tiles[q]);
    for (int r = 0; r < th; ++r)
      std::copy(in.data() + static_cast<std::size_t>(r) * tw * vpp, in.data() + static_cast<std::size_t>(r + 1) * tw * vpp,
                out.data() + (static_cast<std::size_t>(r0s[q] + r) * dst.width() + c0s[q]) * vpp);
  }
  return dst;
}

}  // namespace

TileSet<Image> split_quadrants(const Image& image) { return split_impl(image); }
TileSet<DamageMask> split_quadrants(const DamageMask& mask) { return split_impl(mask); }
Image merge_quadrants(const TileSet<Image>& tiles) { return merge_impl(tiles); }
DamageMask merge_quadrants(const TileSet<DamageMask>& tiles) { return merge_impl(tiles); }

}  // namespace xdmg
