// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xdmg/core_types.hpp"

namespace xdmg::io {

/// Writes bytes to a sibling temporary file and renames it over `path`, so a
/// failure never leaves a partially written file behind.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_text(const std::filesystem::path& path);

/// 8-bit RGB (or RGBA/gray, converted) PNG normalized to [0,1].
Image read_rgb_png(const std::filesystem::path& path);
std::string encode_rgb_png(const Image& image);

/// Single-channel 8-bit PNG of raw label values (0..4, 255 = IGNORE).
DamageMask read_mask_png(const std::filesystem::path& path);
std::string encode_mask_png(const DamageMask& mask);

}  // namespace xdmg::io
