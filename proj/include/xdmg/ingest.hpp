// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xdmg/core_types.hpp"

namespace xdmg {

struct ParsedLabels {
  std::vector<PolygonAnnotation> annotations;  // in file order
  std::vector<std::string> warnings;           // e.g. duplicate uids
  std::optional<int> width;                    // from "metadata", when present
  std::optional<int> height;
};

/// Parses an xBD-style label document:
///   {"features": {"xy": [{"wkt": "POLYGON ((x y, ...))",
///                         "properties": {"uid": "...", "subtype": "..."}}]}}
/// Errors name the offending feature index.
ParsedLabels parse_label_file(std::string_view text);

/// Exterior ring of a WKT POLYGON. Interior rings are rejected.
std::vector<Point> parse_wkt_polygon(std::string_view wkt);

/// Burns annotations into a mask using the pixel-center rule (centers on an
/// edge count as inside). Overlaps keep the larger damage class; IGNORE only
/// wins over background. Vertices outside the image are allowed.
DamageMask rasterize(const std::vector<PolygonAnnotation>& annotations, int height, int width);

struct IndexBuild {
  DatasetIndex index;
  std::vector<std::string> skipped;  // scene ids missing at least one file
};

/// Scans <root>/<split>/images and <root>/<split>/labels.
IndexBuild build_index(const std::filesystem::path& data_root, Split split);

/// Decodes both images and rasterizes the label file at image resolution.
ImagePair load_pair(const DatasetIndex& index, std::string_view scene_id);

/// Truth mask only (no image decoding beyond the size probe of the post image).
DamageMask load_truth(const IndexEntry& entry);

}  // namespace xdmg
