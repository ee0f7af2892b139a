// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "xdmg/core_types.hpp"
#include "xdmg/ingest.hpp"
#include "xdmg/model.hpp"
#include "xdmg/synthetic.hpp"

namespace fixtures {

// In-memory synthetic split with truth rasterized from its label documents.
inline std::vector<xdmg::ImagePair> synthetic_pairs(const xdmg::SyntheticSpec& spec, xdmg::Split split) {
  std::vector<xdmg::ImagePair> out;
  for (xdmg::SyntheticScene& s : xdmg::synthesize_split(spec, split)) {
    const auto labels = xdmg::parse_label_file(xdmg::label_document(s, spec.image_size));
    xdmg::DamageMask truth = xdmg::rasterize(labels.annotations, spec.image_size, spec.image_size);
    out.push_back({s.scene_id, std::move(s.pre), std::move(s.post), std::move(truth)});
  }
  return out;
}

inline xdmg::ModelConfig tiny_model(xdmg::Fusion fusion, std::uint64_t seed) {
  xdmg::ModelConfig c;
  c.encoder_channels = {4, 8};
  c.pyramid_channels = 4;
  c.fusion = fusion;
  c.seed = seed;
  return c;
}

}  // namespace fixtures
