// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "xdmg/error.hpp"
#include "xdmg/io.hpp"
#include "xdmg/rng.hpp"

namespace xdmg {

using nlohmann::json;
namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  if (num_scenes < 0 || val_scenes < 0 || test_scenes < 0) throw UsageError("scene counts must be non-negative");
  if (image_size <= 0 || image_size % 2 != 0)
    throw UsageError("image_size must be positive and even, got " + std::to_string(image_size));
  if (buildings_min < 0 || buildings_max < buildings_min) throw UsageError("invalid buildings per scene range");
  if (building_size_min < kSyntheticGrid || building_size_max < building_size_min ||
      building_size_max > image_size)
    throw UsageError("invalid building size range");
  double sum = 0.0;
  for (double p : class_mix) {
    if (!(p >= 0.0)) throw UsageError("class_mix entries must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw UsageError("class_mix must sum to 1 over classes 1-4");
  if (!(unclassified_fraction >= 0.0 && unclassified_fraction <= 1.0))
    throw UsageError("unclassified_fraction must lie in [0,1]");
}

void to_json(json& j, const SyntheticSpec& s) {
  j = json{{"num_scenes", s.num_scenes},
           {"val_scenes", s.val_scenes},
           {"test_scenes", s.test_scenes},
           {"image_size", s.image_size},
           {"buildings_min", s.buildings_min},
           {"buildings_max", s.buildings_max},
           {"building_size_min", s.building_size_min},
           {"building_size_max", s.building_size_max},
           {"class_mix", s.class_mix},
           {"unclassified_fraction", s.unclassified_fraction},
           {"seed", s.seed}};
}

void from_json(const json& j, SyntheticSpec& s) {
  if (!j.is_object()) throw UsageError("synthetic spec must be a JSON object");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("num_scenes", s.num_scenes);
    get("val_scenes", s.val_scenes);
    get("test_scenes", s.test_scenes);
    get("image_size", s.image_size);
    get("buildings_min", s.buildings_min);
    get("buildings_max", s.buildings_max);
    get("building_size_min", s.building_size_min);
    get("building_size_max", s.building_size_max);
    get("class_mix", s.class_mix);
    get("unclassified_fraction", s.unclassified_fraction);
    get("seed", s.seed);
  } catch (const json::exception& e) {
    throw UsageError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
}

namespace {

constexpr double kAngles[4] = {0.0, 40.0, 80.0, 120.0};
constexpr double kChroma = 0.30;

struct Rgb {
  double r, g, b;
};

// Rodrigues rotation about the unit gray axis.
Rgb rotate_about_gray(const Rgb& v, double degrees) {
  const double t = degrees * M_PI / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  const double k = 1.0 / std::sqrt(3.0);
  const double dot = k * (v.r + v.g + v.b);
  // k x v with k = (1,1,1)/sqrt(3)
  const Rgb cross{k * (v.b - v.g), k * (v.r - v.b), k * (v.g - v.r)};
  return {v.r * c + cross.r * s + k * dot * (1 - c), v.g * c + cross.g * s + k * dot * (1 - c),
          v.b * c + cross.b * s + k * dot * (1 - c)};
}


// Quantize to the 8-bit grid the PNG will hold, so in-memory scenes equal
// what ingest decodes.
float q8(double v) { return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f; }

std::uint64_t split_seed(std::uint64_t seed, Split split) {
  return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL * (static_cast<std::uint64_t>(split) + 1);
}

int scene_count(const SyntheticSpec& spec, Split split) {
  switch (split) {
    case Split::train: return spec.num_scenes;
    case Split::val: return spec.val_scenes;
    case Split::test: return spec.test_scenes;
  }
  return 0;
}

struct Rect {
  int x, y, w, h;
  bool overlaps(const Rect& o) const { return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h; }
};

// Largest-remainder allocation of `n` items to weighted bins.
std::vector<int> apportion(int n, const std::vector<double>& weights) {
  std::vector<int> counts(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * n;
    counts[i] = static_cast<int>(std::floor(exact));
    used += counts[i];
    rem.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++counts[rem[k % rem.size()].second];
  return counts;
}

}  // namespace

std::vector<SyntheticScene> synthesize_split(const SyntheticSpec& spec, Split split) {
  spec.validate();
  Rng rng(split_seed(spec.seed, split));
  const int n = scene_count(spec, split);
  const int size = spec.image_size;
  const int g = kSyntheticGrid;

  // Layout first, so class labels can be apportioned over the whole split.
  std::vector<std::vector<Rect>> layouts(n);
  int total = 0;
  for (int s = 0; s < n; ++s) {
    const int want = static_cast<int>(rng.uniform_int(spec.buildings_min, spec.buildings_max));
    for (int b = 0; b < want; ++b) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const int lo = (spec.building_size_min + g - 1) / g, hi = spec.building_size_max / g;
        Rect r{0, 0, g * static_cast<int>(rng.uniform_int(lo, hi)), g * static_cast<int>(rng.uniform_int(lo, hi))};
        r.w = std::min(r.w, size);
        r.h = std::min(r.h, size);
        r.x = g * static_cast<int>(rng.uniform_int(0, (size - r.w) / g));
        r.y = g * static_cast<int>(rng.uniform_int(0, (size - r.h) / g));
        if (std::none_of(layouts[s].begin(), layouts[s].end(), [&](const Rect& o) { return r.overlaps(o); })) {
          layouts[s].push_back(r);
          break;
        }
      }
    }
    total += static_cast<int>(layouts[s].size());
  }
  const int unclassified = static_cast<int>(std::lround(spec.unclassified_fraction * total));
  const std::vector<int> per_class =
      apportion(total - unclassified, std::vector<double>(spec.class_mix.begin(), spec.class_mix.end()));
  std::vector<Subtype> subtypes(static_cast<std::size_t>(unclassified), Subtype::un_classified);
  const Subtype order[4] = {Subtype::no_damage, Subtype::minor_damage, Subtype::major_damage, Subtype::destroyed};
  for (int c = 0; c < 4; ++c) subtypes.insert(subtypes.end(), static_cast<std::size_t>(per_class[c]), order[c]);
  rng.shuffle(subtypes);

  std::vector<SyntheticScene> scenes;
  scenes.reserve(n);
  std::size_t next_label = 0;
  for (int s = 0; s < n; ++s) {
    char id[64];
    std::snprintf(id, sizeof id, "synthetic-%s_%05d", std::string(to_string(split)).c_str(), s);
    // Background: coarse value-noise gray field with a faint tint.
    const int cell = 16;
    const int gw = size / cell + 2;
    std::vector<Rgb> grid(static_cast<std::size_t>(gw) * gw);
    for (Rgb& c : grid) {
      const double base = rng.uniform(0.30, 0.55);
      c = {base + rng.uniform(-0.03, 0.03), base + rng.uniform(-0.03, 0.03), base + rng.uniform(-0.03, 0.03)};
    }
    std::vector<Rgb> pre(static_cast<std::size_t>(size) * size);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const double fy = static_cast<double>(r) / cell, fx = static_cast<double>(c) / cell;
        const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
        const double wy = fy - y0, wx = fx - x0;
        auto at = [&](int yy, int xx) { return grid[static_cast<std::size_t>(yy) * gw + xx]; };
        auto mix = [&](double Rgb::*ch) {
          return (1 - wy) * ((1 - wx) * at(y0, x0).*ch + wx * at(y0, x0 + 1).*ch) +
                 wy * ((1 - wx) * at(y0 + 1, x0).*ch + wx * at(y0 + 1, x0 + 1).*ch);
        };
        const double nse = rng.uniform(-0.04, 0.04);
        pre[static_cast<std::size_t>(r) * size + c] = {mix(&Rgb::r) + nse + rng.uniform(-0.01, 0.01),
                                                       mix(&Rgb::g) + nse + rng.uniform(-0.01, 0.01),
                                                       mix(&Rgb::b) + nse + rng.uniform(-0.01, 0.01)};
      }
    std::vector<Rgb> post = pre;

    SyntheticScene scene{id, Image(size, size), Image(size, size), {}, {}};
    std::vector<Label> burn(static_cast<std::size_t>(size) * size, 0);
    int bidx = 0;
    for (const Rect& rect : layouts[s]) {
      const Subtype st = subtypes[next_label++];
      char uid[96];
      std::snprintf(uid, sizeof uid, "%s-b%02d", id, bidx++);
      scene.buildings.push_back({uid, st, rect.x, rect.y, rect.w, rect.h});
      const double value = rng.uniform(0.45, 0.55);
      const double hue = rng.uniform(0.0, 2.0 * M_PI);
      // Orthonormal basis of the plane orthogonal to gray.
      const Rgb e1{2 / std::sqrt(6.0), -1 / std::sqrt(6.0), -1 / std::sqrt(6.0)};
      const Rgb e2{0.0, 1 / std::sqrt(2.0), -1 / std::sqrt(2.0)};
      const double ca = kChroma * std::cos(hue), sa = kChroma * std::sin(hue);
      const Rgb color{value + ca * e1.r + sa * e2.r, value + ca * e1.g + sa * e2.g, value + ca * e1.b + sa * e2.b};
      const int ci = st == Subtype::un_classified ? static_cast<int>(rng.uniform_int(0, 3))
                                                  : class_of_subtype(st) - 1;
      std::vector<Rgb> rotated;
      for (int r = rect.y; r < rect.y + rect.h; ++r)
        for (int c = rect.x; c < rect.x + rect.w; ++c) {
          const double t = rng.uniform(-0.03, 0.03);
          const Rgb px{color.r + t + rng.uniform(-0.01, 0.01), color.g + t + rng.uniform(-0.01, 0.01),
                       color.b + t + rng.uniform(-0.01, 0.01)};
          pre[static_cast<std::size_t>(r) * size + c] = px;
          rotated.push_back(ci == 0 ? px : rotate_about_gray(px, kAngles[ci]));
          burn[static_cast<std::size_t>(r) * size + c] = class_of_subtype(st);
        }
      if (st == Subtype::destroyed) rng.shuffle(rotated);
      std::size_t k = 0;
      for (int r = rect.y; r < rect.y + rect.h; ++r)
        for (int c = rect.x; c < rect.x + rect.w; ++c) post[static_cast<std::size_t>(r) * size + c] = rotated[k++];
    }
    auto fill = [&](Image& img, const std::vector<Rgb>& px) {
      for (std::size_t i = 0; i < px.size(); ++i) {
        img.pixels()[i * 3 + 0] = q8(px[i].r);
        img.pixels()[i * 3 + 1] = q8(px[i].g);
        img.pixels()[i * 3 + 2] = q8(px[i].b);
      }
    };
    fill(scene.pre, pre);
    fill(scene.post, post);
    scene.pixel_counts = histogram(DamageMask(size, size, std::move(burn)));
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::string label_document(const SyntheticScene& scene, int image_size) {
  json features = json::array();
  for (const SyntheticBuilding& b : scene.buildings) {
    char wkt[256];
    std::snprintf(wkt, sizeof wkt, "POLYGON ((%d %d, %d %d, %d %d, %d %d, %d %d))", b.x, b.y, b.x + b.w, b.y,
                  b.x + b.w, b.y + b.h, b.x, b.y + b.h, b.x, b.y);
    features.push_back({{"wkt", wkt},
                        {"properties",
                         {{"feature_type", "building"}, {"subtype", std::string(to_string(b.subtype))}, {"uid", b.uid}}}});
  }
  json doc{{"metadata", {{"width", image_size}, {"height", image_size}, {"img_name", scene.scene_id + "_post_disaster.png"}}},
           {"features", {{"xy", features}}}};
  return doc.dump(1) + "\n";
}

SyntheticManifest generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw DataError("cannot create output directory '" + out_dir.string() + "'");
  SyntheticManifest m;
  m.json["spec"] = spec;
  m.json["classes"] = {"no-building", "no-damage", "minor-damage", "major-damage", "destroyed", "ignore"};
  for (Split split : {Split::train, Split::val, Split::test}) {
    if (scene_count(spec, split) == 0) continue;
    const std::string name(to_string(split));
    const std::vector<SyntheticScene> scenes = synthesize_split(spec, split);
    json entries = json::array();
    LabelHistogram& totals = m.split_counts[static_cast<int>(split)];
    for (const SyntheticScene& s : scenes) {
      const fs::path base = out_dir / name;
      io::atomic_write(base / "images" / (s.scene_id + "_pre_disaster.png"), io::encode_rgb_png(s.pre));
      io::atomic_write(base / "images" / (s.scene_id + "_post_disaster.png"), io::encode_rgb_png(s.post));
      io::atomic_write(base / "labels" / (s.scene_id + "_post_disaster.json"), label_document(s, spec.image_size));
      json buildings = json::array();
      for (const auto& b : s.buildings)
        buildings.push_back({{"uid", b.uid}, {"subtype", std::string(to_string(b.subtype))},
                             {"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}});
      entries.push_back({{"scene_id", s.scene_id}, {"pixel_counts", s.pixel_counts}, {"buildings", buildings}});
      for (std::size_t k = 0; k < totals.size(); ++k) totals[k] += s.pixel_counts[k];
      ++m.scenes;
    }
    m.json["splits"][name] = {{"scenes", entries}, {"pixel_counts", totals}};
  }
  io::atomic_write(out_dir / "manifest.json", m.json.dump(1) + "\n");
  return m;
}

}  // namespace xdmg
