// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "xdmg/error.hpp"
#include "xdmg/io.hpp"

namespace xdmg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class WktCursor {
 public:
  explicit WktCursor(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }
  void expect_keyword(std::string_view kw) {
    skip_ws();
    if (s_.size() - pos_ < kw.size()) fail("expected " + std::string(kw));
    for (std::size_t i = 0; i < kw.size(); ++i)
      if (std::toupper(static_cast<unsigned char>(s_[pos_ + i])) != kw[i]) fail("expected " + std::string(kw));
    pos_ += kw.size();
  }
  double number() {
    skip_ws();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc() || !std::isfinite(v)) fail("expected a number");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }
  bool at_end() {
    skip_ws();
    return pos_ == s_.size();
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw UsageError("WKT parse error at offset " + std::to_string(pos_) + ": " + msg);
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

// Pixel-center inclusion for one ring, limited to the image, written into `covered`.
void scan_ring(const std::vector<Point>& ring, int height, int width, std::vector<char>& covered) {
  const std::size_t n = ring.size();
  double ymin = ring[0].y, ymax = ring[0].y;
  for (const Point& p : ring) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int r0 = static_cast<int>(std::clamp(std::ceil(ymin - 0.5), 0.0, static_cast<double>(height)));
  const int r1 = static_cast<int>(std::clamp(std::floor(ymax - 0.5), -1.0, height - 1.0));
  std::vector<double> xs;
  auto mark_span = [&](int row, double xa, double xb) {
    const int c0 = static_cast<int>(std::clamp(std::ceil(xa - 0.5), 0.0, static_cast<double>(width)));
    const int c1 = static_cast<int>(std::clamp(std::floor(xb - 0.5), -1.0, width - 1.0));
    for (int c = c0; c <= c1; ++c) covered[static_cast<std::size_t>(row) * width + c] = 1;
  };
  for (int r = r0; r <= r1; ++r) {
    const double y = r + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = ring[i];
      const Point& b = ring[(i + 1) % n];
      if (a.y == b.y) {
        // Horizontal edges never cross; centers lying on them are boundary.
        if (a.y == y) mark_span(r, std::min(a.x, b.x), std::max(a.x, b.x));
        continue;
      }
      const Point& lo = a.y < b.y ? a : b;
      const Point& hi = a.y < b.y ? b : a;
      if (y >= lo.y && y < hi.y) xs.push_back(lo.x + (y - lo.y) * (hi.x - lo.x) / (hi.y - lo.y));
      // The upper endpoint is excluded above; a center sitting on it is a vertex.
      if (y == hi.y) mark_span(r, hi.x, hi.x);
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) mark_span(r, xs[k], xs[k + 1]);
  }
}

int burn_rank(Label l) {
  if (l == kIgnore) return 1;
  return l == 0 ? 0 : l + 1;
}

}  // namespace

std::vector<Point> parse_wkt_polygon(std::string_view wkt) {
  WktCursor cur(wkt);
  cur.expect_keyword("POLYGON");
  cur.expect('(');
  cur.expect('(');
  std::vector<Point> ring;
  do {
    const double x = cur.number();
    const double y = cur.number();
    ring.push_back({x, y});
  } while (cur.eat(','));
  cur.expect(')');
  if (cur.eat(',')) cur.fail("polygon holes (interior rings) are not supported");
  cur.expect(')');
  if (!cur.at_end()) cur.fail("trailing characters after polygon");
  if (ring.size() >= 2 && ring.front() == ring.back()) {
    if (ring.size() < 4) cur.fail("ring needs at least 3 distinct vertices");
  } else if (ring.size() < 3) {
    cur.fail("ring needs at least 3 vertices");
  }
  return ring;
}

ParsedLabels parse_label_file(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("label file is not valid JSON: ") + e.what());
  }
  ParsedLabels out;
  if (!doc.is_object() || !doc.contains("features") || !doc["features"].is_object() ||
      !doc["features"].contains("xy") || !doc["features"]["xy"].is_array())
    throw UsageError("label file must contain an object \"features\" with an array \"xy\"");
  if (doc.contains("metadata") && doc["metadata"].is_object()) {
    const json& md = doc["metadata"];
    if (md.contains("width") && md["width"].is_number_integer()) out.width = md["width"].get<int>();
    if (md.contains("height") && md["height"].is_number_integer()) out.height = md["height"].get<int>();
  }
  std::set<std::string> seen;
  const json& features = doc["features"]["xy"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const json& f = features[i];
    const std::string where = "feature " + std::to_string(i) + ": ";
    if (!f.is_object() || !f.contains("wkt") || !f["wkt"].is_string())
      throw UsageError(where + "missing string field \"wkt\"");
    if (!f.contains("properties") || !f["properties"].is_object())
      throw UsageError(where + "missing object field \"properties\"");
    const json& props = f["properties"];
    if (!props.contains("subtype") || !props["subtype"].is_string())
      throw UsageError(where + "missing string property \"subtype\"");
    PolygonAnnotation ann;
    try {
      ann.subtype = parse_subtype(props["subtype"].get<std::string>());
      ann.ring = parse_wkt_polygon(f["wkt"].get<std::string>());
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
    if (props.contains("uid") && props["uid"].is_string()) ann.uid = props["uid"].get<std::string>();
    if (!ann.uid.empty() && !seen.insert(ann.uid).second)
      out.warnings.push_back(where + "duplicate uid '" + ann.uid + "'");
    out.annotations.push_back(std::move(ann));
  }
  return out;
}

DamageMask rasterize(const std::vector<PolygonAnnotation>& annotations, int height, int width) {
  DamageMask mask(height, width, 0);
  std::vector<char> covered(mask.size());
  for (const PolygonAnnotation& ann : annotations) {
    std::vector<Point> ring = ann.ring;
    if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
    if (ring.size() < 3) continue;
    std::fill(covered.begin(), covered.end(), 0);
    scan_ring(ring, height, width, covered);
    const Label label = class_of_subtype(ann.subtype);
    auto& labels = mask.labels();
    for (std::size_t i = 0; i < covered.size(); ++i)
      if (covered[i] && burn_rank(label) > burn_rank(labels[i])) labels[i] = label;
  }
  return mask;
}

IndexBuild build_index(const fs::path& data_root, Split split) {
  const fs::path split_dir = data_root / std::string(to_string(split));
  std::error_code ec;
  if (!fs::is_directory(split_dir, ec))
    throw DataError("split directory '" + split_dir.string() + "' is missing or unreadable");
  static constexpr std::string_view kPre = "_pre_disaster.png";
  static constexpr std::string_view kPost = "_post_disaster.png";
  static constexpr std::string_view kLabel = "_post_disaster.json";
  struct Found {
    bool pre = false, post = false, label = false;
  };
  std::map<std::string, Found> scenes;
  auto scan = [&](const fs::path& dir, auto&& on_name) {
    if (!fs::is_directory(dir, ec)) return;
    fs::directory_iterator it(dir, ec);
    if (ec) throw DataError("cannot read directory '" + dir.string() + "'");
    for (const auto& de : it) {
      if (!de.is_regular_file(ec)) continue;
      on_name(de.path().filename().string());
    }
  };
  auto ends_with = [](const std::string& s, std::string_view suffix) {
    return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  scan(split_dir / "images", [&](const std::string& name) {
    if (ends_with(name, kPre)) scenes[name.substr(0, name.size() - kPre.size())].pre = true;
    else if (ends_with(name, kPost)) scenes[name.substr(0, name.size() - kPost.size())].post = true;
  });
  scan(split_dir / "labels", [&](const std::string& name) {
    if (ends_with(name, kLabel)) scenes[name.substr(0, name.size() - kLabel.size())].label = true;
  });
  IndexBuild out;
  out.index.split = split;
  for (const auto& [id, f] : scenes) {
    if (!(f.pre && f.post && f.label)) {
      out.skipped.push_back(id);
      continue;
    }
    out.index.entries.push_back({id, (split_dir / "images" / (id + std::string(kPre))).string(),
                                 (split_dir / "images" / (id + std::string(kPost))).string(),
                                 (split_dir / "labels" / (id + std::string(kLabel))).string()});
  }
  return out;
}

namespace {

DamageMask truth_for(const IndexEntry& entry, int height, int width) {
  ParsedLabels labels;
  try {
    labels = parse_label_file(io::read_text(entry.label_path));
  } catch (const UsageError& e) {
    throw DataError("scene '" + entry.scene_id + "': " + e.what());
  }
  if ((labels.width && *labels.width != width) || (labels.height && *labels.height != height))
    throw DataError("scene '" + entry.scene_id + "': label metadata size disagrees with the post image");
  return rasterize(labels.annotations, height, width);
}

}  // namespace

ImagePair load_pair(const DatasetIndex& index, std::string_view scene_id) {
  const IndexEntry* entry = index.find(scene_id);
  if (!entry) throw DataError("scene '" + std::string(scene_id) + "' is not in the index");
  Image pre = io::read_rgb_png(entry->pre_path);
  Image post = io::read_rgb_png(entry->post_path);
  if (pre.height() != post.height() || pre.width() != post.width())
    throw DataError("scene '" + entry->scene_id + "': pre image is " + std::to_string(pre.height()) + "x" +
                    std::to_string(pre.width()) + " but post image is " + std::to_string(post.height()) +
                    "x" + std::to_string(post.width()));
  DamageMask truth = truth_for(*entry, post.height(), post.width());
  return ImagePair{entry->scene_id, std::move(pre), std::move(post), std::move(truth)};
}

DamageMask load_truth(const IndexEntry& entry) {
  const Image post = io::read_rgb_png(entry.post_path);
  return truth_for(entry, post.height(), post.width());
}

}  // namespace xdmg
