// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/commands.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xdmg/error.hpp"
#include "xdmg/ingest.hpp"
#include "xdmg/io.hpp"
#include "xdmg/pipeline.hpp"
#include "xdmg/synthetic.hpp"

namespace xdmg::commands {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path, const char* what) {
  const std::string text = io::read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string(what) + " '" + path.string() + "' is malformed: " + e.what());
  }
}

std::string counts_line(const LabelHistogram& h) {
  std::ostringstream ss;
  ss << "class pixels [0..4]: " << h[0] << " " << h[1] << " " << h[2] << " " << h[3] << " " << h[4]
     << "; ignore: " << h[5];
  return ss.str();
}

std::string report_line(const MetricsReport& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.4f / %.4f / %.4f", r.overall_f1, r.localization_f1, r.damage_f1);
  return buf;
}

DatasetIndex index_or_throw(const fs::path& root, Split split) {
  IndexBuild b = build_index(root, split);
  if (b.index.entries.empty())
    throw DataError("split '" + std::string(to_string(split)) + "' under '" + root.string() + "' has no complete scenes");
  return std::move(b.index);
}

TrainConfig read_train_config(const fs::path& path, bool single_thread) {
  TrainConfig cfg = read_json_file(path, "train config").get<TrainConfig>();
  if (single_thread) cfg.threads = 1;
  return cfg;
}

// Scene id -> mask from a directory of mask PNGs or a dataset split directory.
std::map<std::string, DamageMask> load_masks(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("'" + dir.string() + "' is not a readable directory");
  std::map<std::string, DamageMask> out;
  if (fs::is_directory(dir / "labels", ec)) {
    fs::path split_dir = dir.lexically_normal();
    if (split_dir.filename().empty()) split_dir = split_dir.parent_path();
    const IndexBuild b = build_index(split_dir.parent_path(), parse_split(split_dir.filename().string()));
    for (const IndexEntry& e : b.index.entries) out.emplace(e.scene_id, load_truth(e));
    return out;
  }
  static const std::string suffixes[] = {"_prediction.png", "_truth.png"};
  for (const auto& de : fs::directory_iterator(dir)) {
    const std::string name = de.path().filename().string();
    for (const std::string& sfx : suffixes)
      if (name.size() > sfx.size() && name.compare(name.size() - sfx.size(), sfx.size(), sfx) == 0) {
        out.emplace(name.substr(0, name.size() - sfx.size()), io::read_mask_png(de.path()));
        break;
      }
  }
  return out;
}

}  // namespace

std::string synth(const fs::path& spec_json, const fs::path& out_dir) {
  const SyntheticSpec spec = read_json_file(spec_json, "synthetic spec").get<SyntheticSpec>();
  const SyntheticManifest m = generate_synthetic(spec, out_dir);
  std::ostringstream ss;
  ss << "wrote " << m.scenes << " scenes to " << out_dir.string() << "\n";
  for (Split s : {Split::train, Split::val, Split::test}) {
    const int n = s == Split::train ? spec.num_scenes : s == Split::val ? spec.val_scenes : spec.test_scenes;
    if (n > 0) ss << "  " << to_string(s) << ": " << n << " scenes, " << counts_line(m.split_counts[static_cast<int>(s)]) << "\n";
  }
  return ss.str();
}

std::string ingest(const fs::path& data_root, const std::string& split, const std::optional<fs::path>& truth_out_dir) {
  const IndexBuild b = build_index(data_root, parse_split(split));
  std::ostringstream ss;
  ss << "indexed " << b.index.entries.size() << " scenes in split '" << split << "', skipped " << b.skipped.size()
     << "\n";
  for (const std::string& id : b.skipped) ss << "  skipped (missing files): " << id << "\n";
  if (b.index.entries.empty()) return ss.str();
  ClassFrequencies freq;
  for (const IndexEntry& e : b.index.entries) {
    const DamageMask truth = load_truth(e);
    freq.add(truth);
    if (truth_out_dir) io::atomic_write(*truth_out_dir / (e.scene_id + "_truth.png"), io::encode_mask_png(truth));
  }
  ss << "  class pixels [0..4]:";
  for (auto c : freq.counts) ss << " " << c;
  ss << "\n";
  if (freq.total > 0) {
    const ClassWeights w = inverse_frequency_weights(freq);
    char buf[160];
    std::snprintf(buf, sizeof buf, "  inverse-frequency weights: %.5f %.5f %.5f %.5f %.5f\n", w.weights[0],
                  w.weights[1], w.weights[2], w.weights[3], w.weights[4]);
    ss << buf;
  }
  return ss.str();
}

std::string train(const fs::path& data_root, const fs::path& config_json, const fs::path& run_dir,
                  bool single_thread) {
  const TrainConfig cfg = read_train_config(config_json, single_thread);
  const DatasetIndex train_idx = index_or_throw(data_root, Split::train);
  const DatasetIndex val_idx = index_or_throw(data_root, Split::val);
  const std::vector<ImagePair> train_scenes = load_split(train_idx);
  const std::vector<ImagePair> val_scenes = load_split(val_idx);
  const int d = cfg.model.required_divisor() * (cfg.tile ? 2 : 1);
  for (const auto* set : {&train_scenes, &val_scenes})
    for (const ImagePair& p : *set)
      if (p.post.height() % d != 0 || p.post.width() % d != 0)
        throw DataError("scene '" + p.scene_id + "' size is not a multiple of " + std::to_string(d));

  const TrainResult r = xdmg::train(cfg, train_scenes, val_scenes);

  json resolved = cfg;
  json weights = json::array();
  for (double w : r.weights.weights) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5f", w);
    weights.push_back(std::stod(buf));
  }
  resolved["class_weights"] = weights;
  json meta{{"tile", cfg.tile}, {"best_epoch", r.best_epoch}, {"class_weights", weights}, {"train_config", cfg}};
  std::string log;
  for (const EpochRecord& rec : r.log) log += to_json(rec).dump() + "\n";
  io::atomic_write(run_dir / "config.json", resolved.dump(2) + "\n");
  io::atomic_write(run_dir / "train_log.jsonl", log);
  save_checkpoint(run_dir / "checkpoint.xdmg", r.best, meta);

  std::ostringstream ss;
  ss << "trained " << r.log.size() << " epochs on " << train_scenes.size() << " scenes ("
     << to_string(cfg.model.fusion) << ", " << to_string(cfg.loss) << ")\n";
  if (!r.log.empty()) {
    const EpochRecord& last = r.log.back();
    char buf[160];
    std::snprintf(buf, sizeof buf, "  last epoch %d: loss %.5f, val overall %.4f loc %.4f dmg %.4f\n", last.epoch,
                  last.train_loss, last.val_overall_f1, last.val_localization_f1, last.val_damage_f1);
    ss << buf;
  }
  ss << "  best epoch " << r.best_epoch << "; collapse guard " << (r.collapsed ? "FIRED" : "quiet") << "\n";
  if (r.diverged) throw RuntimeFailure("training diverged (" + r.diverged_reason + "); last good checkpoint kept");
  return ss.str();
}

namespace {

Checkpoint load_model(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw DataError("checkpoint '" + path.string() + "' not found");
  return load_checkpoint(path);
}

void check_divisible(const Checkpoint& ck, const Image& img, const std::string& what) {
  const int d = ck.model.config().required_divisor() * (ck.metadata.value("tile", true) ? 2 : 1);
  if (img.height() % d != 0 || img.width() % d != 0)
    throw DataError(what + " is " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                    "; this checkpoint needs dimensions divisible by " + std::to_string(d));
}

}  // namespace

std::string predict(const fs::path& checkpoint, const std::optional<fs::path>& pre_png, const fs::path& post_png,
                    const fs::path& out_png) {
  const Checkpoint ck = load_model(checkpoint);
  const Fusion fusion = ck.model.config().fusion;
  if (needs_pre(fusion) && !pre_png)
    throw UsageError("checkpoint uses " + std::string(to_string(fusion)) + " fusion and needs --pre");
  ImagePair pair{post_png.stem().string(), std::nullopt, io::read_rgb_png(post_png), std::nullopt};
  if (pre_png && needs_pre(fusion)) {
    pair.pre = io::read_rgb_png(*pre_png);
    if (pair.pre->height() != pair.post.height() || pair.pre->width() != pair.post.width())
      throw DataError("pre image " + std::to_string(pair.pre->height()) + "x" + std::to_string(pair.pre->width()) +
                      " and post image " + std::to_string(pair.post.height()) + "x" +
                      std::to_string(pair.post.width()) + " differ in size");
  }
  check_divisible(ck, pair.post, "post image");
  const DamageMask mask = predict_scene(ck.model, pair, ck.metadata.value("tile", true));
  io::atomic_write(out_png, io::encode_mask_png(mask));
  const LabelHistogram h = histogram(mask);
  return "wrote " + out_png.string() + " (" + counts_line(h) + ")\n";
}

std::string predict_split(const fs::path& checkpoint, const fs::path& data_root, const std::string& split,
                          const fs::path& out_dir) {
  const Checkpoint ck = load_model(checkpoint);
  const DatasetIndex idx = index_or_throw(data_root, parse_split(split));
  const bool tile = ck.metadata.value("tile", true);
  std::size_t n = 0;
  for (const IndexEntry& e : idx.entries) {
    ImagePair pair = load_pair(idx, e.scene_id);
    check_divisible(ck, pair.post, "scene '" + e.scene_id + "'");
    io::atomic_write(out_dir / (e.scene_id + "_prediction.png"),
                     io::encode_mask_png(predict_scene(ck.model, pair, tile)));
    ++n;
  }
  return "wrote " + std::to_string(n) + " prediction masks to " + out_dir.string() + "\n";
}

std::string score(const fs::path& pred_dir, const fs::path& truth_dir, const fs::path& out_json) {
  const auto preds = load_masks(pred_dir);
  const auto truths = load_masks(truth_dir);
  std::vector<std::string> missing_pred, missing_truth;
  for (const auto& [id, m] : truths)
    if (!preds.count(id)) missing_pred.push_back(id);
  for (const auto& [id, m] : preds)
    if (!truths.count(id)) missing_truth.push_back(id);
  if (!missing_pred.empty() || !missing_truth.empty()) {
    std::string msg = "scene sets differ;";
    for (const auto& id : missing_pred) msg += " missing prediction: " + id + ";";
    for (const auto& id : missing_truth) msg += " missing truth: " + id + ";";
    throw DataError(msg);
  }
  if (truths.empty()) throw DataError("no masks found in '" + truth_dir.string() + "'");
  ConfusionMatrix cm(kNumClasses);
  for (const auto& [id, truth] : truths) {
    const DamageMask& pred = preds.at(id);
    if (pred.height() != truth.height() || pred.width() != truth.width())
      throw DataError("scene '" + id + "': prediction and truth sizes differ");
    cm = merge_confusion(cm, accumulate_confusion(pred, truth));
  }
  const MetricsReport r = make_report(cm);
  io::atomic_write(out_json, to_json(r).dump(2) + "\n");
  return "scored " + std::to_string(truths.size()) + " scenes: overall / localization / damage = " +
         report_line(r) + "\n";
}

std::string ablate(const fs::path& data_root, const fs::path& config_json, const fs::path& out_csv,
                   bool single_thread) {
  const TrainConfig cfg = read_train_config(config_json, single_thread);
  const std::vector<ImagePair> train_scenes = load_split(index_or_throw(data_root, Split::train));
  const std::vector<ImagePair> val_scenes = load_split(index_or_throw(data_root, Split::val));
  const std::vector<AblationRow> rows = run_ablation(cfg, train_scenes, val_scenes);
  io::atomic_write(out_csv, ablation_csv(rows));
  std::ostringstream ss;
  ss << "ablation (" << rows.size() << " legs), overall / localization / damage:\n";
  for (const AblationRow& r : rows) {
    ss << "  " << r.config << ": ";
    if (r.failed) ss << "FAILED (" << r.error << ")";
    else ss << report_line(r.metrics) << (r.collapsed ? " [collapse guard fired]" : "");
    ss << "\n";
  }
  return ss.str();
}

}  // namespace xdmg::commands
