// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `--only 1,4,7` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "xdmg/commands.hpp"
#include "xdmg/io.hpp"
#include "xdmg/loss.hpp"
#include "xdmg/metrics.hpp"
#include "xdmg/pipeline.hpp"
#include "xdmg/tiling.hpp"

using namespace xdmg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path g_work;

// ---- 1 -------------------------------------------------------------------
Outcome metric_identity() {
  const double a = overall_f1(0.835, 0.697), b = overall_f1(0.705, 0.401);
  const bool ok = std::abs(a - 0.7384) <= 5e-4 && std::abs(b - 0.4922) <= 5e-4 && std::abs(a - 0.738) <= 5e-4 &&
                  std::abs(b - 0.492) <= 5e-4;
  return {ok, fmt("overall(0.835,0.697)=%.5f overall(0.705,0.401)=%.5f", a, b)};
}

// ---- 2 -------------------------------------------------------------------
Outcome damage_convention() {
  const double d = damage_f1({0.0, 0.906, 0.493, 0.722, 0.837});
  const bool ok = std::abs(d - 0.700) <= 1e-3 && std::abs(d - 0.697) <= 0.01;
  return {ok, fmt("harmonic mean of (0.906,0.493,0.722,0.837) = %.5f; |d-0.697| = %.4f", d, std::abs(d - 0.697))};
}

// ---- 3 -------------------------------------------------------------------
Outcome gradient_check() {
  Rng rng(3);
  double worst_w = 0.0, worst_o = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Logits l = oracle::random_logits(rng, 2, 2);
    const DamageMask t = oracle::random_mask(rng, 2, 2);
    ClassWeights w;
    for (double& v : w.weights) v = rng.uniform(0.1, 3.0);
    worst_w = std::max(worst_w, oracle::gradient_error([&](const Logits& x) { return weighted_cross_entropy(x, t, w).value; },
                                                       l, weighted_cross_entropy(l, t, w).gradient));
    worst_o = std::max(worst_o, oracle::gradient_error([&](const Logits& x) { return ordinal_cross_entropy(x, t).value; },
                                                       l, ordinal_cross_entropy(l, t).gradient));
  }
  return {worst_w <= 1e-4 && worst_o <= 1e-4,
          fmt("20 instances, max rel error weighted %.2e, ordinal %.2e (limit 1e-4)", worst_w, worst_o)};
}

// ---- 4 -------------------------------------------------------------------
Outcome siamese_sharing() {
  ModelConfig fc;
  fc.fusion = Fusion::feature_concat;
  fc.seed = 4;
  ModelConfig mono = fc;
  mono.fusion = Fusion::mono_post;
  const Model m = Model::init(fc);
  Rng rng(44);
  int identical = 0;
  for (int i = 0; i < 10; ++i) {
    const Image x = oracle::random_image(rng, 64, 64);
    const ImagePair pair{"s", x, Image(x), std::nullopt};
    const nn::Tensor from_pre = m.encode(*pair.pre), from_post = m.encode(pair.post);
    identical += from_pre.data.size() == from_post.data.size() &&
                 std::equal(from_pre.data.begin(), from_pre.data.end(), from_post.data.begin(),
                            [](float a, float b) { return std::memcmp(&a, &b, sizeof a) == 0; });
  }
  const std::size_t pc_fc = m.encoder_parameter_count(), pc_mono = Model::init(mono).encoder_parameter_count();
  return {identical == 10 && pc_fc == pc_mono,
          fmt("%d/10 images bit-identical across branches; encoder params feature-concat %zu, mono-post %zu", identical,
              pc_fc, pc_mono)};
}

// ---- 5 -------------------------------------------------------------------
Outcome tiling_exactness() {
  Rng rng(5);
  int round_trip = 0, merged_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const int h = 2 * static_cast<int>(rng.uniform_int(1, 32)), w = 2 * static_cast<int>(rng.uniform_int(1, 32));
    const Image img = oracle::random_image(rng, h, w);
    const DamageMask pred = oracle::random_mask(rng, h, w, true), truth = oracle::random_mask(rng, h, w, true);
    round_trip += merge_quadrants(split_quadrants(img)) == img && merge_quadrants(split_quadrants(pred)) == pred;
    const auto pt = split_quadrants(pred), tt = split_quadrants(truth);
    ConfusionMatrix sum(kNumClasses);
    for (int q = 0; q < 4; ++q) sum = merge_confusion(sum, accumulate_confusion(pt.tiles[q], tt.tiles[q]));
    merged_ok += sum == accumulate_confusion(pred, truth);
  }
  return {round_trip == 100 && merged_ok == 100,
          fmt("round trip %d/100, per-tile confusion merge %d/100", round_trip, merged_ok)};
}

// ---- 6 -------------------------------------------------------------------
Outcome rasterization_oracle() {
  Rng rng(6);
  int agree = 0, polygons = 0;
  long pixels = 0;
  for (int i = 0; i < 50; ++i) {
    const oracle::PolygonScene s = oracle::random_polygon_scene(rng, 32, 4);
    agree += rasterize(s.annotations, s.height, s.width) == oracle::rasterize(s.annotations, s.height, s.width);
    polygons += static_cast<int>(s.annotations.size());
    pixels += static_cast<long>(s.height) * s.width;
  }
  return {agree == 50, fmt("%d/50 scenes exact (%d polygons, %ld pixels)", agree, polygons, pixels)};
}

// ---- shared training helpers ----------------------------------------------
SyntheticSpec data_spec(int train, int val, std::uint64_t seed, int bmin, int bmax) {
  SyntheticSpec s;
  s.num_scenes = train;
  s.val_scenes = val;
  s.image_size = 64;
  s.buildings_min = bmin;
  s.buildings_max = bmax;
  s.seed = seed;
  return s;
}

TrainConfig train_config(Fusion f, LossKind loss, double lr, int epochs, std::uint64_t seed) {
  TrainConfig c;
  c.model.fusion = f;
  c.model.seed = seed;
  c.seed = seed;
  c.loss = loss;
  c.learning_rate = lr;
  c.epochs = epochs;
  return c;
}

struct Leg {
  TrainResult result;
  MetricsReport val;
  int first_collapse = 0;  // 0 = guard never fired
};

Leg run_leg(const TrainConfig& c, const std::vector<ImagePair>& tr, const std::vector<ImagePair>& va) {
  Leg leg{train(c, tr, va), {}, 0};
  leg.val = evaluate(leg.result.best, va, c.tile).report;
  for (const EpochRecord& e : leg.result.log)
    if (e.collapsed) {
      leg.first_collapse = e.epoch;
      break;
    }
  return leg;
}

// ---- 7 -------------------------------------------------------------------
Outcome overfit() {
  const SyntheticSpec spec = data_spec(8, 2, 1, 3, 6);
  const auto tr = fixtures::synthetic_pairs(spec, Split::train), va = fixtures::synthetic_pairs(spec, Split::val);
  const TrainConfig c = train_config(Fusion::feature_concat, LossKind::weighted_ce, 0.01, 200, 1);
  const TrainResult r = train(c, tr, va);
  const MetricsReport final_train = evaluate(r.last, tr, c.tile).report;
  const MetricsReport best_train = evaluate(r.best, tr, c.tile).report;
  return {final_train.damage_f1 >= 0.9 && !r.diverged,
          fmt("train damage F1 %.3f after %zu epochs (best-val checkpoint from epoch %d: %.3f)%s",
              final_train.damage_f1, r.log.size(), r.best_epoch, best_train.damage_f1,
              r.collapsed ? "; collapse guard fired" : "")};
}

// ---- 8 -------------------------------------------------------------------
Outcome fusion_claim() {
  std::vector<double> gaps, fc_scores, mono_scores;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const SyntheticSpec spec = data_spec(32, 8, seed, 4, 8);
    const auto tr = fixtures::synthetic_pairs(spec, Split::train), va = fixtures::synthetic_pairs(spec, Split::val);
    const Leg fc = run_leg(train_config(Fusion::feature_concat, LossKind::weighted_ce, 0.01, 60, seed), tr, va);
    const Leg mono = run_leg(train_config(Fusion::mono_post, LossKind::weighted_ce, 0.01, 60, seed), tr, va);
    fc_scores.push_back(fc.val.overall_f1);
    mono_scores.push_back(mono.val.overall_f1);
    gaps.push_back(fc.val.overall_f1 - mono.val.overall_f1);
    per_seed += fmt(" s%d %.3f/%.3f", static_cast<int>(seed), fc.val.overall_f1, mono.val.overall_f1);
    if (seed == 1) {
      std::string extra;
      bool completed = true;
      for (Fusion f : {Fusion::input_concat, Fusion::input_diff}) {
        const Leg leg = run_leg(train_config(f, LossKind::weighted_ce, 0.01, 60, seed), tr, va);
        completed = completed && !leg.result.diverged && leg.result.best_epoch > 0;
        extra += fmt(" %s %.3f", std::string(to_string(f)).c_str(), leg.val.overall_f1);
      }
      std::printf("      input-level legs (seed 1, val overall):%s%s\n", extra.c_str(),
                  completed ? "" : " [a leg did not complete]");
      if (!completed) return {false, "input-level fusion leg failed to complete"};
    }
  }
  const double g = median(gaps);
  return {g >= 0.3, fmt("median gap %.3f (limit 0.3); fc/mono val overall per seed:%s", g, per_seed.c_str())};
}

// ---- 9 -------------------------------------------------------------------
Outcome weighting_claim() {
  std::vector<double> margins;
  bool guard_ok = true;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    SyntheticSpec spec = data_spec(128, 16, seed, 4, 8);
    spec.class_mix = {50.0 / 53.0, 1.0 / 53.0, 1.0 / 53.0, 1.0 / 53.0};
    const auto tr = fixtures::synthetic_pairs(spec, Split::train), va = fixtures::synthetic_pairs(spec, Split::val);
    const Leg w = run_leg(train_config(Fusion::feature_concat, LossKind::weighted_ce, 0.003, 40, seed), tr, va);
    const Leg u = run_leg(train_config(Fusion::feature_concat, LossKind::ce, 0.003, 40, seed), tr, va);
    margins.push_back(w.val.damage_f1 - u.val.damage_f1);
    const bool delayed = w.first_collapse == 0 || (u.first_collapse != 0 && w.first_collapse > u.first_collapse);
    guard_ok = guard_ok && delayed;
    auto when = [](int e) { return e == 0 ? std::string("never") : "ep" + std::to_string(e); };
    per_seed += fmt(" s%d dmg %.3f/%.3f guard %s/%s", static_cast<int>(seed), w.val.damage_f1, u.val.damage_f1,
                    when(w.first_collapse).c_str(), when(u.first_collapse).c_str());
  }
  const double m = median(margins);
  return {m > 0.0 && guard_ok,
          fmt("median damage-F1 margin %.3f; weighted/uniform per seed:%s", m, per_seed.c_str())};
}

// ---- 10 ------------------------------------------------------------------
Outcome collapse_guard() {
  const fs::path dir = g_work / "collapse";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const SyntheticSpec spec = data_spec(8, 4, 1, 3, 6);
  generate_synthetic(spec, dir / "data");
  TrainConfig c = train_config(Fusion::feature_concat, LossKind::ce, 0.1, 20, 1);
  io::atomic_write(dir / "config.json", nlohmann::json(c).dump());
  commands::train(dir / "data", dir / "config.json", dir / "run", true);
  std::istringstream log(io::read_text(dir / "run" / "train_log.jsonl"));
  std::string line, last;
  int lines = 0;
  while (std::getline(log, line))
    if (!line.empty()) {
      last = line;
      ++lines;
    }
  const nlohmann::json rec = nlohmann::json::parse(last.empty() ? "{}" : last);
  const bool fired = rec.value("collapsed", false);
  return {fired && lines < c.epochs,
          fmt("lr %.2g: %d of %d epochs logged, final record collapsed=%s", c.learning_rate, lines, c.epochs,
              fired ? "true" : "false")};
}

// ---- 11 ------------------------------------------------------------------
Outcome determinism() {
  const fs::path dir = g_work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  generate_synthetic(data_spec(8, 2, 11, 3, 6), dir / "data");
  TrainConfig c = train_config(Fusion::feature_concat, LossKind::weighted_ce, 0.01, 15, 11);
  c.threads = 4;
  io::atomic_write(dir / "config.json", nlohmann::json(c).dump());
  std::vector<std::string> losses[2];
  std::string png_bytes[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path rd = dir / ("run" + std::to_string(run));
    commands::train(dir / "data", dir / "config.json", rd, true);
    std::istringstream log(io::read_text(rd / "train_log.jsonl"));
    for (std::string line; std::getline(log, line);)
      if (!line.empty()) losses[run].push_back(nlohmann::json::parse(line)["train_loss"].dump());
    commands::predict_split(rd / "checkpoint.xdmg", dir / "data", "val", rd / "pred");
    for (const auto& e : std::set<fs::path>(fs::directory_iterator(rd / "pred"), fs::directory_iterator()))
      png_bytes[run] += e.filename().string() + io::read_text(e);
  }
  const bool same_loss = !losses[0].empty() && losses[0] == losses[1];
  const bool same_png = !png_bytes[0].empty() && png_bytes[0] == png_bytes[1];
  return {same_loss && same_png, fmt("%zu epoch losses %s; prediction PNG bytes %s", losses[0].size(),
                                     same_loss ? "identical" : "DIFFER", same_png ? "identical" : "DIFFER")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xdmg acceptance suite"};
  std::string only, work = (fs::temp_directory_path() / "xdmg_acceptance").string();
  app.add_option("--only", only, "Comma-separated criterion ids");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  g_work = work;
  fs::create_directories(g_work);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');)
    if (!tok.empty()) selected.insert(std::stoi(tok));

  const std::vector<Criterion> criteria{
      {1, "metric identity", 1, metric_identity},
      {2, "damage F1 convention", 1, damage_convention},
      {3, "loss gradients", 10, gradient_check},
      {4, "siamese sharing", 10, siamese_sharing},
      {5, "tiling exactness", 10, tiling_exactness},
      {6, "rasterization oracle", 30, rasterization_oracle},
      {7, "overfit sanity", 600, overfit},
      {8, "fusion claim", 2700, fusion_claim},
      {9, "weighting claim", 2700, weighting_claim},
      {10, "collapse guard", 300, collapse_guard},
      {11, "determinism", 1200, determinism},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s [%2d] %-22s %s (%.1fs, limit %.0fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.limit_seconds, in_time ? "" : ", over time");
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
