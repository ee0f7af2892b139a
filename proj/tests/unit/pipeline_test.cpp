// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <sstream>
#include <string>

#include <json.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "xdmg/error.hpp"
#include "xdmg/pipeline.hpp"
#include "xdmg/tiling.hpp"

using namespace xdmg;

namespace {

SyntheticSpec small_data(std::uint64_t seed, int train = 4, int val = 2) {
  SyntheticSpec s;
  s.num_scenes = train;
  s.val_scenes = val;
  s.image_size = 32;
  s.seed = seed;
  return s;
}

TrainConfig small_train(Fusion f, int epochs) {
  TrainConfig c;
  c.model = fixtures::tiny_model(f, 1);
  c.epochs = epochs;
  c.batch_size = 2;
  c.seed = 1;
  return c;
}

DamageMask with_fraction(int n_building, int total) {
  DamageMask m(1, total, 0);
  for (int i = 0; i < n_building; ++i) m.at(0, i) = 2;
  return m;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("loss names round trip") {
    for (LossKind l : {LossKind::weighted_ce, LossKind::ce, LossKind::ordinal_ce}) CHECK(parse_loss(to_string(l)) == l);
    CHECK_THROWS_AS(parse_loss("focal"), UsageError);
  }

  TEST_CASE("train config validation and JSON") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = TrainConfig{};
    c.learning_rate = -1;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = TrainConfig{};
    c.momentum = 1.0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"epochs": 0})").get<TrainConfig>(), UsageError);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"loss": "dice"})").get<TrainConfig>(), UsageError);

    TrainConfig d = small_train(Fusion::input_concat, 7);
    d.loss = LossKind::ordinal_ce;
    const TrainConfig back = nlohmann::json(d).get<TrainConfig>();
    CHECK(back.model == d.model);
    CHECK(back.epochs == 7);
    CHECK(back.loss == LossKind::ordinal_ce);
    const TrainConfig partial = nlohmann::json::parse(R"({"epochs": 3})").get<TrainConfig>();
    CHECK(partial.epochs == 3);
    CHECK(partial.batch_size == TrainConfig{}.batch_size);
  }

  TEST_CASE("collapse detection uses a strict threshold") {
    CHECK(detect_collapse({DamageMask(4, 4, 0), DamageMask(2, 2, 0)}, 0.001));
    CHECK_FALSE(detect_collapse({with_fraction(50, 100)}, 0.001));
    CHECK_FALSE(detect_collapse({with_fraction(1, 1000)}, 0.001));
    CHECK(detect_collapse({with_fraction(1, 1001)}, 0.001));
    CHECK(building_fraction({with_fraction(1, 4), with_fraction(3, 4)}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(detect_collapse({}, 0.001), UsageError);
  }

  TEST_CASE("evaluation of an all-background predictor") {
    Model m = Model::init(fixtures::tiny_model(Fusion::mono_post, 2));
    for (Parameter& p : m.parameters())
      if (p.name.rfind("head.classifier", 0) == 0) std::fill(p.value.begin(), p.value.end(), 0.0f);
    for (Parameter& p : m.parameters())
      if (p.name == "head.classifier.bias") p.value[0] = 1.0f;
    const auto scenes = fixtures::synthetic_pairs(small_data(3), Split::train);
    const Evaluation ev = evaluate(m, scenes, true);
    CHECK(ev.report.localization_f1 == 0.0);
    CHECK(ev.predictions.size() == scenes.size());
    CHECK(detect_collapse(ev.predictions, 0.001));
    std::vector<ImagePair> no_truth = scenes;
    no_truth[1].truth.reset();
    CHECK_THROWS_AS(evaluate(m, no_truth, true), DataError);
  }

  TEST_CASE("per-tile confusion matrices merge to the scene matrix") {
    const Model m = Model::init(fixtures::tiny_model(Fusion::feature_concat, 4));
    const auto scenes = fixtures::synthetic_pairs(small_data(5), Split::val);
    for (const ImagePair& s : scenes) {
      const DamageMask pred = predict_scene(m, s, true);
      const TileSet<DamageMask> pt = split_quadrants(pred), tt = split_quadrants(*s.truth);
      ConfusionMatrix merged(5);
      for (int q = 0; q < 4; ++q) merged = merge_confusion(merged, accumulate_confusion(pt.tiles[q], tt.tiles[q]));
      CHECK(merged == accumulate_confusion(pred, *s.truth));
      CHECK(evaluate(m, {s}, true).confusion == merged);
    }
  }

  TEST_CASE("weights follow the loss kind") {
    const auto scenes = fixtures::synthetic_pairs(small_data(6), Split::train);
    TrainConfig c;
    c.loss = LossKind::ce;
    CHECK(resolve_weights(c, scenes).weights == ClassWeights::uniform().weights);
    c.loss = LossKind::weighted_ce;
    const ClassWeights w = resolve_weights(c, scenes);
    CHECK(w.weights[0] < w.weights[1]);
  }

  TEST_CASE("training is reproducible and thread-count independent") {
    const auto tr = fixtures::synthetic_pairs(small_data(7), Split::train);
    const auto va = fixtures::synthetic_pairs(small_data(7), Split::val);
    TrainConfig c = small_train(Fusion::feature_concat, 3);
    c.collapse_threshold = 0.0;
    const TrainResult a = train(c, tr, va);
    const TrainResult b = train(c, tr, va);
    c.threads = 3;
    const TrainResult t = train(c, tr, va);
    REQUIRE(a.log.size() == 3);
    REQUIRE(t.log.size() == 3);
    for (std::size_t i = 0; i < a.log.size(); ++i) {
      CHECK(a.log[i].train_loss == b.log[i].train_loss);
      CHECK(a.log[i].train_loss == t.log[i].train_loss);
      CHECK(std::isfinite(a.log[i].train_loss));
    }
    CHECK(a.best_epoch >= 1);
    CHECK(a.last.parameters()[0].value == t.last.parameters()[0].value);
    CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));
  }

  TEST_CASE("observer can stop training early") {
    const auto tr = fixtures::synthetic_pairs(small_data(8, 2, 1), Split::train);
    const auto va = fixtures::synthetic_pairs(small_data(8, 2, 1), Split::val);
    int calls = 0;
    const TrainResult r = train(small_train(Fusion::mono_post, 10), tr, va, [&](const EpochRecord&) {
      ++calls;
      return calls < 2;
    });
    CHECK(r.log.size() == 2);
    const nlohmann::json j = to_json(r.log.front());
    CHECK(j["epoch"] == 1);
    CHECK(j.contains("train_loss"));
    CHECK(j["collapsed"] == false);
  }

  TEST_CASE("empty splits are rejected") {
    const auto tr = fixtures::synthetic_pairs(small_data(9, 2, 1), Split::train);
    CHECK_THROWS_AS(train(small_train(Fusion::mono_post, 1), {}, tr), DataError);
    CHECK_THROWS_AS(train(small_train(Fusion::mono_post, 1), tr, {}), DataError);
  }

  TEST_CASE("divergence is flagged without throwing") {
    const auto tr = fixtures::synthetic_pairs(small_data(10, 2, 1), Split::train);
    const auto va = fixtures::synthetic_pairs(small_data(10, 2, 1), Split::val);
    TrainConfig c = small_train(Fusion::feature_concat, 5);
    c.learning_rate = 1e8;
    c.collapse_threshold = 0.0;
    const TrainResult r = train(c, tr, va);
    CHECK(r.diverged);
    CHECK_FALSE(r.diverged_reason.empty());
    for (const Parameter& p : r.best.parameters())
      for (float v : p.value) REQUIRE(std::isfinite(v));
  }

  TEST_CASE("ablation covers every fusion and weighting and repeats exactly") {
    const auto tr = fixtures::synthetic_pairs(small_data(11, 2, 1), Split::train);
    const auto va = fixtures::synthetic_pairs(small_data(11, 2, 1), Split::val);
    TrainConfig c = small_train(Fusion::feature_concat, 1);
    const auto rows = run_ablation(c, tr, va);
    REQUIRE(rows.size() == 8);
    int weighted = 0;
    for (const AblationRow& r : rows) {
      CHECK_FALSE(r.failed);
      weighted += r.weighting == "inverse-frequency";
    }
    CHECK(weighted == 4);
    const std::string csv = ablation_csv(rows);
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "config,fusion,weighting,loc_f1,dmg_f1,overall_f1");
    CHECK(csv == ablation_csv(run_ablation(c, tr, va)));
  }
}
