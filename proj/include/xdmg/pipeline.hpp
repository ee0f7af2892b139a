// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xdmg/core_types.hpp"
#include "xdmg/loss.hpp"
#include "xdmg/metrics.hpp"
#include "xdmg/model.hpp"

namespace xdmg {

enum class LossKind { weighted_ce, ce, ordinal_ce };

LossKind parse_loss(std::string_view text);
std::string_view to_string(LossKind l) noexcept;

struct TrainConfig {
  ModelConfig model;
  int epochs = 50;
  int batch_size = 4;
  double learning_rate = 0.01;
  double momentum = 0.9;
  LossKind loss = LossKind::weighted_ce;
  bool tile = true;
  std::uint64_t seed = 0;  // batch shuffling
  double collapse_threshold = 0.001;
  // The guard arms once validation predictions reach the threshold, or
  // unconditionally after this many epochs.
  int collapse_warmup_epochs = 5;
  double frequency_floor = kDefaultFrequencyFloor;
  int threads = 1;  // per-sample gradient workers; results do not depend on it

  void validate() const;
};

/// Every field is optional in JSON; missing ones keep their defaults.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_localization_f1 = 0.0;
  double val_damage_f1 = 0.0;
  double val_overall_f1 = 0.0;
  bool collapsed = false;
  double val_building_fraction = 0.0;  // not serialized
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainResult {
  Model best;  // highest validation overall F1 (or last good parameters)
  std::vector<EpochRecord> log;
  ClassWeights weights;
  int best_epoch = 0;  // 0 = no validated epoch
  bool collapsed = false;
  bool diverged = false;
  std::string diverged_reason;
  Model last;  // parameters after the final completed epoch
};

/// True iff the fraction of predicted non-background pixels is < threshold.
bool detect_collapse(const std::vector<DamageMask>& predictions, double threshold);
double building_fraction(const std::vector<DamageMask>& predictions);

/// Quadrant tiling (when `tile`) around forward + argmax, merged back to scene size.
DamageMask predict_scene(const Model& model, const ImagePair& pair, bool tile);

struct Evaluation {
  ConfusionMatrix confusion;
  MetricsReport report;
  std::vector<DamageMask> predictions;  // in scene order
};

/// Pooled confusion over all scenes. Scenes without truth are rejected.
Evaluation evaluate(const Model& model, const std::vector<ImagePair>& scenes, bool tile, int threads = 1);
Evaluation evaluate(const Model& model, const DatasetIndex& index, bool tile, int threads = 1);

std::vector<ImagePair> load_split(const DatasetIndex& index);

/// Called after each epoch; returning false stops training.
using EpochObserver = std::function<bool(const EpochRecord&)>;

/// Momentum descent on quadrant tiles (or whole scenes), validating after
/// each epoch. Stops early when the collapse guard fires or the loss stops
/// being finite; the latter sets `diverged` instead of throwing.
TrainResult train(const TrainConfig& config, const std::vector<ImagePair>& train_scenes,
                  const std::vector<ImagePair>& val_scenes, const EpochObserver& observer = {});

/// Class weights a config implies for a training split.
ClassWeights resolve_weights(const TrainConfig& config, const std::vector<ImagePair>& train_scenes);

struct AblationRow {
  std::string config;
  Fusion fusion = Fusion::feature_concat;
  std::string weighting;  // "uniform" or "inverse-frequency"
  bool failed = false;
  std::string error;
  bool collapsed = false;
  MetricsReport metrics;
};

/// {mono-post, input-concat, input-diff, feature-concat} x {uniform, inverse-frequency}
/// with the base config's seeds. A failing leg is marked and the rest continue.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::vector<ImagePair>& train_scenes,
                                      const std::vector<ImagePair>& val_scenes);

/// CSV: config,fusion,weighting,loc_f1,dmg_f1,overall_f1
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace xdmg
