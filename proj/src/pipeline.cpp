// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <thread>

#include "xdmg/error.hpp"
#include "xdmg/ingest.hpp"
#include "xdmg/rng.hpp"
#include "xdmg/tiling.hpp"

namespace xdmg {

using nlohmann::json;

LossKind parse_loss(std::string_view text) {
  if (text == "weighted-ce") return LossKind::weighted_ce;
  if (text == "ce") return LossKind::ce;
  if (text == "ordinal-ce") return LossKind::ordinal_ce;
  throw UsageError("unknown loss '" + std::string(text) + "' (expected weighted-ce, ce or ordinal-ce)");
}

std::string_view to_string(LossKind l) noexcept {
  switch (l) {
    case LossKind::weighted_ce: return "weighted-ce";
    case LossKind::ce: return "ce";
    case LossKind::ordinal_ce: return "ordinal-ce";
  }
  return "weighted-ce";
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs <= 0) throw UsageError("epochs must be positive");
  if (batch_size <= 0) throw UsageError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw UsageError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must lie in [0,1)");
  if (!(collapse_threshold >= 0.0 && collapse_threshold <= 1.0))
    throw UsageError("collapse_threshold must lie in [0,1]");
  if (!(frequency_floor > 0.0 && frequency_floor <= 1.0)) throw UsageError("frequency_floor must lie in (0,1]");
  if (threads < 0) throw UsageError("threads must be non-negative");
  if (collapse_warmup_epochs < 0) throw UsageError("collapse_warmup_epochs must be non-negative");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"model", c.model},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"momentum", c.momentum},
           {"loss", std::string(to_string(c.loss))},
           {"tile", c.tile},
           {"seed", c.seed},
           {"collapse_threshold", c.collapse_threshold},
           {"collapse_warmup_epochs", c.collapse_warmup_epochs},
           {"frequency_floor", c.frequency_floor},
           {"threads", c.threads}};
}

void from_json(const json& j, TrainConfig& c) {
  if (!j.is_object()) throw UsageError("train config must be a JSON object");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("learning_rate", c.learning_rate);
    get("momentum", c.momentum);
    if (j.contains("loss")) c.loss = parse_loss(j.at("loss").get<std::string>());
    get("tile", c.tile);
    get("seed", c.seed);
    get("collapse_threshold", c.collapse_threshold);
    get("collapse_warmup_epochs", c.collapse_warmup_epochs);
    get("frequency_floor", c.frequency_floor);
    get("threads", c.threads);
  } catch (const json::exception& e) {
    throw UsageError(std::string("train config: ") + e.what());
  }
  c.validate();
}

json to_json(const EpochRecord& r) {
  return json{{"epoch", r.epoch},
              {"train_loss", r.train_loss},
              {"val_localization_f1", r.val_localization_f1},
              {"val_damage_f1", r.val_damage_f1},
              {"val_overall_f1", r.val_overall_f1},
              {"collapsed", r.collapsed}};
}

namespace {

std::pair<std::uint64_t, std::uint64_t> building_pixels(const std::vector<DamageMask>& predictions) {
  if (predictions.empty()) throw UsageError("collapse check needs at least one prediction");
  std::uint64_t building = 0, total = 0;
  for (const DamageMask& m : predictions)
    for (Label l : m.labels()) {
      building += (l != 0 && l != kIgnore);
      ++total;
    }
  return {building, total};
}

}  // namespace

bool detect_collapse(const std::vector<DamageMask>& predictions, double threshold) {
  const auto [building, total] = building_pixels(predictions);
  return static_cast<double>(building) < threshold * static_cast<double>(total);
}

double building_fraction(const std::vector<DamageMask>& predictions) {
  const auto [building, total] = building_pixels(predictions);
  return static_cast<double>(building) / static_cast<double>(total);
}

namespace {

int worker_count(int threads) {
  if (threads == 0) return std::max(1u, std::thread::hardware_concurrency());
  return threads;
}

// Runs fn(i) for i in [0, n) over `threads` workers with a static
// round-robin assignment. Callers write only to per-index slots.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const int w = std::min<int>(worker_count(threads), static_cast<int>(n));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (int t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<ImagePair> tiles_of(const ImagePair& pair) {
  const auto post = split_quadrants(pair.post);
  std::optional<TileSet<Image>> pre;
  if (pair.pre) pre = split_quadrants(*pair.pre);
  std::optional<TileSet<DamageMask>> truth;
  if (pair.truth) truth = split_quadrants(*pair.truth);
  std::vector<ImagePair> out;
  for (int q = 0; q < 4; ++q) {
    ImagePair t{pair.scene_id + "#q" + std::to_string(q), std::nullopt, post.tiles[q], std::nullopt};
    if (pre) t.pre = pre->tiles[q];
    if (truth) t.truth = truth->tiles[q];
    out.push_back(std::move(t));
  }
  return out;
}

bool all_finite(const Gradients& g) {
  for (const auto& v : g)
    for (float x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

DamageMask predict_scene(const Model& model, const ImagePair& pair, bool tile) {
  if (!tile) return predict(model.forward(pair));
  const std::vector<ImagePair> tiles = tiles_of(pair);
  TileSet<DamageMask> masks{{predict(model.forward(tiles[0])), predict(model.forward(tiles[1])),
                             predict(model.forward(tiles[2])), predict(model.forward(tiles[3]))},
                            pair.post.height(),
                            pair.post.width()};
  return merge_quadrants(masks);
}

Evaluation evaluate(const Model& model, const std::vector<ImagePair>& scenes, bool tile, int threads) {
  for (const ImagePair& s : scenes)
    if (!s.truth) throw DataError("scene '" + s.scene_id + "' has no truth mask to score against");
  std::vector<std::optional<DamageMask>> preds(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) { preds[i] = predict_scene(model, scenes[i], tile); });
  Evaluation ev{ConfusionMatrix(kNumClasses), {}, {}};
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    ev.confusion = merge_confusion(ev.confusion, accumulate_confusion(*preds[i], *scenes[i].truth));
    ev.predictions.push_back(std::move(*preds[i]));
  }
  ev.report = make_report(ev.confusion);
  return ev;
}

std::vector<ImagePair> load_split(const DatasetIndex& index) {
  std::vector<ImagePair> out;
  out.reserve(index.entries.size());
  for (const IndexEntry& e : index.entries) out.push_back(load_pair(index, e.scene_id));
  return out;
}

Evaluation evaluate(const Model& model, const DatasetIndex& index, bool tile, int threads) {
  return evaluate(model, load_split(index), tile, threads);
}

ClassWeights resolve_weights(const TrainConfig& config, const std::vector<ImagePair>& train_scenes) {
  if (config.loss != LossKind::weighted_ce) return ClassWeights::uniform();
  ClassFrequencies freq;
  for (const ImagePair& p : train_scenes)
    if (p.truth) freq.add(*p.truth);
  return inverse_frequency_weights(freq, config.frequency_floor);
}

TrainResult train(const TrainConfig& config, const std::vector<ImagePair>& train_scenes,
                  const std::vector<ImagePair>& val_scenes, const EpochObserver& observer) {
  config.validate();
  if (train_scenes.empty()) throw DataError("training split is empty");
  if (val_scenes.empty()) throw DataError("validation split is empty");
  for (const ImagePair& p : train_scenes)
    if (!p.truth) throw DataError("training scene '" + p.scene_id + "' has no truth mask");

  Model model = Model::init(config.model);
  TrainResult result{model, {}, resolve_weights(config, train_scenes), 0, false, false, {}, model};

  std::vector<ImagePair> samples;
  for (const ImagePair& p : train_scenes) {
    if (config.tile) {
      for (ImagePair& t : tiles_of(p)) samples.push_back(std::move(t));
    } else {
      samples.push_back(p);
    }
  }

  auto loss_terms = [&](const Logits& logits, const DamageMask& truth) {
    if (config.loss == LossKind::ordinal_ce) return ordinal_cross_entropy_terms(logits, truth);
    return weighted_cross_entropy_terms(logits, truth, result.weights);
  };

  Rng rng(config.seed);
  Gradients velocity = model.zero_gradients();
  Gradients step_grad = model.zero_gradients();
  std::vector<Gradients> slot_grads(static_cast<std::size_t>(config.batch_size));
  std::vector<double> slot_num(config.batch_size), slot_den(config.batch_size);
  for (auto& g : slot_grads) g = model.zero_gradients();
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double best_overall = -1.0;
  bool guard_armed = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, order.size() - start);
      parallel_for(count, config.threads, [&](std::size_t k) {
        const ImagePair& s = samples[order[start + k]];
        for (auto& v : slot_grads[k]) std::fill(v.begin(), v.end(), 0.0f);
        ForwardCache cache;
        const Logits logits = model.forward(s, cache);
        const LossTerms terms = loss_terms(logits, *s.truth);
        slot_num[k] = terms.numerator;
        slot_den[k] = terms.denominator;
        if (terms.denominator > 0.0) model.backward(cache, terms.numerator_gradient, slot_grads[k]);
      });
      double num = 0.0, den = 0.0;
      for (auto& v : step_grad) std::fill(v.begin(), v.end(), 0.0f);
      for (std::size_t k = 0; k < count; ++k) {
        num += slot_num[k];
        den += slot_den[k];
        for (std::size_t p = 0; p < step_grad.size(); ++p)
          for (std::size_t i = 0; i < step_grad[p].size(); ++i) step_grad[p][i] += slot_grads[k][p][i];
      }
      if (den <= 0.0) continue;  // batch of all-IGNORE tiles
      const double batch_loss = num / den;
      if (!std::isfinite(batch_loss) || !all_finite(step_grad)) {
        result.diverged = true;
        result.diverged_reason = "non-finite loss or gradient at epoch " + std::to_string(epoch);
        break;
      }
      const float inv = static_cast<float>(1.0 / den);
      const float lr = static_cast<float>(config.learning_rate), mu = static_cast<float>(config.momentum);
      auto& params = model.parameters();
      for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t i = 0; i < params[p].value.size(); ++i) {
          velocity[p][i] = mu * velocity[p][i] + step_grad[p][i] * inv;
          params[p].value[i] -= lr * velocity[p][i];
        }
      loss_sum += batch_loss;
      ++batches;
    }
    if (result.diverged) break;

    Evaluation ev = evaluate(model, val_scenes, config.tile, config.threads);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / batches : 0.0;
    rec.val_localization_f1 = ev.report.localization_f1;
    rec.val_damage_f1 = ev.report.damage_f1;
    rec.val_overall_f1 = ev.report.overall_f1;
    rec.val_building_fraction = building_fraction(ev.predictions);
    const bool below = detect_collapse(ev.predictions, config.collapse_threshold);
    rec.collapsed = below && (guard_armed || epoch > config.collapse_warmup_epochs);
    guard_armed = guard_armed || !below;
    bool parameters_finite = true;
    for (const auto& p : model.parameters())
      for (float v : p.value) parameters_finite = parameters_finite && std::isfinite(v);
    if (!parameters_finite) {
      result.diverged = true;
      result.diverged_reason = "non-finite parameters after epoch " + std::to_string(epoch);
      break;
    }
    result.log.push_back(rec);
    result.last = model;
    if (rec.val_overall_f1 > best_overall) {
      best_overall = rec.val_overall_f1;
      result.best = model;
      result.best_epoch = epoch;
    }
    if (rec.collapsed) {
      result.collapsed = true;
      break;
    }
    if (observer && !observer(rec)) break;
  }
  return result;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::vector<ImagePair>& train_scenes,
                                      const std::vector<ImagePair>& val_scenes) {
  base.validate();
  std::vector<AblationRow> rows;
  for (Fusion f : {Fusion::mono_post, Fusion::input_concat, Fusion::input_diff, Fusion::feature_concat}) {
    for (LossKind loss : {LossKind::ce, LossKind::weighted_ce}) {
      AblationRow row;
      row.fusion = f;
      row.weighting = loss == LossKind::ce ? "uniform" : "inverse-frequency";
      row.config = std::string(to_string(f)) + "/" + row.weighting;
      try {
        TrainConfig cfg = base;
        cfg.model.fusion = f;
        cfg.loss = loss;
        TrainResult tr = train(cfg, train_scenes, val_scenes);
        if (tr.diverged && tr.best_epoch == 0) throw RuntimeFailure(tr.diverged_reason);
        row.collapsed = tr.collapsed;
        row.metrics = evaluate(tr.best, val_scenes, cfg.tile, cfg.threads).report;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "config,fusion,weighting,loc_f1,dmg_f1,overall_f1\n";
  char buf[256];
  for (const AblationRow& r : rows) {
    if (r.failed) {
      std::snprintf(buf, sizeof buf, "%s,%s,%s,failed,failed,failed\n", r.config.c_str(),
                    std::string(to_string(r.fusion)).c_str(), r.weighting.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6f,%.6f,%.6f\n", r.config.c_str(),
                    std::string(to_string(r.fusion)).c_str(), r.weighting.c_str(), r.metrics.localization_f1,
                    r.metrics.damage_f1, r.metrics.overall_f1);
    }
    out += buf;
  }
  return out;
}

}  // namespace xdmg
