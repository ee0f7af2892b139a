// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/xdmg.h"

#include <cstdlib>
#include <cstring>
#include <optional>
#include <string>

#include "xdmg/commands.hpp"
#include "xdmg/error.hpp"
#include "xdmg/metrics.hpp"
#include "xdmg/model.hpp"
#include "xdmg/pipeline.hpp"

struct xdmg_model {
  xdmg::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
xdmg_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return XDMG_OK;
  } catch (const xdmg::Error& e) {
    g_last_error = e.what();
    return static_cast<xdmg_status>(static_cast<int>(e.kind()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return XDMG_ERR_RUNTIME;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return XDMG_ERR_DATA;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return XDMG_ERR_RUNTIME;
  }
}

template <typename Fn>
xdmg_status run_command(char** summary, Fn&& fn) {
  if (summary) *summary = nullptr;
  return guarded([&] {
    std::string text = fn();
    if (summary) *summary = dup_string(text);
  });
}

const char* need(const char* arg, const char* what) {
  if (!arg || !*arg) throw xdmg::UsageError(std::string("missing required argument: ") + what);
  return arg;
}

std::optional<std::filesystem::path> opt_path(const char* p) {
  if (!p || !*p) return std::nullopt;
  return std::filesystem::path(p);
}

}  // namespace

extern "C" {

const char* xdmg_version(void) { return "1.0.0"; }

const char* xdmg_last_error(void) { return g_last_error.c_str(); }

void xdmg_free_string(char* s) { std::free(s); }

xdmg_status xdmg_synth(const char* spec_json_path, const char* out_dir, char** summary) {
  return run_command(summary, [&] { return xdmg::commands::synth(need(spec_json_path, "spec"), need(out_dir, "out")); });
}

xdmg_status xdmg_ingest(const char* data_root, const char* split, const char* truth_out_dir, char** summary) {
  return run_command(summary, [&] {
    return xdmg::commands::ingest(need(data_root, "data"), need(split, "split"), opt_path(truth_out_dir));
  });
}

xdmg_status xdmg_train(const char* data_root, const char* config_json_path, const char* run_dir, int single_thread,
                       char** summary) {
  return run_command(summary, [&] {
    return xdmg::commands::train(need(data_root, "data"), need(config_json_path, "config"), need(run_dir, "out"),
                                 single_thread != 0);
  });
}

xdmg_status xdmg_predict(const char* checkpoint_path, const char* pre_png, const char* post_png, const char* out_png,
                         char** summary) {
  return run_command(summary, [&] {
    return xdmg::commands::predict(need(checkpoint_path, "checkpoint"), opt_path(pre_png), need(post_png, "post"),
                                   need(out_png, "out"));
  });
}

xdmg_status xdmg_predict_split(const char* checkpoint_path, const char* data_root, const char* split,
                               const char* out_dir, char** summary) {
  return run_command(summary, [&] {
    return xdmg::commands::predict_split(need(checkpoint_path, "checkpoint"), need(data_root, "data"),
                                         need(split, "split"), need(out_dir, "out-dir"));
  });
}

xdmg_status xdmg_score(const char* pred_dir, const char* truth_dir, const char* out_json, char** summary) {
  return run_command(summary, [&] {
    return xdmg::commands::score(need(pred_dir, "pred"), need(truth_dir, "truth"), need(out_json, "out"));
  });
}

xdmg_status xdmg_ablate(const char* data_root, const char* config_json_path, const char* out_csv, int single_thread,
                        char** summary) {
  return run_command(summary, [&] {
    return xdmg::commands::ablate(need(data_root, "data"), need(config_json_path, "config"), need(out_csv, "out"),
                                  single_thread != 0);
  });
}

xdmg_status xdmg_model_load(const char* checkpoint_path, xdmg_model** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    if (!out) throw xdmg::UsageError("xdmg_model_load: null output handle");
    *out = new xdmg_model{xdmg::load_checkpoint(need(checkpoint_path, "checkpoint"))};
  });
}

void xdmg_model_free(xdmg_model* model) { delete model; }

const char* xdmg_model_fusion(const xdmg_model* model) {
  if (!model) return nullptr;
  return xdmg::to_string(model->checkpoint.model.config().fusion).data();
}

int xdmg_model_needs_pre(const xdmg_model* model) {
  return model && xdmg::needs_pre(model->checkpoint.model.config().fusion) ? 1 : 0;
}

size_t xdmg_model_parameter_count(const xdmg_model* model) {
  return model ? model->checkpoint.model.parameter_count() : 0;
}

xdmg_status xdmg_model_predict(const xdmg_model* model, const float* pre, const float* post, int height, int width,
                               uint8_t* labels_out) {
  return guarded([&] {
    if (!model || !post || !labels_out) throw xdmg::UsageError("xdmg_model_predict: null argument");
    if (height <= 0 || width <= 0) throw xdmg::UsageError("xdmg_model_predict: dimensions must be positive");
    const auto& m = model->checkpoint.model;
    if (xdmg::needs_pre(m.config().fusion) && !pre)
      throw xdmg::UsageError("model uses " + std::string(xdmg::to_string(m.config().fusion)) + " and needs a pre image");
    const std::size_t n = static_cast<std::size_t>(height) * width * 3;
    xdmg::ImagePair pair{"c-api", std::nullopt, xdmg::Image(height, width, std::vector<float>(post, post + n)),
                         std::nullopt};
    if (pre && xdmg::needs_pre(m.config().fusion)) pair.pre = xdmg::Image(height, width, std::vector<float>(pre, pre + n));
    const bool tile = model->checkpoint.metadata.value("tile", true);
    const int d = m.config().required_divisor() * (tile ? 2 : 1);
    if (height % d != 0 || width % d != 0)
      throw xdmg::DataError("image dimensions must be divisible by " + std::to_string(d));
    const xdmg::DamageMask mask = xdmg::predict_scene(m, pair, tile);
    std::memcpy(labels_out, mask.labels().data(), mask.size());
  });
}

xdmg_status xdmg_metrics_from_confusion(const uint64_t counts[25], double* localization_f1, double* damage_f1,
                                        double* overall_f1, double* per_class_f1) {
  return guarded([&] {
    if (!counts) throw xdmg::UsageError("xdmg_metrics_from_confusion: null counts");
    xdmg::ConfusionMatrix cm(xdmg::kNumClasses);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) cm(i, j) = counts[i * 5 + j];
    const xdmg::MetricsReport r = xdmg::make_report(cm);
    if (localization_f1) *localization_f1 = r.localization_f1;
    if (damage_f1) *damage_f1 = r.damage_f1;
    if (overall_f1) *overall_f1 = r.overall_f1;
    if (per_class_f1)
      for (int c = 0; c < 5; ++c) per_class_f1[c] = r.per_class_f1[c];
  });
}

}  // extern "C"
