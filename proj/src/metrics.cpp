// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "xdmg/error.hpp"

namespace xdmg {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 2) throw UsageError("confusion matrix needs at least 2 classes");
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix ConfusionMatrix::collapse_to_localization() const {
  ConfusionMatrix out(2);
  for (int i = 0; i < k_; ++i)
    for (int j = 0; j < k_; ++j) out(i > 0 ? 1 : 0, j > 0 ? 1 : 0) += (*this)(i, j);
  return out;
}

ConfusionMatrix accumulate_confusion(const DamageMask& pred, const DamageMask& truth, int num_classes) {
  if (pred.height() != truth.height() || pred.width() != truth.width())
    throw UsageError("confusion: prediction " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                     " vs truth " + std::to_string(truth.height()) + "x" + std::to_string(truth.width()));
  ConfusionMatrix cm(num_classes);
  const auto& p = pred.labels();
  const auto& t = truth.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (t[i] == kIgnore || p[i] == kIgnore) continue;
    if (t[i] >= num_classes || p[i] >= num_classes)
      throw UsageError("confusion: label exceeds class count " + std::to_string(num_classes));
    ++cm(t[i], p[i]);
  }
  return cm;
}

ConfusionMatrix merge_confusion(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  if (a.num_classes() != b.num_classes())
    throw UsageError("cannot merge confusion matrices of " + std::to_string(a.num_classes()) + " and " +
                     std::to_string(b.num_classes()) + " classes");
  ConfusionMatrix out = a;
  for (int i = 0; i < a.num_classes(); ++i)
    for (int j = 0; j < a.num_classes(); ++j) out(i, j) += b(i, j);
  return out;
}

std::vector<double> f1_per_class(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  std::vector<double> f1(k, 0.0);
  for (int c = 0; c < k; ++c) {
    std::uint64_t tp = cm(c, c), fp = 0, fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm(o, c);
      fn += cm(c, o);
    }
    // 2PR/(P+R) == 2TP/(2TP+FP+FN); a zero denominator is the 0/0 case.
    const std::uint64_t denom = 2 * tp + fp + fn;
    f1[c] = denom == 0 || tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return f1;
}

double localization_f1(const ConfusionMatrix& damage_cm) {
  return f1_per_class(damage_cm.collapse_to_localization())[1];
}

double localization_f1(const DamageMask& pred, const DamageMask& truth) {
  return localization_f1(accumulate_confusion(pred, truth, kNumClasses));
}

double damage_f1(const std::vector<double>& per_class_f1) {
  if (per_class_f1.size() != kNumClasses) throw UsageError("damage_f1 expects 5 per-class values");
  double inv = 0.0;
  for (int c = 1; c < kNumClasses; ++c) inv += 1.0 / std::max(per_class_f1[c], kDamageF1Floor);
  return 4.0 / inv;
}

double overall_f1(double localization, double damage) { return 0.3 * localization + 0.7 * damage; }

MetricsReport make_report(const ConfusionMatrix& cm) {
  if (cm.num_classes() != kNumClasses) throw UsageError("metrics report needs a 5-class confusion matrix");
  MetricsReport r;
  const std::vector<double> f1 = f1_per_class(cm);
  std::copy(f1.begin(), f1.end(), r.per_class_f1.begin());
  r.localization_f1 = localization_f1(cm);
  r.damage_f1 = damage_f1(f1);
  r.overall_f1 = overall_f1(r.localization_f1, r.damage_f1);
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  return nlohmann::json{{"localization_f1", r.localization_f1},
                        {"damage_f1", r.damage_f1},
                        {"overall_f1", r.overall_f1},
                        {"per_class_f1", r.per_class_f1}};
}

std::string format_summary(const MetricsReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "overall %.4f / localization %.4f / damage %.4f", r.overall_f1, r.localization_f1,
                r.damage_f1);
  return buf;
}

}  // namespace xdmg
