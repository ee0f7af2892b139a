// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "xdmg/core_types.hpp"

namespace xdmg {

/// counts(i, j) = pixels with truth i predicted j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = kNumClasses);

  int num_classes() const noexcept { return k_; }
  std::uint64_t operator()(int truth, int pred) const { return counts_[static_cast<std::size_t>(truth) * k_ + pred]; }
  std::uint64_t& operator()(int truth, int pred) { return counts_[static_cast<std::size_t>(truth) * k_ + pred]; }
  std::uint64_t total() const noexcept;

  /// 2x2 building/background matrix from a 5-class one (rows/cols 1..4 summed).
  ConfusionMatrix collapse_to_localization() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int k_;
  std::vector<std::uint64_t> counts_;
};

/// Pixels where either mask is IGNORE are skipped.
ConfusionMatrix accumulate_confusion(const DamageMask& pred, const DamageMask& truth, int num_classes = kNumClasses);
ConfusionMatrix merge_confusion(const ConfusionMatrix& a, const ConfusionMatrix& b);

/// Per-class F1 with 0/0 resolving to 0.
std::vector<double> f1_per_class(const ConfusionMatrix& cm);

double localization_f1(const DamageMask& pred, const DamageMask& truth);
double localization_f1(const ConfusionMatrix& damage_cm);

inline constexpr double kDamageF1Floor = 1e-6;

/// Harmonic mean of the class 1..4 F1 values, each floored at kDamageF1Floor.
double damage_f1(const std::vector<double>& per_class_f1);

/// 0.3 * localization + 0.7 * damage.
double overall_f1(double localization, double damage);

struct MetricsReport {
  std::array<double, kNumClasses> per_class_f1{};
  double localization_f1 = 0.0;
  double damage_f1 = 0.0;
  double overall_f1 = 0.0;
};

MetricsReport make_report(const ConfusionMatrix& damage_cm);

nlohmann::json to_json(const MetricsReport& r);
std::string format_summary(const MetricsReport& r);

}  // namespace xdmg
