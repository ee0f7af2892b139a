// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include "xdmg/core_types.hpp"
#include "xdmg/model.hpp"

namespace xdmg {

struct ClassFrequencies {
  std::array<std::uint64_t, kNumClasses> counts{};
  std::uint64_t total = 0;

  void add(const DamageMask& mask);
};

struct ClassWeights {
  std::array<double, kNumClasses> weights{1, 1, 1, 1, 1};

  static ClassWeights uniform() { return {}; }
};

/// Exact per-class pixel counts over every truth mask of the split.
ClassFrequencies compute_class_frequencies(const DatasetIndex& index);

inline constexpr double kDefaultFrequencyFloor = 1e-4;

/// w_c ∝ 1 / max(count_c / total, floor), scaled so the mean over classes
/// with a nonzero count is 1.
ClassWeights inverse_frequency_weights(const ClassFrequencies& freq, double floor = kDefaultFrequencyFloor);

struct LossValue {
  double value = 0.0;
  Logits gradient;  // dL/dlogits, same shape as the input
};

/// Unnormalized pieces of a mean-style loss: value = numerator / denominator.
/// Kept separate so several tiles can be reduced into one batch mean.
struct LossTerms {
  double numerator = 0.0;
  double denominator = 0.0;
  Logits numerator_gradient;  // d(numerator)/dlogits
};

/// Σ w_y·(−log softmax_y) / Σ w_y over non-IGNORE pixels.
LossTerms weighted_cross_entropy_terms(const Logits& logits, const DamageMask& truth, const ClassWeights& weights);
LossValue weighted_cross_entropy(const Logits& logits, const DamageMask& truth, const ClassWeights& weights);

/// Mean over non-IGNORE pixels of (1 + |argmax − y|)·(−log softmax_y); the
/// distance factor is held constant when differentiating.
LossTerms ordinal_cross_entropy_terms(const Logits& logits, const DamageMask& truth);
LossValue ordinal_cross_entropy(const Logits& logits, const DamageMask& truth);

}  // namespace xdmg
