// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "xdmg/error.hpp"
#include "xdmg/ingest.hpp"

namespace xdmg {

void ClassFrequencies::add(const DamageMask& mask) {
  for (Label l : mask.labels()) {
    if (l == kIgnore) continue;
    ++counts[l];
    ++total;
  }
}

ClassFrequencies compute_class_frequencies(const DatasetIndex& index) {
  if (index.entries.empty()) throw DataError("cannot compute class frequencies of an empty split");
  ClassFrequencies f;
  for (const IndexEntry& e : index.entries) f.add(load_truth(e));
  return f;
}

ClassWeights inverse_frequency_weights(const ClassFrequencies& freq, double floor) {
  if (freq.total == 0) throw UsageError("class frequencies have zero total");
  ClassWeights w;
  double sum_present = 0.0;
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double f = std::max(static_cast<double>(freq.counts[c]) / static_cast<double>(freq.total), floor);
    w.weights[c] = 1.0 / f;
    if (freq.counts[c] > 0) {
      sum_present += w.weights[c];
      ++present;
    }
  }
  const double mean = sum_present / present;
  for (double& v : w.weights) v /= mean;
  return w;
}

namespace {

void check_shapes(const Logits& logits, const DamageMask& truth) {
  if (logits.height != truth.height() || logits.width != truth.width())
    throw UsageError("loss: logits are " + std::to_string(logits.height) + "x" + std::to_string(logits.width) +
                     " but truth is " + std::to_string(truth.height()) + "x" + std::to_string(truth.width()));
}

// log-softmax of one pixel's scores into `out`.
void log_softmax(const double* z, double* out) {
  double m = z[0];
  for (int k = 1; k < kNumClasses; ++k) m = std::max(m, z[k]);
  double s = 0.0;
  for (int k = 0; k < kNumClasses; ++k) s += std::exp(z[k] - m);
  const double lse = m + std::log(s);
  for (int k = 0; k < kNumClasses; ++k) out[k] = z[k] - lse;
}

int argmax(const double* z) {
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k)
    if (z[k] > z[best]) best = k;
  return best;
}

// Shared per-pixel loop: scale(y, z) gives the multiplier of −log p_y; the
// denominator gains denom(y) per pixel. Summation runs in pixel order.
template <typename Scale, typename Denom>
LossTerms scaled_ce_terms(const Logits& logits, const DamageMask& truth, Scale scale, Denom denom) {
  check_shapes(logits, truth);
  LossTerms t;
  t.numerator_gradient = Logits(logits.height, logits.width, 0.0);
  double lp[kNumClasses];
  for (std::size_t i = 0; i < logits.pixels(); ++i) {
    const Label y = truth.labels()[i];
    if (y == kIgnore) continue;
    const double* z = logits.values.data() + i * kNumClasses;
    log_softmax(z, lp);
    const double s = scale(y, z);
    t.numerator += -s * lp[y];
    t.denominator += denom(y);
    double* g = t.numerator_gradient.values.data() + i * kNumClasses;
    for (int k = 0; k < kNumClasses; ++k) g[k] = s * (std::exp(lp[k]) - (k == y ? 1.0 : 0.0));
  }
  return t;
}

LossValue finish(LossTerms t) {
  if (t.denominator <= 0.0) throw UsageError("loss undefined: every pixel is IGNORE");
  LossValue v;
  v.value = t.numerator / t.denominator;
  v.gradient = std::move(t.numerator_gradient);
  for (double& g : v.gradient.values) g /= t.denominator;
  return v;
}

}  // namespace

LossTerms weighted_cross_entropy_terms(const Logits& logits, const DamageMask& truth, const ClassWeights& weights) {
  const auto& w = weights.weights;
  return scaled_ce_terms(
      logits, truth, [&](Label y, const double*) { return w[y]; }, [&](Label y) { return w[y]; });
}

LossValue weighted_cross_entropy(const Logits& logits, const DamageMask& truth, const ClassWeights& weights) {
  return finish(weighted_cross_entropy_terms(logits, truth, weights));
}

LossTerms ordinal_cross_entropy_terms(const Logits& logits, const DamageMask& truth) {
  return scaled_ce_terms(
      logits, truth, [](Label y, const double* z) { return 1.0 + std::abs(argmax(z) - static_cast<int>(y)); },
      [](Label) { return 1.0; });
}

LossValue ordinal_cross_entropy(const Logits& logits, const DamageMask& truth) {
  return finish(ordinal_cross_entropy_terms(logits, truth));
}

}  // namespace xdmg
