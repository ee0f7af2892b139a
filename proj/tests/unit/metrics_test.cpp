// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <json.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "xdmg/error.hpp"
#include "xdmg/metrics.hpp"
#include "xdmg/model.hpp"

using namespace xdmg;

namespace {

bool matches(const ConfusionMatrix& cm, const std::vector<std::uint64_t>& ref) {
  const int k = cm.num_classes();
  for (int t = 0; t < k; ++t)
    for (int p = 0; p < k; ++p)
      if (cm(t, p) != ref[static_cast<std::size_t>(t) * k + p]) return false;
  return true;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("identical all-3 masks fill one cell") {
    const DamageMask m(4, 4, 3);
    const ConfusionMatrix cm = accumulate_confusion(m, m);
    CHECK(cm(3, 3) == 16);
    CHECK(cm.total() == 16);
  }

  TEST_CASE("swapped labels land off the diagonal") {
    const ConfusionMatrix cm = accumulate_confusion(DamageMask(1, 2, {1, 0}), DamageMask(1, 2, {0, 1}));
    CHECK(cm(0, 1) == 1);
    CHECK(cm(1, 0) == 1);
    CHECK(cm.total() == 2);
  }

  TEST_CASE("confusion matches a brute-force double loop") {
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
      const DamageMask p = oracle::random_mask(rng, 8, 8, true), t = oracle::random_mask(rng, 8, 8, true);
      CHECK(matches(accumulate_confusion(p, t), oracle::confusion(p, t, 5)));
    }
  }

  TEST_CASE("shape and class-count mismatches are rejected") {
    CHECK_THROWS_AS(accumulate_confusion(DamageMask(2, 2), DamageMask(2, 3)), UsageError);
    CHECK_THROWS_AS(merge_confusion(ConfusionMatrix(5), ConfusionMatrix(2)), UsageError);
    CHECK_THROWS_AS(accumulate_confusion(DamageMask(1, 1, 4), DamageMask(1, 1, 0), 2), UsageError);
  }

  TEST_CASE("merge is an entrywise sum with a zero identity") {
    Rng rng(2);
    const DamageMask p1 = oracle::random_mask(rng, 4, 4), t1 = oracle::random_mask(rng, 4, 4);
    const DamageMask p2 = oracle::random_mask(rng, 4, 4), t2 = oracle::random_mask(rng, 4, 4);
    const ConfusionMatrix a = accumulate_confusion(p1, t1), b = accumulate_confusion(p2, t2);
    CHECK(merge_confusion(a, ConfusionMatrix(5)) == a);
    CHECK(merge_confusion(a, b) == merge_confusion(b, a));
    const ConfusionMatrix m = merge_confusion(a, b);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) CHECK(m(i, j) == a(i, j) + b(i, j));
  }

  TEST_CASE("per-class F1 rules") {
    ConfusionMatrix diag(5);
    diag(0, 0) = 10;
    diag(2, 2) = 3;
    const auto f = f1_per_class(diag);
    CHECK(f[0] == 1.0);
    CHECK(f[2] == 1.0);
    CHECK(f[1] == 0.0);

    ConfusionMatrix half(5);
    half(1, 1) = 1;
    half(0, 1) = 1;
    half(1, 0) = 1;
    CHECK(f1_per_class(half)[1] == doctest::Approx(0.5));
  }

  TEST_CASE("localization F1") {
    Rng rng(3);
    DamageMask truth(6, 6, 0);
    truth.at(1, 1) = 2;
    truth.at(4, 3) = 4;
    CHECK(localization_f1(truth, truth) == 1.0);
    CHECK(localization_f1(DamageMask(6, 6, 0), truth) == 0.0);
    CHECK_THROWS_AS(localization_f1(DamageMask(6, 5), truth), UsageError);
    for (int i = 0; i < 20; ++i) {
      const DamageMask p = oracle::random_mask(rng, 8, 8, true), t = oracle::random_mask(rng, 8, 8, true);
      const ConfusionMatrix collapsed = accumulate_confusion(p, t).collapse_to_localization();
      CHECK(collapsed.num_classes() == 2);
      const double via_masks = localization_f1(p, t);
      CHECK(via_masks == f1_per_class(collapsed)[1]);
      CHECK(via_masks == localization_f1(accumulate_confusion(p, t)));
      const ConfusionMatrix binary = accumulate_confusion(derive_localization(p), derive_localization(t), 2);
      CHECK(binary == collapsed);
    }
  }

  TEST_CASE("damage F1 is the floored harmonic mean over classes 1-4") {
    CHECK(damage_f1({0.3, 1, 1, 1, 1}) == doctest::Approx(1.0));
    CHECK(damage_f1({0, 0.906, 0.493, 0.722, 0.837}) == doctest::Approx(0.700).epsilon(0.001 / 0.7));
    CHECK(damage_f1({1, 0, 1, 1, 1}) == doctest::Approx(4e-6).epsilon(1e-3));
    CHECK(damage_f1({1, 0.5, 0.5, 0.5, 0.5}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(damage_f1({1, 1, 1, 1}), UsageError);
  }

  TEST_CASE("overall F1 weights localization 0.3 and damage 0.7") {
    CHECK(std::abs(overall_f1(0.835, 0.697) - 0.7384) < 5e-4);
    CHECK(std::abs(overall_f1(0.705, 0.401) - 0.4922) < 5e-4);
    CHECK(overall_f1(1, 1) == doctest::Approx(1.0));
  }

  TEST_CASE("report fields stay consistent") {
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
      const ConfusionMatrix cm = accumulate_confusion(oracle::random_mask(rng, 8, 8), oracle::random_mask(rng, 8, 8));
      const MetricsReport r = make_report(cm);
      CHECK(std::abs(r.overall_f1 - (0.3 * r.localization_f1 + 0.7 * r.damage_f1)) <= 1e-12);
      for (double f : r.per_class_f1) {
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
      }
      CHECK(r.damage_f1 <= 1.0);
      const nlohmann::json j = to_json(r);
      CHECK(j["overall_f1"].get<double>() == r.overall_f1);
      CHECK(j["per_class_f1"].size() == 5);
    }
  }

  TEST_CASE("perfect prediction scores one everywhere") {
    Rng rng(5);
    const DamageMask t = oracle::random_mask(rng, 16, 16);
    const MetricsReport r = make_report(accumulate_confusion(t, t));
    CHECK(r.overall_f1 == doctest::Approx(1.0));
    CHECK(r.localization_f1 == 1.0);
    for (double f : r.per_class_f1) CHECK(f == 1.0);
  }
}
