//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "shiftkit/setloss.hpp"
#include "shiftkit/util.hpp"
#include "oracles.hpp"

using namespace shiftkit;

namespace {

std::vector<LossKind> convex_kinds() {
  return {LossKind::mae(), LossKind::mse(), LossKind::huber(0.1), LossKind::huber(1.0),
          LossKind::huber(10.0)};
}

std::vector<double> random_values(Rng &rng, std::size_t n, double lo = -300.0, double hi = 300.0) {
  std::vector<double> v(n);
  for (double &x : v)
    x = rng.uniform(lo, hi);
  return v;
}

} // namespace

TEST_CASE("pointwise losses") {
  CHECK(pointwise(LossKind::mse(), 1.0, 3.0) == 4.0);
  CHECK(pointwise(LossKind::huber(1.0), 0.0, 0.5) == 0.125);
  CHECK(pointwise(LossKind::huber(1.0), 0.0, 3.0) == 2.5);
  CHECK(pointwise(LossKind::mae(), -2.0, 3.0) == 5.0);
  CHECK(pointwise(LossKind::sqrt_test(), 0.0, 4.0) == 2.0);
}

TEST_CASE("atom_loss basics") {
  CHECK(atom_loss(LossKind::mae(), {1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(atom_loss(LossKind::mae(), {1.0, 2.0}, {2.0, 4.0}) == 3.0);
  CHECK(atom_loss(LossKind::mse(), {0.0}, {3.0}) == 9.0);
  CHECK_THROWS_AS(atom_loss(LossKind::mae(), {1.0}, {1.0, 2.0}), LossError);
}

TEST_CASE("hungarian_loss on the pinned instances") {
  auto identical = hungarian_loss(LossKind::mae(), {1.0, 2.0}, {2.0, 1.0});
  CHECK(identical.loss == 0.0);

  auto shifted = hungarian_loss(LossKind::mae(), {0.0, 1.0}, {1.0, 2.0});
  CHECK(shifted.loss == 2.0);

  // Concave cost: the crossed matching (0->2, 1->1) wins with sqrt(2),
  // strictly below the sorted matching's 2. Convexity is necessary.
  auto concave = hungarian_loss(LossKind::sqrt_test(), {0.0, 1.0}, {1.0, 2.0});
  CHECK(concave.loss == Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(concave.assignment == std::vector<int>{1, 0});
  auto concave_sorted = sorted_loss(LossKind::sqrt_test(), {0.0, 1.0}, {1.0, 2.0});
  CHECK(concave_sorted.loss == 2.0);
  CHECK(concave_sorted.loss - concave.loss > 0.58);
}

TEST_CASE("sorted_loss basics") {
  CHECK(sorted_loss(LossKind::mse(), {3.0, 1.0}, {1.0, 3.0}).loss == 0.0);
  auto r = sorted_loss(LossKind::mae(), {0.0, 10.0}, {1.0, 9.0});
  CHECK(r.loss == 2.0);
  CHECK(r.assignment == std::vector<int>{0, 1});
  CHECK(r.grad == std::vector<double>{-1.0, 1.0});
}

TEST_CASE("brute force oracle basics") {
  CHECK(brute_force_loss(LossKind::mae(), {5.0}, {5.0}) == 0.0);
  CHECK(brute_force_loss(LossKind::mse(), {0.0}, {3.0}) == 9.0);
  std::vector<double> nine(9, 0.0);
  CHECK_THROWS_AS(brute_force_loss(LossKind::mae(), nine, nine), LossError);
}

TEST_CASE("sorted == hungarian == brute force for convex kinds") {
  Rng rng(123456);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 7));
    auto preds = random_values(rng, n);
    auto targets = random_values(rng, n);
    for (const LossKind &kind : convex_kinds()) {
      const double hung = hungarian_loss(kind, preds, targets).loss;
      const double sort = sorted_loss(kind, preds, targets).loss;
      const double brute = brute_force_loss(kind, preds, targets);
      const double tol = 1e-9 * std::max(1.0, hung);
      CHECK(std::abs(sort - hung) <= tol);
      CHECK(std::abs(sort - brute) <= tol);
    }
  }
}

TEST_CASE("matching losses are permutation invariant") {
  Rng rng(777);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 12));
    auto preds = random_values(rng, n);
    auto targets = random_values(rng, n);
    const double ref_sorted = sorted_loss(LossKind::mae(), preds, targets).loss;
    const double ref_hung = hungarian_loss(LossKind::mse(), preds, targets).loss;
    auto preds_shuffled = preds;
    auto targets_shuffled = targets;
    rng.shuffle(preds_shuffled);
    rng.shuffle(targets_shuffled);
    CHECK(sorted_loss(LossKind::mae(), preds_shuffled, targets_shuffled).loss ==
          Catch::Approx(ref_sorted).margin(1e-9));
    CHECK(hungarian_loss(LossKind::mse(), preds_shuffled, targets_shuffled).loss ==
          Catch::Approx(ref_hung).margin(1e-9));
  }
}

TEST_CASE("hungarian is a lower bound over explicit permutations") {
  Rng rng(2024);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 10));
    auto preds = random_values(rng, n);
    auto targets = random_values(rng, n);
    for (const LossKind &kind : {LossKind::mae(), LossKind::mse(), LossKind::huber(1.0)}) {
      const double best = hungarian_loss(kind, preds, targets).loss;
      for (int p = 0; p < 100; ++p) {
        std::vector<int> perm(n);
        for (std::size_t i = 0; i < n; ++i)
          perm[i] = static_cast<int>(i);
        rng.shuffle(perm);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          total += pointwise(kind, preds[i], targets[static_cast<std::size_t>(perm[i])]);
        CHECK(best <= total + 1e-9 * std::max(1.0, total));
      }
    }
  }
}

TEST_CASE("exchange inequality on random quadruples") {
  Rng rng(31337);
  for (int iter = 0; iter < 20000; ++iter) {
    double x1 = rng.uniform(-300.0, 300.0);
    double x2 = rng.uniform(-300.0, 300.0);
    double y1 = rng.uniform(-300.0, 300.0);
    double y2 = rng.uniform(-300.0, 300.0);
    if (x1 > x2)
      std::swap(x1, x2);
    if (y1 > y2)
      std::swap(y1, y2);
    for (const LossKind &kind : convex_kinds()) {
      const double straight = pointwise(kind, x1, y1) + pointwise(kind, x2, y2);
      const double crossed = pointwise(kind, x1, y2) + pointwise(kind, x2, y1);
      CHECK(straight <= crossed + 1e-9 * std::max(1.0, crossed));
    }
  }
}

TEST_CASE("assignment is a bijection and loss vanishes iff multisets match") {
  Rng rng(5150);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 15));
    auto preds = random_values(rng, n);
    auto targets = random_values(rng, n);
    for (auto result : {sorted_loss(LossKind::mae(), preds, targets),
                        hungarian_loss(LossKind::mae(), preds, targets)}) {
      std::vector<bool> hit(n, false);
      for (int t : result.assignment) {
        REQUIRE(t >= 0);
        REQUIRE(static_cast<std::size_t>(t) < n);
        CHECK_FALSE(hit[static_cast<std::size_t>(t)]);
        hit[static_cast<std::size_t>(t)] = true;
      }
      CHECK(result.loss >= 0.0);
    }
    // identical multisets, scrambled
    auto scrambled = preds;
    rng.shuffle(scrambled);
    CHECK(sorted_loss(LossKind::mse(), preds, scrambled).loss == 0.0);
  }
}

TEST_CASE("atom_loss dominates sorted_loss") {
  Rng rng(808);
  for (int iter = 0; iter < 500; ++iter) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 12));
    auto preds = random_values(rng, n);
    auto targets = random_values(rng, n);
    for (const LossKind &kind : convex_kinds())
      CHECK(sorted_loss(kind, preds, targets).loss <=
            atom_loss(kind, preds, targets) + 1e-12);
  }
}

TEST_CASE("sorted_loss gradient matches central differences away from ties") {
  Rng rng(424242);
  int checked = 0;
  while (checked < 100) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 10));
    auto preds = random_values(rng, n, -50.0, 50.0);
    auto targets = random_values(rng, n, -50.0, 50.0);
    // enforce a comfortable tie gap within and across the two sets
    auto min_gap = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      double gap = std::numeric_limits<double>::infinity();
      for (std::size_t i = 1; i < v.size(); ++i)
        gap = std::min(gap, v[i] - v[i - 1]);
      return gap;
    };
    std::vector<double> merged = preds;
    merged.insert(merged.end(), targets.begin(), targets.end());
    if (min_gap(merged) < 1e-3)
      continue;
    ++checked;
    for (const LossKind &kind : {LossKind::mae(), LossKind::mse(), LossKind::huber(1.0)}) {
      auto res = sorted_loss(kind, preds, targets);
      for (std::size_t i = 0; i < n; ++i) {
        auto loss_at = [&](double x) {
          auto p = preds;
          p[i] = x;
          return sorted_loss(kind, p, targets).loss;
        };
        const double fd = oracle::central_difference(loss_at, preds[i]);
        CHECK(std::abs(res.grad[i] - fd) < 1e-5);
      }
    }
  }
}

TEST_CASE("mse sorted_loss gradient is a true gradient of the min (Danskin)") {
  Rng rng(90210);
  int checked = 0;
  while (checked < 50) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 8));
    auto preds = random_values(rng, n, -50.0, 50.0);
    auto targets = random_values(rng, n, -50.0, 50.0);
    std::vector<double> merged = preds;
    merged.insert(merged.end(), targets.begin(), targets.end());
    std::sort(merged.begin(), merged.end());
    bool gapped = true;
    for (std::size_t i = 1; i < merged.size(); ++i)
      gapped = gapped && merged[i] - merged[i - 1] > 1e-3;
    if (!gapped)
      continue;
    ++checked;
    auto base = sorted_loss(LossKind::mse(), preds, targets);
    const double h = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
      for (double sign : {-1.0, 1.0}) {
        auto p = preds;
        p[i] += sign * h;
        // perturbing within the gap never changes the optimal matching
        CHECK(sorted_loss(LossKind::mse(), p, targets).assignment == base.assignment);
      }
      auto loss_at = [&](double x) {
        auto p = preds;
        p[i] = x;
        return hungarian_loss(LossKind::mse(), p, targets).loss;
      };
      const double fd = oracle::central_difference(loss_at, preds[i]);
      CHECK(std::abs(base.grad[i] - fd) < 1e-5);
    }
  }
}

TEST_CASE("batch_loss composition") {
  // lambda = 0: total equals the supervised part alone
  BatchLoss only_sup = batch_loss(LossKind::mae(), {{{1.0}, {2.0}}}, {{{0.0}, {3.0}}}, 0.0);
  CHECK(only_sup.total == only_sup.supervised);
  CHECK(only_sup.supervised == 1.0);
  CHECK(only_sup.weak == 3.0);

  // one labeled molecule ([1] vs [2], MAE, N1=1) + one weak ({0} vs {3}, N2=1)
  BatchLoss both = batch_loss(LossKind::mae(), {{{1.0}, {2.0}}}, {{{0.0}, {3.0}}}, 1.0);
  CHECK(both.total == 4.0);

  // lambda scaling: 1 + 16 * 0.5 = 9
  BatchLoss scaled = batch_loss(LossKind::mae(), {{{1.0}, {2.0}}}, {{{0.0}, {0.5}}}, 16.0);
  CHECK(scaled.supervised == 1.0);
  CHECK(scaled.weak == 0.5);
  CHECK(scaled.total == 9.0);

  // empty streams are flagged and contribute zero
  BatchLoss no_weak = batch_loss(LossKind::mae(), {{{1.0}, {2.0}}}, {}, 16.0);
  CHECK(no_weak.weak_empty);
  CHECK(no_weak.weak == 0.0);
  CHECK(no_weak.total == 1.0);
  BatchLoss no_labeled = batch_loss(LossKind::mae(), {}, {{{0.0}, {3.0}}}, 2.0);
  CHECK(no_labeled.labeled_empty);
  CHECK(no_labeled.total == 6.0);

  CHECK_THROWS_AS(batch_loss(LossKind::mae(), {}, {}, -1.0), LossError);
}

TEST_CASE("normalizers count atoms, not molecules") {
  // two labeled molecules of different sizes: N1 = 3
  std::vector<LabeledSample> labeled = {{{1.0, 2.0}, {2.0, 1.0}}, {{0.0}, {4.0}}};
  BatchLoss b = batch_loss(LossKind::mae(), labeled, {}, 0.0);
  CHECK(b.atoms_labeled == 3);
  CHECK(b.supervised == Catch::Approx((1.0 + 1.0 + 4.0) / 3.0));
}
