//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-contained property suites for the loss kernel, shared by the
// `losscheck` CLI subcommand and the acceptance suite: closed-form
// equivalence against the assignment solver and the factorial oracle, the
// exchange inequality behind the closed form, the fixed concave
// counterexample, and finite-difference gradient checks.

#ifndef SHIFTKIT_LOSSCHECK_HPP
#define SHIFTKIT_LOSSCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "shiftkit/setloss.hpp"
#include "shiftkit/util.hpp"

namespace shiftkit {

struct LossCheckConfig {
  std::size_t max_n = 50;          // instance sizes drawn uniformly from [1, max_n]
  std::size_t equivalence_iters = 10000;
  std::size_t lemma_iters = 100000;
  std::size_t gradient_instances = 100;
  double value_lo = -300.0;        // widest nucleus range
  double value_hi = 300.0;
  std::uint64_t seed = 1;
};

struct SuiteResult {
  std::string name;
  std::size_t checks = 0;
  std::size_t failures = 0;
  double max_error = 0.0;

  bool passed() const { return failures == 0; }
};

struct LossCheckReport {
  std::vector<SuiteResult> suites;

  bool passed() const {
    for (const SuiteResult &s : suites)
      if (!s.passed())
        return false;
    return true;
  }
};

namespace detail {

inline const std::vector<LossKind> &checked_kinds() {
  static const std::vector<LossKind> kinds = {LossKind::mae(), LossKind::mse(),
                                              LossKind::huber(0.1), LossKind::huber(1.0),
                                              LossKind::huber(10.0)};
  return kinds;
}

inline std::vector<double> random_values(Rng &rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double &x : v)
    x = rng.uniform(lo, hi);
  return v;
}

} // namespace detail

/// sorted_loss == hungarian_loss (rel. 1e-9) on random instances, and both
/// equal brute_force_loss when N <= 7, for every convex kind.
inline SuiteResult check_equivalence(const LossCheckConfig &cfg) {
  SuiteResult res{"equivalence", 0, 0, 0.0};
  Rng rng(cfg.seed);
  for (std::size_t iter = 0; iter < cfg.equivalence_iters; ++iter) {
    const std::size_t n =
        static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(cfg.max_n)));
    auto preds = detail::random_values(rng, n, cfg.value_lo, cfg.value_hi);
    auto targets = detail::random_values(rng, n, cfg.value_lo, cfg.value_hi);
    for (const LossKind &kind : detail::checked_kinds()) {
      const double hung = hungarian_loss(kind, preds, targets).loss;
      const double sorted = sorted_loss(kind, preds, targets).loss;
      const double scale = std::max(1.0, hung);
      double err = std::abs(sorted - hung) / scale;
      ++res.checks;
      if (err > 1e-9)
        ++res.failures;
      if (n <= 7) {
        const double brute = brute_force_loss(kind, preds, targets);
        err = std::max(err, std::abs(sorted - brute) / scale);
        ++res.checks;
        if (std::abs(sorted - brute) / scale > 1e-9)
          ++res.failures;
      }
      res.max_error = std::max(res.max_error, err);
    }
  }
  return res;
}

/// The fixed instance preds={0,1}, targets={1,2} under the concave test kind:
/// the crossed matching wins by more than 0.58, so convexity is necessary.
inline SuiteResult check_concave_counterexample() {
  SuiteResult res{"concave_counterexample", 0, 0, 0.0};
  const std::vector<double> preds = {0.0, 1.0};
  const std::vector<double> targets = {1.0, 2.0};
  const double hung = hungarian_loss(LossKind::sqrt_test(), preds, targets).loss;
  const double sorted = sorted_loss(LossKind::sqrt_test(), preds, targets).loss;
  res.checks = 3;
  if (std::abs(sorted - 2.0) > 1e-12)
    ++res.failures;
  if (std::abs(hung - std::sqrt(2.0)) > 1e-12)
    ++res.failures;
  if (!(sorted - hung > 0.58))
    ++res.failures;
  res.max_error = std::abs(hung - std::sqrt(2.0));
  return res;
}

/// Exchange inequality: for x1<=x2, y1<=y2 and convex increasing f,
/// f(|x1-y1|) + f(|x2-y2|) <= f(|x1-y2|) + f(|x2-y1|).
inline SuiteResult check_exchange_lemma(const LossCheckConfig &cfg) {
  SuiteResult res{"exchange_lemma", 0, 0, 0.0};
  Rng rng(cfg.seed + 1);
  for (std::size_t iter = 0; iter < cfg.lemma_iters; ++iter) {
    double x1 = rng.uniform(cfg.value_lo, cfg.value_hi);
    double x2 = rng.uniform(cfg.value_lo, cfg.value_hi);
    double y1 = rng.uniform(cfg.value_lo, cfg.value_hi);
    double y2 = rng.uniform(cfg.value_lo, cfg.value_hi);
    if (x1 > x2)
      std::swap(x1, x2);
    if (y1 > y2)
      std::swap(y1, y2);
    for (const LossKind &kind : detail::checked_kinds()) {
      const double straight = pointwise(kind, x1, y1) + pointwise(kind, x2, y2);
      const double crossed = pointwise(kind, x1, y2) + pointwise(kind, x2, y1);
      ++res.checks;
      const double slack = (crossed - straight) / std::max(1.0, crossed);
      if (slack < -1e-9) {
        ++res.failures;
        res.max_error = std::max(res.max_error, -slack);
      }
    }
  }
  return res;
}

/// Analytic sorted_loss gradients vs central finite differences (h = 1e-6,
/// abs tolerance 1e-5) on tie-free instances (min pairwise gap > 1e-3).
inline SuiteResult check_gradients(const LossCheckConfig &cfg) {
  SuiteResult res{"gradient", 0, 0, 0.0};
  Rng rng(cfg.seed + 2);
  std::size_t done = 0;
  while (done < cfg.gradient_instances) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 10));
    auto preds = detail::random_values(rng, n, -50.0, 50.0);
    auto targets = detail::random_values(rng, n, -50.0, 50.0);
    std::vector<double> merged = preds;
    merged.insert(merged.end(), targets.begin(), targets.end());
    std::sort(merged.begin(), merged.end());
    bool gapped = true;
    for (std::size_t i = 1; i < merged.size(); ++i)
      gapped = gapped && merged[i] - merged[i - 1] > 1e-3;
    if (!gapped)
      continue;
    ++done;
    const double h = 1e-6;
    for (const LossKind &kind : {LossKind::mae(), LossKind::mse(), LossKind::huber(1.0)}) {
      auto analytic = sorted_loss(kind, preds, targets);
      for (std::size_t i = 0; i < n; ++i) {
        auto perturbed = preds;
        perturbed[i] = preds[i] + h;
        const double up = sorted_loss(kind, perturbed, targets).loss;
        perturbed[i] = preds[i] - h;
        const double down = sorted_loss(kind, perturbed, targets).loss;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(analytic.grad[i] - fd);
        ++res.checks;
        if (err > 1e-5)
          ++res.failures;
        res.max_error = std::max(res.max_error, err);
      }
    }
  }
  return res;
}

inline LossCheckReport run_losscheck(const LossCheckConfig &cfg) {
  LossCheckReport report;
  report.suites.push_back(check_equivalence(cfg));
  report.suites.push_back(check_concave_counterexample());
  report.suites.push_back(check_exchange_lemma(cfg));
  report.suites.push_back(check_gradients(cfg));
  return report;
}

} // namespace shiftkit

#endif // SHIFTKIT_LOSSCHECK_HPP
