//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loss calculus for set-supervised shift learning: pointwise losses, the
// atom-level supervised loss, the bipartite-matching molecule-level loss with
// its O(N^3) assignment solver, the sorting-based closed form that coincides
// with it for increasing convex costs, a factorial-time oracle, and the
// combined batch objective.

#ifndef SHIFTKIT_SETLOSS_HPP
#define SHIFTKIT_SETLOSS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace shiftkit {

class LossError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Pointwise loss family. All trainable kinds satisfy l(x,y) = f(|x-y|) with
/// f increasing and convex; SqrtTest deliberately breaks convexity and exists
/// only so tests can show the sorted closed form fails without it. Training
/// entry points reject it.
class LossKind {
public:
  enum class Tag : std::uint8_t { MAE, MSE, Huber, SqrtTest };

  static LossKind mae() { return LossKind(Tag::MAE, 0.0); }
  static LossKind mse() { return LossKind(Tag::MSE, 0.0); }
  static LossKind huber(double delta) {
    if (!(delta > 0.0))
      throw LossError("huber delta must be positive");
    return LossKind(Tag::Huber, delta);
  }
  static LossKind sqrt_test() { return LossKind(Tag::SqrtTest, 0.0); }

  Tag tag() const { return tag_; }
  double delta() const { return delta_; }
  bool convex() const { return tag_ != Tag::SqrtTest; }

  std::string name() const {
    switch (tag_) {
    case Tag::MAE: return "mae";
    case Tag::MSE: return "mse";
    case Tag::Huber: return "huber";
    case Tag::SqrtTest: return "sqrt_test";
    }
    return "mae";
  }

  bool operator==(const LossKind &) const = default;

private:
  LossKind(Tag tag, double delta) : tag_(tag), delta_(delta) {}
  Tag tag_;
  double delta_;
};

/// l(s, t)
inline double pointwise(const LossKind &kind, double s, double t) {
  const double d = s - t;
  switch (kind.tag()) {
  case LossKind::Tag::MAE:
    return std::abs(d);
  case LossKind::Tag::MSE:
    return d * d;
  case LossKind::Tag::Huber: {
    const double delta = kind.delta();
    const double a = std::abs(d);
    return a <= delta ? 0.5 * d * d : delta * (a - 0.5 * delta);
  }
  case LossKind::Tag::SqrtTest:
    return std::sqrt(std::abs(d));
  }
  return 0.0;
}

/// d l(s, t) / d s with the target fixed; 0 at MAE/Sqrt ties.
inline double pointwise_grad(const LossKind &kind, double s, double t) {
  const double d = s - t;
  switch (kind.tag()) {
  case LossKind::Tag::MAE:
    return d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0;
  case LossKind::Tag::MSE:
    return 2.0 * d;
  case LossKind::Tag::Huber:
    return std::clamp(d, -kind.delta(), kind.delta());
  case LossKind::Tag::SqrtTest: {
    if (d == 0.0)
      return 0.0;
    const double g = 0.5 / std::sqrt(std::abs(d));
    return d > 0.0 ? g : -g;
  }
  }
  return 0.0;
}

/// Supervised atom-level loss: sum of pointwise losses under the given
/// one-to-one correspondence (no matching).
inline double atom_loss(const LossKind &kind, const std::vector<double> &preds,
                        const std::vector<double> &targets) {
  if (preds.size() != targets.size())
    throw LossError("atom_loss: length mismatch (" + std::to_string(preds.size()) + " vs " +
                    std::to_string(targets.size()) + ")");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    total += pointwise(kind, preds[i], targets[i]);
  return total;
}

/// Result of a molecule-level matching loss. assignment[i] is the target
/// index matched to prediction i (a bijection); grad[i] is the loss gradient
/// in s_i with the matching held fixed.
struct MatchResult {
  double loss = 0.0;
  std::vector<int> assignment;
  std::vector<double> grad;
};

namespace detail {

inline void require_same_nonempty(std::size_t np, std::size_t nt, const char *where) {
  if (np != nt)
    throw LossError(std::string(where) + ": length mismatch (" + std::to_string(np) + " vs " +
                    std::to_string(nt) + ")");
  if (np == 0)
    throw LossError(std::string(where) + ": empty input");
}

/// Square-matrix assignment by shortest augmenting paths with dual
/// potentials (Jonker-Volgenant style), O(N^3). row_of[j] = matched row of
/// column j. Returns the minimizing column for each row.
inline std::vector<int> solve_assignment(const std::vector<std::vector<double>> &cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based internals; index 0 is the virtual root.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> row_of(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    row_of[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = row_of[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)])
          continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(row_of[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      row_of[static_cast<std::size_t>(j0)] = row_of[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    col_of_row[static_cast<std::size_t>(row_of[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return col_of_row;
}

inline MatchResult result_for_assignment(const LossKind &kind, const std::vector<double> &preds,
                                         const std::vector<double> &targets,
                                         std::vector<int> assignment) {
  MatchResult res;
  res.assignment = std::move(assignment);
  res.grad.resize(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double t = targets[static_cast<std::size_t>(res.assignment[i])];
    res.loss += pointwise(kind, preds[i], t);
    res.grad[i] = pointwise_grad(kind, preds[i], t);
  }
  return res;
}

} // namespace detail

/// Molecule-level loss as the minimum over all prediction->target
/// assignments, solved exactly in O(N^3).
inline MatchResult hungarian_loss(const LossKind &kind, const std::vector<double> &preds,
                                  const std::vector<double> &targets) {
  detail::require_same_nonempty(preds.size(), targets.size(), "hungarian_loss");
  const std::size_t n = preds.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i][j] = pointwise(kind, preds[i], targets[j]);
  return detail::result_for_assignment(kind, preds, targets, detail::solve_assignment(cost));
}

/// Sorting closed form: sort both multisets and pair by rank. Equals
/// hungarian_loss whenever the kind is increasing and convex. Ties break by
/// (value, original index), which fixes one valid subgradient.
inline MatchResult sorted_loss(const LossKind &kind, const std::vector<double> &preds,
                               const std::vector<double> &targets) {
  detail::require_same_nonempty(preds.size(), targets.size(), "sorted_loss");
  const std::size_t n = preds.size();
  std::vector<int> pred_order(n), target_order(n);
  std::iota(pred_order.begin(), pred_order.end(), 0);
  std::iota(target_order.begin(), target_order.end(), 0);
  auto by_value = [](const std::vector<double> &values) {
    return [&values](int a, int b) {
      const double va = values[static_cast<std::size_t>(a)];
      const double vb = values[static_cast<std::size_t>(b)];
      return va < vb || (va == vb && a < b);
    };
  };
  std::sort(pred_order.begin(), pred_order.end(), by_value(preds));
  std::sort(target_order.begin(), target_order.end(), by_value(targets));
  std::vector<int> assignment(n);
  for (std::size_t r = 0; r < n; ++r)
    assignment[static_cast<std::size_t>(pred_order[r])] = target_order[r];
  return detail::result_for_assignment(kind, preds, targets, std::move(assignment));
}

/// Exact minimum by enumerating all N! assignments. Test oracle only.
inline double brute_force_loss(const LossKind &kind, const std::vector<double> &preds,
                               const std::vector<double> &targets) {
  detail::require_same_nonempty(preds.size(), targets.size(), "brute_force_loss");
  if (preds.size() > 8)
    throw LossError("brute_force_loss: N > 8");
  std::vector<int> perm(preds.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      total += pointwise(kind, preds[i], targets[static_cast<std::size_t>(perm[i])]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// One labeled molecule in a batch: predictions paired index-wise with
/// targets (atom assignment already applied upstream).
struct LabeledSample {
  std::vector<double> preds;
  std::vector<double> targets;
};

/// One weakly-supervised molecule: predictions vs an unordered multiset.
struct WeakSample {
  std::vector<double> preds;
  std::vector<double> targets;
};

struct BatchLoss {
  double total = 0.0;
  double supervised = 0.0; // (1/N1) sum of atom losses
  double weak = 0.0;       // (1/N2) sum of sorted matching losses
  std::size_t atoms_labeled = 0;
  std::size_t atoms_weak = 0;
  bool labeled_empty = false;
  bool weak_empty = false;
};

/// Eq.-style batch objective: per-molecule losses are sums; normalization by
/// the total atom count of each stream happens here, once. An empty stream
/// contributes zero with its normalizer treated as one and is flagged.
inline BatchLoss batch_loss(const LossKind &kind, const std::vector<LabeledSample> &labeled,
                            const std::vector<WeakSample> &weak, double lambda) {
  if (lambda < 0.0)
    throw LossError("batch_loss: negative lambda");
  BatchLoss out;
  double sup_sum = 0.0;
  for (const LabeledSample &mol : labeled) {
    sup_sum += atom_loss(kind, mol.preds, mol.targets);
    out.atoms_labeled += mol.preds.size();
  }
  double weak_sum = 0.0;
  for (const WeakSample &mol : weak) {
    weak_sum += sorted_loss(kind, mol.preds, mol.targets).loss;
    out.atoms_weak += mol.preds.size();
  }
  out.labeled_empty = out.atoms_labeled == 0;
  out.weak_empty = out.atoms_weak == 0;
  out.supervised = sup_sum / static_cast<double>(std::max<std::size_t>(1, out.atoms_labeled));
  out.weak = weak_sum / static_cast<double>(std::max<std::size_t>(1, out.atoms_weak));
  out.total = out.supervised + lambda * out.weak;
  return out;
}

} // namespace shiftkit

#endif // SHIFTKIT_SETLOSS_HPP
