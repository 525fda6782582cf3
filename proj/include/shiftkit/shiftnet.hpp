//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small self-contained per-atom shift predictor: a fixed graph featurizer
// feeding a two-hidden-layer GELU perceptron with hand-written reverse-mode
// gradients, plus four solvent-conditioning strategies. Stands in for a large
// equivariant backbone at desk scale.

#ifndef SHIFTKIT_SHIFTNET_HPP
#define SHIFTKIT_SHIFTNET_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "shiftkit/chemgraph.hpp"
#include "shiftkit/curate.hpp"
#include "shiftkit/specparse.hpp"
#include "shiftkit/util.hpp"

namespace shiftkit {

// ---------------------------------------------------------------------------
// Featurization
// ---------------------------------------------------------------------------

inline constexpr int kElementCount = 12;

/// Feature vector layout (kFeatureDim entries):
///   [0, 12)   element one-hot
///   [12]      heavy-atom degree
///   [13]      implicit hydrogen count
///   [14]      aromatic flag
///   [15]      formal charge
///   [16, 28)  radius-1 neighbor element histogram
///   [28, 40)  radius-2 neighbor element histogram (shortest distance == 2)
///   [40]      equivalence-class size
///   [41]      hydrogen-row flag (1 for 1H rows, which reuse the attached
///             heavy atom's environment)
inline constexpr int kFeatureDim = 42;

struct FeatureRow {
  int atom_index = 0; // heavy atom carrying the nucleus (or the H node itself)
  std::vector<double> features;
};

class FeaturizeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<double> atom_environment_features(const Molecule &mol, int idx,
                                                     bool hydrogen_row) {
  std::vector<double> f(kFeatureDim, 0.0);
  const Atom &a = mol.atoms[static_cast<std::size_t>(idx)];
  f[static_cast<std::size_t>(a.element)] = 1.0;
  f[12] = static_cast<double>(mol.degree(idx));
  f[13] = static_cast<double>(a.implicit_h);
  f[14] = a.aromatic ? 1.0 : 0.0;
  f[15] = static_cast<double>(a.formal_charge);
  for (auto [nbr, order] : mol.neighbors(idx)) {
    (void)order;
    f[16 + static_cast<std::size_t>(mol.atoms[static_cast<std::size_t>(nbr)].element)] += 1.0;
  }
  // shortest-distance-2 shell
  std::vector<int> dist(mol.size(), -1);
  dist[static_cast<std::size_t>(idx)] = 0;
  for (auto [n1, o1] : mol.neighbors(idx)) {
    (void)o1;
    if (dist[static_cast<std::size_t>(n1)] < 0)
      dist[static_cast<std::size_t>(n1)] = 1;
  }
  for (auto [n1, o1] : mol.neighbors(idx)) {
    (void)o1;
    for (auto [n2, o2] : mol.neighbors(n1)) {
      (void)o2;
      if (dist[static_cast<std::size_t>(n2)] < 0) {
        dist[static_cast<std::size_t>(n2)] = 2;
        f[28 + static_cast<std::size_t>(mol.atoms[static_cast<std::size_t>(n2)].element)] += 1.0;
      }
    }
  }
  int class_size = 0;
  for (int cls : mol.equiv_class)
    if (cls == mol.equiv_class[static_cast<std::size_t>(idx)])
      ++class_size;
  f[40] = static_cast<double>(class_size);
  f[41] = hydrogen_row ? 1.0 : 0.0;
  return f;
}

} // namespace detail

/// One row per predicted nucleus. For 1H, hydrogens are enumerated per heavy
/// atom (implicit count) plus explicit [H] nodes; hydrogens on one heavy atom
/// share a single feature vector, so equivalent atoms get equal features.
inline std::vector<FeatureRow> featurize(const Molecule &mol, Nucleus nucleus) {
  std::vector<FeatureRow> rows;
  if (nucleus == Nucleus::H1) {
    for (std::size_t i = 0; i < mol.size(); ++i) {
      const Atom &a = mol.atoms[i];
      if (a.element == Element::H) {
        const auto &nbrs = mol.neighbors(static_cast<int>(i));
        const int anchor = nbrs.empty() ? static_cast<int>(i) : nbrs.front().first;
        rows.push_back({static_cast<int>(i),
                        detail::atom_environment_features(mol, anchor, true)});
        continue;
      }
      for (int h = 0; h < a.implicit_h; ++h)
        rows.push_back({static_cast<int>(i),
                        detail::atom_environment_features(mol, static_cast<int>(i), true)});
    }
  } else {
    const Element element = detail::nucleus_element(nucleus);
    for (std::size_t i = 0; i < mol.size(); ++i)
      if (mol.atoms[i].element == element)
        rows.push_back({static_cast<int>(i),
                        detail::atom_environment_features(mol, static_cast<int>(i), false)});
  }
  if (rows.empty())
    throw FeaturizeError("no atoms of nucleus " + std::string(nucleus_name(nucleus)));
  return rows;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

enum class SolventStrategy : std::uint8_t {
  None,
  GlobalContext,    // solvent embedding added to a mean-pooled context vector
  PreBackbone,      // added to each atom embedding before the second layer
  PostBackbone,     // added to each atom embedding after the second layer
  ScalarCorrection, // learned per-solvent scalar added to each output
};

inline constexpr std::array<std::string_view, 5> kStrategyNames = {
    "None", "GlobalContext", "PreBackbone", "PostBackbone", "ScalarCorrection"};

inline std::string_view strategy_name(SolventStrategy s) {
  return kStrategyNames[static_cast<std::size_t>(s)];
}

inline std::optional<SolventStrategy> strategy_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
    if (kStrategyNames[i] == name)
      return static_cast<SolventStrategy>(i);
  return std::nullopt;
}

inline constexpr int kSolventSlots = 3; // CDCl3, DMSO-d6, Other

/// Unspecified solvents train and evaluate as Other.
inline int solvent_slot(SolventClass c) {
  switch (c) {
  case SolventClass::CDCl3: return 0;
  case SolventClass::DMSOd6: return 1;
  case SolventClass::Other:
  case SolventClass::Unspecified: return 2;
  }
  return 2;
}

namespace detail {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244)); }

inline double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) * 0.3989422804014326779; // N(0,1) pdf
  return 0.5 * (1.0 + std::erf(x * 0.7071067811865475244)) + x * phi;
}

} // namespace detail

/// Dense D -> H -> H -> 1 GELU perceptron over per-atom features, plus a
/// direct linear path from the features to the output so the family contains
/// exactly-linear targets. All parameters live in one flat vector (layout
/// below) so the optimizer and the checkpoint format stay trivial.
///
///   [w1: H*D][b1: H][w2: H*H][b2: H][w3: 2H][b3: 1][e_solv: 3*H][b_solv: 3][w_skip: D]
///
/// w3's first H entries read the atom path, the last H read the context
/// vector (zero unless strategy == GlobalContext).
class ToyModel {
public:
  ToyModel() = default;

  ToyModel(int input_dim, int hidden_dim, SolventStrategy strategy)
      : input_dim_(input_dim), hidden_dim_(hidden_dim), strategy_(strategy),
        params_(param_count(input_dim, hidden_dim), 0.0) {}

  static std::size_t param_count(int d, int h) {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(d) + static_cast<std::size_t>(h) +
           static_cast<std::size_t>(h) * static_cast<std::size_t>(h) + static_cast<std::size_t>(h) +
           2 * static_cast<std::size_t>(h) + 1 +
           static_cast<std::size_t>(kSolventSlots) * static_cast<std::size_t>(h) + kSolventSlots +
           static_cast<std::size_t>(d);
  }

  /// Fan-in-scaled symmetric uniform init; solvent tables start small but
  /// nonzero so conditioning is generically active.
  static ToyModel init(int input_dim, int hidden_dim, SolventStrategy strategy,
                       std::uint64_t seed) {
    ToyModel m(input_dim, hidden_dim, strategy);
    Rng rng(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (std::size_t k = 0; k < m.w1_size(); ++k)
      m.params_[m.w1_off() + k] = rng.uniform(-s1, s1);
    for (std::size_t k = 0; k < m.w2_size(); ++k)
      m.params_[m.w2_off() + k] = rng.uniform(-s2, s2);
    for (std::size_t k = 0; k < m.w3_size(); ++k)
      m.params_[m.w3_off() + k] = rng.uniform(-s2, s2);
    for (std::size_t k = 0; k < m.esolv_size(); ++k)
      m.params_[m.esolv_off() + k] = rng.uniform(-0.1 * s2, 0.1 * s2);
    for (int c = 0; c < kSolventSlots; ++c)
      m.params_[m.bsolv_off() + static_cast<std::size_t>(c)] = rng.uniform(-0.01, 0.01);
    for (std::size_t k = 0; k < m.wskip_size(); ++k)
      m.params_[m.wskip_off() + k] = rng.uniform(-s1, s1);
    return m;
  }

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  SolventStrategy strategy() const { return strategy_; }
  void set_strategy(SolventStrategy s) { strategy_ = s; }

  std::vector<double> &params() { return params_; }
  const std::vector<double> &params() const { return params_; }

  // offsets into the flat parameter vector
  std::size_t w1_off() const { return 0; }
  std::size_t w1_size() const { return static_cast<std::size_t>(hidden_dim_) * static_cast<std::size_t>(input_dim_); }
  std::size_t b1_off() const { return w1_off() + w1_size(); }
  std::size_t b1_size() const { return static_cast<std::size_t>(hidden_dim_); }
  std::size_t w2_off() const { return b1_off() + b1_size(); }
  std::size_t w2_size() const { return static_cast<std::size_t>(hidden_dim_) * static_cast<std::size_t>(hidden_dim_); }
  std::size_t b2_off() const { return w2_off() + w2_size(); }
  std::size_t b2_size() const { return static_cast<std::size_t>(hidden_dim_); }
  std::size_t w3_off() const { return b2_off() + b2_size(); }
  std::size_t w3_size() const { return 2 * static_cast<std::size_t>(hidden_dim_); }
  std::size_t b3_off() const { return w3_off() + w3_size(); }
  std::size_t esolv_off() const { return b3_off() + 1; }
  std::size_t esolv_size() const { return static_cast<std::size_t>(kSolventSlots) * static_cast<std::size_t>(hidden_dim_); }
  std::size_t bsolv_off() const { return esolv_off() + esolv_size(); }
  std::size_t wskip_off() const { return bsolv_off() + kSolventSlots; }
  std::size_t wskip_size() const { return static_cast<std::size_t>(input_dim_); }

private:
  int input_dim_ = kFeatureDim;
  int hidden_dim_ = 128;
  SolventStrategy strategy_ = SolventStrategy::None;
  std::vector<double> params_;
};

class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  std::size_t rows = 0;
  int solvent = 2;
  std::vector<double> x;            // rows x D
  std::vector<double> pre1, a1;     // rows x H
  std::vector<double> pre2, a2;     // rows x H
  std::vector<double> ctx;          // H (zero unless GlobalContext)
  std::vector<double> out;          // rows
};

inline ForwardCache forward(const ToyModel &model, const std::vector<FeatureRow> &rows,
                            SolventClass solvent) {
  const int d = model.input_dim();
  const int h = model.hidden_dim();
  const std::size_t n = rows.size();
  if (n == 0)
    throw ModelError("forward: no feature rows");
  ForwardCache c;
  c.rows = n;
  c.solvent = solvent_slot(solvent);
  c.x.resize(n * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].features.size()) != d)
      throw ModelError("forward: feature dimension mismatch");
    std::copy(rows[i].features.begin(), rows[i].features.end(),
              c.x.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(d)));
  }
  const auto &p = model.params();
  const double *w1 = p.data() + model.w1_off();
  const double *b1 = p.data() + model.b1_off();
  const double *w2 = p.data() + model.w2_off();
  const double *b2 = p.data() + model.b2_off();
  const double *w3 = p.data() + model.w3_off();
  const double b3 = p[model.b3_off()];
  const double *esolv = p.data() + model.esolv_off() +
                        static_cast<std::size_t>(c.solvent) * static_cast<std::size_t>(h);
  const double bsolv = p[model.bsolv_off() + static_cast<std::size_t>(c.solvent)];
  const SolventStrategy strategy = model.strategy();

  c.pre1.resize(n * static_cast<std::size_t>(h));
  c.a1.resize(n * static_cast<std::size_t>(h));
  c.pre2.resize(n * static_cast<std::size_t>(h));
  c.a2.resize(n * static_cast<std::size_t>(h));
  c.ctx.assign(static_cast<std::size_t>(h), 0.0);
  c.out.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double *xi = c.x.data() + i * static_cast<std::size_t>(d);
    double *pre1 = c.pre1.data() + i * static_cast<std::size_t>(h);
    double *a1 = c.a1.data() + i * static_cast<std::size_t>(h);
    for (int j = 0; j < h; ++j) {
      double acc = b1[j];
      const double *row = w1 + static_cast<std::size_t>(j) * static_cast<std::size_t>(d);
      for (int k = 0; k < d; ++k)
        acc += row[k] * xi[k];
      if (strategy == SolventStrategy::PreBackbone)
        acc += esolv[j];
      pre1[j] = acc;
      a1[j] = detail::gelu(acc);
    }
    double *pre2 = c.pre2.data() + i * static_cast<std::size_t>(h);
    double *a2 = c.a2.data() + i * static_cast<std::size_t>(h);
    for (int j = 0; j < h; ++j) {
      double acc = b2[j];
      const double *row = w2 + static_cast<std::size_t>(j) * static_cast<std::size_t>(h);
      for (int k = 0; k < h; ++k)
        acc += row[k] * a1[k];
      if (strategy == SolventStrategy::PostBackbone)
        acc += esolv[j];
      pre2[j] = acc;
      a2[j] = detail::gelu(acc);
    }
  }
  if (strategy == SolventStrategy::GlobalContext) {
    // per-dimension sorted summation keeps the pooled context bitwise
    // invariant under atom reordering
    std::vector<double> addends(n);
    for (int j = 0; j < h; ++j) {
      for (std::size_t i = 0; i < n; ++i)
        addends[i] = c.a1[i * static_cast<std::size_t>(h) + static_cast<std::size_t>(j)];
      std::sort(addends.begin(), addends.end());
      double acc = 0.0;
      for (double v : addends)
        acc += v;
      c.ctx[static_cast<std::size_t>(j)] = acc / static_cast<double>(n) + esolv[j];
    }
  }
  const double *wskip = p.data() + model.wskip_off();
  for (std::size_t i = 0; i < n; ++i) {
    const double *a2 = c.a2.data() + i * static_cast<std::size_t>(h);
    const double *xi = c.x.data() + i * static_cast<std::size_t>(d);
    double acc = b3;
    for (int j = 0; j < h; ++j)
      acc += w3[j] * a2[j];
    for (int j = 0; j < h; ++j)
      acc += w3[h + j] * c.ctx[static_cast<std::size_t>(j)];
    for (int k = 0; k < d; ++k)
      acc += wskip[k] * xi[k];
    if (strategy == SolventStrategy::ScalarCorrection)
      acc += bsolv;
    c.out[i] = acc;
  }
  return c;
}

/// Per-atom shifts for one molecule under one solvent condition.
inline std::vector<double> predict(const ToyModel &model, const std::vector<FeatureRow> &rows,
                                   SolventClass solvent) {
  return forward(model, rows, solvent).out;
}

/// Accumulates d(loss)/d(params) into grad, given d(loss)/d(out).
inline void backward(const ToyModel &model, const ForwardCache &c,
                     const std::vector<double> &upstream, std::vector<double> &grad) {
  const int d = model.input_dim();
  const int h = model.hidden_dim();
  const std::size_t n = c.rows;
  if (upstream.size() != n)
    throw ModelError("backward: upstream size mismatch");
  if (grad.size() != model.params().size())
    throw ModelError("backward: gradient buffer size mismatch");
  const auto &p = model.params();
  const double *w2 = p.data() + model.w2_off();
  const double *w3 = p.data() + model.w3_off();
  double *g_w1 = grad.data() + model.w1_off();
  double *g_b1 = grad.data() + model.b1_off();
  double *g_w2 = grad.data() + model.w2_off();
  double *g_b2 = grad.data() + model.b2_off();
  double *g_w3 = grad.data() + model.w3_off();
  double *g_b3 = grad.data() + model.b3_off();
  double *g_esolv = grad.data() + model.esolv_off() +
                    static_cast<std::size_t>(c.solvent) * static_cast<std::size_t>(h);
  double *g_bsolv = grad.data() + model.bsolv_off() + static_cast<std::size_t>(c.solvent);
  double *g_wskip = grad.data() + model.wskip_off();
  const SolventStrategy strategy = model.strategy();

  double upstream_sum = 0.0;
  for (double g : upstream)
    upstream_sum += g;
  *g_b3 += upstream_sum;
  if (strategy == SolventStrategy::ScalarCorrection)
    *g_bsolv += upstream_sum;
  for (int j = 0; j < h; ++j)
    g_w3[h + j] += upstream_sum * c.ctx[static_cast<std::size_t>(j)];

  std::vector<double> dctx(static_cast<std::size_t>(h), 0.0);
  if (strategy == SolventStrategy::GlobalContext)
    for (int j = 0; j < h; ++j)
      dctx[static_cast<std::size_t>(j)] = upstream_sum * w3[h + j];

  std::vector<double> dpre2(static_cast<std::size_t>(h));
  std::vector<double> da1(static_cast<std::size_t>(h));
  std::vector<double> dpre1(static_cast<std::size_t>(h));
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = upstream[i];
    const double *a1 = c.a1.data() + i * static_cast<std::size_t>(h);
    const double *a2 = c.a2.data() + i * static_cast<std::size_t>(h);
    const double *pre1 = c.pre1.data() + i * static_cast<std::size_t>(h);
    const double *pre2 = c.pre2.data() + i * static_cast<std::size_t>(h);
    const double *xi = c.x.data() + i * static_cast<std::size_t>(d);
    for (int k = 0; k < d; ++k)
      g_wskip[k] += gi * xi[k];
    for (int j = 0; j < h; ++j) {
      g_w3[j] += gi * a2[j];
      dpre2[static_cast<std::size_t>(j)] = gi * w3[j] * detail::gelu_grad(pre2[j]);
    }
    for (int j = 0; j < h; ++j) {
      const double dj = dpre2[static_cast<std::size_t>(j)];
      g_b2[j] += dj;
      if (strategy == SolventStrategy::PostBackbone)
        g_esolv[j] += dj;
      double *grow = g_w2 + static_cast<std::size_t>(j) * static_cast<std::size_t>(h);
      for (int k = 0; k < h; ++k)
        grow[k] += dj * a1[k];
    }
    for (int k = 0; k < h; ++k) {
      double acc = 0.0;
      for (int j = 0; j < h; ++j)
        acc += w2[static_cast<std::size_t>(j) * static_cast<std::size_t>(h) + static_cast<std::size_t>(k)] *
               dpre2[static_cast<std::size_t>(j)];
      if (strategy == SolventStrategy::GlobalContext)
        acc += dctx[static_cast<std::size_t>(k)] / static_cast<double>(n);
      da1[static_cast<std::size_t>(k)] = acc;
    }
    for (int j = 0; j < h; ++j) {
      const double dj = da1[static_cast<std::size_t>(j)] * detail::gelu_grad(pre1[j]);
      dpre1[static_cast<std::size_t>(j)] = dj;
      g_b1[j] += dj;
      if (strategy == SolventStrategy::PreBackbone)
        g_esolv[j] += dj;
      double *grow = g_w1 + static_cast<std::size_t>(j) * static_cast<std::size_t>(d);
      for (int k = 0; k < d; ++k)
        grow[k] += dj * xi[k];
    }
  }
  if (strategy == SolventStrategy::GlobalContext)
    for (int j = 0; j < h; ++j)
      g_esolv[j] += dctx[static_cast<std::size_t>(j)];
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelSchema = "shiftkit.model.v1";

} // namespace shiftkit

#endif // SHIFTKIT_SHIFTNET_HPP
