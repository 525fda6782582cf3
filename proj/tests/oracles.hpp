//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations. Everything here is deliberately
// brute-force and independent of the library's algorithmic paths.

#ifndef SHIFTKIT_TESTS_ORACLES_HPP
#define SHIFTKIT_TESTS_ORACLES_HPP

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "shiftkit/chemgraph.hpp"

namespace shiftkit::oracle {

inline bool atoms_compatible(const Atom &a, const Atom &b) {
  return a.element == b.element && a.formal_charge == b.formal_charge &&
         a.implicit_h == b.implicit_h && a.aromatic == b.aromatic &&
         a.isotope_label == b.isotope_label;
}

inline std::optional<BondOrder> bond_between(const Molecule &mol, int a, int b) {
  for (auto [nbr, order] : mol.neighbors(a))
    if (nbr == b)
      return order;
  return std::nullopt;
}

/// Enumerates all graph isomorphisms src -> dst by backtracking, invoking
/// visit(mapping) for each. visit returns false to stop the search.
inline void enumerate_isomorphisms(const Molecule &src, const Molecule &dst,
                                   const std::function<bool(const std::vector<int> &)> &visit) {
  const int n = static_cast<int>(src.size());
  if (n != static_cast<int>(dst.size()))
    return;
  std::vector<int> map(static_cast<std::size_t>(n), -1);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  bool stop = false;

  std::function<void(int)> place = [&](int i) {
    if (stop)
      return;
    if (i == n) {
      if (!visit(map))
        stop = true;
      return;
    }
    for (int cand = 0; cand < n && !stop; ++cand) {
      if (used[static_cast<std::size_t>(cand)])
        continue;
      if (!atoms_compatible(src.atoms[static_cast<std::size_t>(i)],
                            dst.atoms[static_cast<std::size_t>(cand)]))
        continue;
      if (src.degree(i) != dst.degree(cand))
        continue;
      bool ok = true;
      for (int j = 0; j < i && ok; ++j) {
        auto in_src = bond_between(src, i, j);
        auto in_dst = bond_between(dst, cand, map[static_cast<std::size_t>(j)]);
        ok = in_src == in_dst;
      }
      if (!ok)
        continue;
      map[static_cast<std::size_t>(i)] = cand;
      used[static_cast<std::size_t>(cand)] = true;
      place(i + 1);
      used[static_cast<std::size_t>(cand)] = false;
      map[static_cast<std::size_t>(i)] = -1;
    }
  };
  place(0);
}

inline bool isomorphic(const Molecule &a, const Molecule &b) {
  bool found = false;
  enumerate_isomorphisms(a, b, [&](const std::vector<int> &) {
    found = true;
    return false;
  });
  return found;
}

/// True automorphism orbits, as canonical per-atom ids (dense, ordered by the
/// smallest atom index in each orbit).
inline std::vector<int> automorphism_orbits(const Molecule &mol) {
  const int n = static_cast<int>(mol.size());
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    parent[static_cast<std::size_t>(i)] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x)
      x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  enumerate_isomorphisms(mol, mol, [&](const std::vector<int> &map) {
    for (int i = 0; i < n; ++i) {
      int a = find(i);
      int b = find(map[static_cast<std::size_t>(i)]);
      if (a != b)
        parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
    return true;
  });
  std::map<int, int> ids;
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int root = find(i);
    auto [it, fresh] = ids.emplace(root, static_cast<int>(ids.size()));
    (void)fresh;
    out[static_cast<std::size_t>(i)] = it->second;
  }
  return out;
}

/// Same-partition check that ignores the labels of class ids.
inline bool same_partition(const std::vector<int> &a, const std::vector<int> &b) {
  if (a.size() != b.size())
    return false;
  std::map<int, int> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [f, fnew] = fwd.emplace(a[i], b[i]);
    auto [g, gnew] = bwd.emplace(b[i], a[i]);
    (void)fnew;
    (void)gnew;
    if (f->second != b[i] || g->second != a[i])
      return false;
  }
  return true;
}

/// Central finite difference of a scalar function.
inline double central_difference(const std::function<double(double)> &f, double x,
                                 double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

} // namespace shiftkit::oracle

#endif // SHIFTKIT_TESTS_ORACLES_HPP
