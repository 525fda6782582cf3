//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SHIFTKIT_CHEMGRAPH_HPP
#define SHIFTKIT_CHEMGRAPH_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace shiftkit {

enum class Element : std::uint8_t { H, B, C, N, O, F, Si, P, S, Cl, Br, I };

inline constexpr std::array<std::string_view, 12> kElementSymbols = {
    "H", "B", "C", "N", "O", "F", "Si", "P", "S", "Cl", "Br", "I"};

inline std::string_view element_symbol(Element e) {
  return kElementSymbols[static_cast<std::size_t>(e)];
}

inline std::optional<Element> element_from_symbol(std::string_view s) {
  for (std::size_t i = 0; i < kElementSymbols.size(); ++i)
    if (kElementSymbols[i] == s)
      return static_cast<Element>(i);
  return std::nullopt;
}

/// Standard valence sets used for implicit-hydrogen perception and the
/// radical check.
inline const std::vector<int> &standard_valences(Element e) {
  static const std::vector<int> h{1}, b{3}, c{4}, n{3, 5}, o{2}, f{1},
      si{4}, p{3, 5}, s{2, 4, 6}, hal{1};
  switch (e) {
  case Element::H: return h;
  case Element::B: return b;
  case Element::C: return c;
  case Element::N: return n;
  case Element::O: return o;
  case Element::F: return f;
  case Element::Si: return si;
  case Element::P: return p;
  case Element::S: return s;
  case Element::Cl:
  case Element::Br:
  case Element::I: return hal;
  }
  return c;
}

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;
  std::optional<int> explicit_h;   // H count given in a bracket atom
  int implicit_h = 0;              // perceived; equals explicit_h when set
  bool aromatic = false;
  std::optional<int> isotope_label; // kept so curation can reject, never dropped

  bool operator==(const Atom &) const = default;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;

  bool operator==(const Bond &) const = default;
};

enum class SmilesErrorKind { EmptyInput, UnbalancedBranch, UnclosedRing, UnknownAtomToken };

class SmilesError : public std::runtime_error {
public:
  SmilesError(SmilesErrorKind kind, std::size_t offset, const std::string &what)
      : std::runtime_error(what + " (offset " + std::to_string(offset) + ")"),
        kind(kind), offset(offset) {}

  SmilesErrorKind kind;
  std::size_t offset;
};

struct Molecule {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<int> equiv_class;  // computed by finalize(), cached
  bool multi_fragment = false;   // source contained '.'
  bool stereo_ignored = false;   // source carried stereo markers we dropped

  std::size_t size() const { return atoms.size(); }

  const std::vector<std::pair<int, BondOrder>> &neighbors(int i) const {
    return adjacency_[static_cast<std::size_t>(i)];
  }

  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  int count_element(Element e) const {
    int n = 0;
    for (const Atom &a : atoms)
      if (a.element == e)
        ++n;
    return n;
  }

  /// Hydrogens subject to prediction: implicit ones plus explicit [H] nodes.
  int total_hydrogens() const {
    int n = 0;
    for (const Atom &a : atoms)
      n += a.implicit_h + (a.element == Element::H ? 1 : 0);
    return n;
  }

  /// Rebuilds adjacency and the cached equivalence partition. Must be called
  /// after any structural edit; parse_smiles does it for you.
  void finalize();

private:
  std::vector<std::vector<std::pair<int, BondOrder>>> adjacency_;
};

namespace detail {

inline double bond_order_value(BondOrder o) {
  switch (o) {
  case BondOrder::Single: return 1.0;
  case BondOrder::Double: return 2.0;
  case BondOrder::Triple: return 3.0;
  case BondOrder::Aromatic: return 1.5;
  }
  return 1.0;
}

/// Implicit-H perception for an organic-subset atom, following the usual
/// default-valence reading: aromatic B/C/N/P contribute one pi bond on top of
/// their ring sigma bonds, aromatic O/S contribute a lone pair instead. An
/// aromatic nitrogen carrying a hydrogen must therefore be written [nH].
inline int perceived_implicit_h(Element e, bool aromatic, int aromatic_bonds, int sigma_sum) {
  int total;
  if (aromatic) {
    const bool pi = e == Element::B || e == Element::C || e == Element::N || e == Element::P;
    total = aromatic_bonds + sigma_sum + (pi ? 1 : 0);
  } else {
    total = sigma_sum;
  }
  for (int v : standard_valences(e))
    if (v >= total)
      return v - total;
  return 0;
}

/// True when some pi-bond count in {0,1} puts the atom's total valence inside
/// its standard set. Non-aromatic atoms must match exactly.
inline bool valence_ok(const Molecule &mol, int idx) {
  const Atom &atom = mol.atoms[static_cast<std::size_t>(idx)];
  int aromatic_bonds = 0;
  int sigma_sum = 0;
  for (auto [nbr, order] : mol.neighbors(idx)) {
    (void)nbr;
    if (order == BondOrder::Aromatic)
      ++aromatic_bonds;
    else
      sigma_sum += static_cast<int>(order);
  }
  const int base = aromatic_bonds + sigma_sum + atom.implicit_h + std::abs(atom.formal_charge);
  const auto &valences = standard_valences(atom.element);
  auto in_set = [&](int v) { return std::find(valences.begin(), valences.end(), v) != valences.end(); };
  if (!atom.aromatic)
    return in_set(base);
  return in_set(base) || in_set(base + 1);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Equivalence classes (iterated color refinement)
// ---------------------------------------------------------------------------

namespace detail {

/// One refinement round: split colors by the sorted multiset of
/// (bond order, neighbor color). New ids are dense ranks of the sorted
/// signatures, so they do not depend on the input atom numbering.
inline std::vector<int> refine_once(const Molecule &mol, const std::vector<int> &colors) {
  using Signature = std::pair<int, std::vector<std::pair<int, int>>>;
  std::vector<Signature> sigs(mol.size());
  for (std::size_t i = 0; i < mol.size(); ++i) {
    std::vector<std::pair<int, int>> env;
    for (auto [nbr, order] : mol.neighbors(static_cast<int>(i)))
      env.emplace_back(static_cast<int>(order), colors[static_cast<std::size_t>(nbr)]);
    std::sort(env.begin(), env.end());
    sigs[i] = {colors[i], std::move(env)};
  }
  std::map<Signature, int> ids;
  for (const Signature &s : sigs)
    ids.emplace(s, 0);
  int next = 0;
  for (auto &kv : ids)
    kv.second = next++;
  std::vector<int> out(mol.size());
  for (std::size_t i = 0; i < mol.size(); ++i)
    out[i] = ids[sigs[i]];
  return out;
}

inline int count_colors(const std::vector<int> &colors) {
  return colors.empty() ? 0 : *std::max_element(colors.begin(), colors.end()) + 1;
}

inline std::vector<int> initial_colors(const Molecule &mol) {
  using Key = std::tuple<int, int, int, int, int, int>;
  std::vector<Key> keys(mol.size());
  for (std::size_t i = 0; i < mol.size(); ++i) {
    const Atom &a = mol.atoms[i];
    keys[i] = {static_cast<int>(a.element), a.formal_charge, a.implicit_h,
               a.aromatic ? 1 : 0, mol.degree(static_cast<int>(i)),
               a.isotope_label.value_or(0)};
  }
  std::map<Key, int> ids;
  for (const Key &k : keys)
    ids.emplace(k, 0);
  int next = 0;
  for (auto &kv : ids)
    kv.second = next++;
  std::vector<int> out(mol.size());
  for (std::size_t i = 0; i < mol.size(); ++i)
    out[i] = ids[keys[i]];
  return out;
}

inline std::vector<int> refine_to_fixpoint(const Molecule &mol, std::vector<int> colors) {
  int n_colors = count_colors(colors);
  while (true) {
    std::vector<int> next = refine_once(mol, colors);
    int n_next = count_colors(next);
    colors = std::move(next);
    if (n_next == n_colors)
      return colors;
    n_colors = n_next;
  }
}

} // namespace detail

/// Symmetry-equivalence classes of atoms. Equal ids mark atoms whose graph
/// environments are indistinguishable under refinement; such atoms are
/// candidates for identical chemical shift.
inline std::vector<int> equivalence_classes(const Molecule &mol) {
  if (mol.atoms.empty())
    return {};
  return detail::refine_to_fixpoint(mol, detail::initial_colors(mol));
}

inline void Molecule::finalize() {
  adjacency_.assign(atoms.size(), {});
  for (const Bond &b : bonds) {
    adjacency_[static_cast<std::size_t>(b.a)].emplace_back(b.b, b.order);
    adjacency_[static_cast<std::size_t>(b.b)].emplace_back(b.a, b.order);
  }
  equiv_class = equivalence_classes(*this);
}

// ---------------------------------------------------------------------------
// SMILES parsing
// ---------------------------------------------------------------------------

namespace detail {

struct RingBond {
  int atom = -1;
  std::optional<BondOrder> order;
  std::size_t offset = 0;
};

struct SmilesParser {
  std::string_view text;
  std::size_t pos = 0;
  Molecule mol;
  std::vector<bool> bracket;          // per atom: written in brackets
  std::vector<int> branch_stack;      // open '(' atom indices
  std::vector<std::size_t> branch_offsets;
  std::map<int, RingBond> open_rings;
  int prev_atom = -1;
  std::optional<BondOrder> pending_order;

  [[noreturn]] void fail(SmilesErrorKind kind, std::size_t at, const std::string &msg) {
    throw SmilesError(kind, at, msg);
  }

  char peek() const { return pos < text.size() ? text[pos] : '\0'; }
  char take() { return text[pos++]; }
  bool done() const { return pos >= text.size(); }

  void add_bond(int a, int b, BondOrder order, std::size_t at) {
    if (a == b)
      fail(SmilesErrorKind::UnclosedRing, at, "ring bond closes on its own atom");
    for (const Bond &bond : mol.bonds)
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a))
        fail(SmilesErrorKind::UnclosedRing, at, "duplicate bond between atoms");
    mol.bonds.push_back({a, b, order});
  }

  BondOrder default_order(int a, int b) const {
    const bool both_aromatic = mol.atoms[static_cast<std::size_t>(a)].aromatic &&
                               mol.atoms[static_cast<std::size_t>(b)].aromatic;
    return both_aromatic ? BondOrder::Aromatic : BondOrder::Single;
  }

  void attach(int atom_idx, std::size_t at) {
    if (prev_atom >= 0) {
      BondOrder order = pending_order.value_or(default_order(prev_atom, atom_idx));
      add_bond(prev_atom, atom_idx, order, at);
    }
    pending_order.reset();
    prev_atom = atom_idx;
  }

  void ring_closure(int number, std::size_t at) {
    if (prev_atom < 0)
      fail(SmilesErrorKind::UnclosedRing, at, "ring closure before any atom");
    auto it = open_rings.find(number);
    if (it == open_rings.end()) {
      open_rings[number] = {prev_atom, pending_order, at};
      pending_order.reset();
      return;
    }
    RingBond rb = it->second;
    open_rings.erase(it);
    if (rb.order && pending_order && *rb.order != *pending_order)
      fail(SmilesErrorKind::UnclosedRing, at, "conflicting bond orders on ring closure");
    BondOrder order = rb.order ? *rb.order
                               : pending_order.value_or(default_order(rb.atom, prev_atom));
    pending_order.reset();
    add_bond(rb.atom, prev_atom, order, at);
  }

  int add_atom(Atom atom, bool from_bracket) {
    mol.atoms.push_back(atom);
    bracket.push_back(from_bracket);
    return static_cast<int>(mol.atoms.size()) - 1;
  }

  // [isotope? symbol chiral? Hcount? charge?]
  void parse_bracket() {
    const std::size_t start = pos;
    ++pos; // consume '['
    Atom atom;
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      int iso = 0;
      while (std::isdigit(static_cast<unsigned char>(peek())))
        iso = iso * 10 + (take() - '0');
      atom.isotope_label = iso;
    }
    // Element symbol: uppercase (one or two letters) or lowercase aromatic.
    if (std::isupper(static_cast<unsigned char>(peek()))) {
      std::string sym(1, take());
      if (std::islower(static_cast<unsigned char>(peek()))) {
        std::string two = sym + peek();
        if (element_from_symbol(two)) {
          sym = two;
          ++pos;
        }
      }
      auto el = element_from_symbol(sym);
      if (!el)
        fail(SmilesErrorKind::UnknownAtomToken, start, "unknown element '" + sym + "' in bracket");
      atom.element = *el;
    } else if (std::islower(static_cast<unsigned char>(peek()))) {
      std::string sym(1, take());
      if (sym == "s" && peek() == 'i') {
        sym = "si";
        ++pos;
      }
      static const std::map<std::string, Element> kAromatic = {
          {"b", Element::B}, {"c", Element::C}, {"n", Element::N},
          {"o", Element::O}, {"p", Element::P}, {"s", Element::S},
          {"si", Element::Si}};
      auto it = kAromatic.find(sym);
      if (it == kAromatic.end())
        fail(SmilesErrorKind::UnknownAtomToken, start, "unknown aromatic token '" + sym + "'");
      atom.element = it->second;
      atom.aromatic = true;
    } else {
      fail(SmilesErrorKind::UnknownAtomToken, start, "expected element symbol in bracket");
    }
    while (peek() == '@') { // chirality accepted and ignored
      ++pos;
      mol.stereo_ignored = true;
    }
    if (peek() == 'H') {
      ++pos;
      int h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        h = 0;
        while (std::isdigit(static_cast<unsigned char>(peek())))
          h = h * 10 + (take() - '0');
      }
      atom.explicit_h = h;
    }
    if (peek() == '+' || peek() == '-') {
      const int sign = take() == '+' ? 1 : -1;
      int magnitude = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        magnitude = 0;
        while (std::isdigit(static_cast<unsigned char>(peek())))
          magnitude = magnitude * 10 + (take() - '0');
      } else {
        while (peek() == (sign > 0 ? '+' : '-')) {
          ++pos;
          ++magnitude;
        }
      }
      atom.formal_charge = sign * magnitude;
    }
    if (peek() != ']')
      fail(SmilesErrorKind::UnknownAtomToken, pos, "expected ']' in bracket atom");
    ++pos;
    atom.implicit_h = atom.explicit_h.value_or(0);
    attach(add_atom(atom, true), start);
  }

  void parse_organic_atom() {
    const std::size_t start = pos;
    Atom atom;
    const char c = take();
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if ((c == 'C' && peek() == 'l') || (c == 'B' && peek() == 'r'))
        sym += take();
      static const std::map<std::string, Element> kOrganic = {
          {"B", Element::B}, {"C", Element::C}, {"N", Element::N},
          {"O", Element::O}, {"P", Element::P}, {"S", Element::S},
          {"F", Element::F}, {"Cl", Element::Cl}, {"Br", Element::Br},
          {"I", Element::I}};
      auto it = kOrganic.find(sym);
      if (it == kOrganic.end())
        fail(SmilesErrorKind::UnknownAtomToken, start,
             "element '" + sym + "' must be written in brackets");
      atom.element = it->second;
    } else {
      static const std::map<char, Element> kAromatic = {
          {'b', Element::B}, {'c', Element::C}, {'n', Element::N},
          {'o', Element::O}, {'p', Element::P}, {'s', Element::S}};
      auto it = kAromatic.find(c);
      if (it == kAromatic.end())
        fail(SmilesErrorKind::UnknownAtomToken, start, std::string("unknown token '") + c + "'");
      atom.element = it->second;
      atom.aromatic = true;
    }
    attach(add_atom(atom, false), start);
  }

  void run() {
    if (text.empty())
      fail(SmilesErrorKind::EmptyInput, 0, "empty SMILES");
    while (!done()) {
      const char c = peek();
      const std::size_t at = pos;
      if (c == '[') {
        parse_bracket();
      } else if (std::isalpha(static_cast<unsigned char>(c))) {
        parse_organic_atom();
      } else if (c == '(') {
        if (prev_atom < 0)
          fail(SmilesErrorKind::UnbalancedBranch, at, "branch before any atom");
        branch_stack.push_back(prev_atom);
        branch_offsets.push_back(at);
        ++pos;
      } else if (c == ')') {
        if (branch_stack.empty())
          fail(SmilesErrorKind::UnbalancedBranch, at, "unmatched ')'");
        prev_atom = branch_stack.back();
        branch_stack.pop_back();
        branch_offsets.pop_back();
        ++pos;
      } else if (c == '-' || c == '=' || c == '#' || c == ':') {
        pending_order = c == '-'   ? BondOrder::Single
                        : c == '=' ? BondOrder::Double
                        : c == '#' ? BondOrder::Triple
                                   : BondOrder::Aromatic;
        ++pos;
      } else if (c == '/' || c == '\\') {
        pending_order = BondOrder::Single; // stereo bond, direction dropped
        mol.stereo_ignored = true;
        ++pos;
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos;
        ring_closure(c - '0', at);
      } else if (c == '%') {
        ++pos;
        if (!std::isdigit(static_cast<unsigned char>(peek())))
          fail(SmilesErrorKind::UnclosedRing, at, "'%' must be followed by two digits");
        int number = take() - '0';
        if (!std::isdigit(static_cast<unsigned char>(peek())))
          fail(SmilesErrorKind::UnclosedRing, at, "'%' must be followed by two digits");
        number = number * 10 + (take() - '0');
        ring_closure(number, at);
      } else if (c == '.') {
        mol.multi_fragment = true;
        prev_atom = -1;
        pending_order.reset();
        ++pos;
      } else {
        fail(SmilesErrorKind::UnknownAtomToken, at, std::string("unexpected character '") + c + "'");
      }
    }
    if (!branch_stack.empty())
      fail(SmilesErrorKind::UnbalancedBranch, text.size(),
           "unclosed '(' opened at offset " + std::to_string(branch_offsets.back()));
    if (!open_rings.empty())
      fail(SmilesErrorKind::UnclosedRing, open_rings.begin()->second.offset,
           "ring bond " + std::to_string(open_rings.begin()->first) + " never closed");
    if (mol.atoms.empty())
      fail(SmilesErrorKind::EmptyInput, 0, "no atoms in input");
  }

  void perceive_hydrogens() {
    mol.finalize(); // adjacency only used below; classes recomputed after
    for (std::size_t i = 0; i < mol.atoms.size(); ++i) {
      if (bracket[i])
        continue; // implicit_h already pinned to the bracket H count
      int aromatic_bonds = 0;
      int sigma = 0;
      for (auto [nbr, order] : mol.neighbors(static_cast<int>(i))) {
        (void)nbr;
        if (order == BondOrder::Aromatic)
          ++aromatic_bonds;
        else
          sigma += static_cast<int>(order);
      }
      Atom &a = mol.atoms[i];
      a.implicit_h = perceived_implicit_h(a.element, a.aromatic, aromatic_bonds, sigma);
    }
    mol.finalize();
  }
};

} // namespace detail

/// Parses the supported SMILES subset: organic-subset atoms, aromatic
/// lowercase, branches, ring closures (digits and %nn), bond symbols - = # :,
/// bracket atoms with isotope/charge/H count. Stereo markers are accepted and
/// dropped with mol.stereo_ignored set. Throws SmilesError with a byte offset.
inline Molecule parse_smiles(std::string_view text) {
  detail::SmilesParser parser;
  parser.text = text;
  parser.run();
  parser.perceive_hydrogens();
  return std::move(parser.mol);
}

// ---------------------------------------------------------------------------
// Structure classification
// ---------------------------------------------------------------------------

struct StructureFlags {
  bool is_radical = false;
  bool has_isotope = false;
  bool outside_element_whitelist = false;
  bool multi_fragment = false;

  bool any() const { return is_radical || has_isotope || outside_element_whitelist || multi_fragment; }
};

/// Elements admitted for 1H/13C entries. Heteroatom entries skip this check.
inline bool in_hc_whitelist(Element e) {
  switch (e) {
  case Element::C:
  case Element::H:
  case Element::O:
  case Element::N:
  case Element::S:
  case Element::P:
  case Element::F:
  case Element::Cl:
    return true;
  default:
    return false;
  }
}

inline StructureFlags classify_structure(const Molecule &mol) {
  StructureFlags flags;
  flags.multi_fragment = mol.multi_fragment;
  for (std::size_t i = 0; i < mol.atoms.size(); ++i) {
    const Atom &a = mol.atoms[i];
    if (a.isotope_label)
      flags.has_isotope = true;
    if (!in_hc_whitelist(a.element))
      flags.outside_element_whitelist = true;
    if (!detail::valence_ok(mol, static_cast<int>(i)))
      flags.is_radical = true;
  }
  return flags;
}

// ---------------------------------------------------------------------------
// SMILES writing and canonical form
// ---------------------------------------------------------------------------

namespace detail {

struct SmilesWriter {
  const Molecule &mol;
  const std::vector<int> &rank; // lower rank visited first
  std::vector<bool> visited;
  std::vector<std::vector<std::pair<int, BondOrder>>> ring_digits; // per atom
  std::vector<std::vector<int>> tree_children;                     // per atom, DFS order
  std::map<std::pair<int, int>, int> digit_of_edge;
  std::vector<bool> digit_used;
  std::string out;

  SmilesWriter(const Molecule &m, const std::vector<int> &r)
      : mol(m), rank(r), visited(m.size(), false), ring_digits(m.size()),
        tree_children(m.size()), digit_used(100, false) {}

  int alloc_digit() {
    for (int d = 1; d < 100; ++d)
      if (!digit_used[static_cast<std::size_t>(d)]) {
        digit_used[static_cast<std::size_t>(d)] = true;
        return d;
      }
    throw std::runtime_error("more than 99 simultaneously open ring bonds");
  }

  std::vector<int> ordered_neighbors(int atom) const {
    std::vector<int> nbrs;
    for (auto [n, o] : mol.neighbors(atom)) {
      (void)o;
      nbrs.push_back(n);
    }
    std::sort(nbrs.begin(), nbrs.end(),
              [&](int x, int y) { return rank[static_cast<std::size_t>(x)] < rank[static_cast<std::size_t>(y)]; });
    return nbrs;
  }

  BondOrder order_between(int a, int b) const {
    for (auto [n, o] : mol.neighbors(a))
      if (n == b)
        return o;
    throw std::logic_error("no bond between atoms");
  }

  // Pass 1: fix the spanning tree and assign ring-closure digits; pass 2
  // replays exactly this tree.
  void discover(int atom, int parent) {
    visited[static_cast<std::size_t>(atom)] = true;
    for (int nbr : ordered_neighbors(atom)) {
      if (nbr == parent)
        continue;
      if (visited[static_cast<std::size_t>(nbr)]) {
        auto key = std::minmax(atom, nbr);
        if (digit_of_edge.count({key.first, key.second}))
          continue; // digit already assigned from the other end
        int d = alloc_digit();
        digit_of_edge[{key.first, key.second}] = d;
        BondOrder order = order_between(atom, nbr);
        ring_digits[static_cast<std::size_t>(atom)].emplace_back(d, order);
        ring_digits[static_cast<std::size_t>(nbr)].emplace_back(d, order);
      } else {
        tree_children[static_cast<std::size_t>(atom)].push_back(nbr);
        discover(nbr, atom);
      }
    }
  }

  bool needs_bracket(int idx) const {
    const Atom &a = mol.atoms[static_cast<std::size_t>(idx)];
    if (a.formal_charge != 0 || a.isotope_label || a.element == Element::H ||
        a.element == Element::Si)
      return true;
    int aromatic_bonds = 0;
    int sigma = 0;
    for (auto [nbr, order] : mol.neighbors(idx)) {
      (void)nbr;
      if (order == BondOrder::Aromatic)
        ++aromatic_bonds;
      else
        sigma += static_cast<int>(order);
    }
    return perceived_implicit_h(a.element, a.aromatic, aromatic_bonds, sigma) != a.implicit_h;
  }

  void emit_atom(int idx) {
    const Atom &a = mol.atoms[static_cast<std::size_t>(idx)];
    std::string sym(element_symbol(a.element));
    if (a.aromatic)
      for (char &c : sym)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!needs_bracket(idx)) {
      out += sym;
    } else {
      out += '[';
      if (a.isotope_label)
        out += std::to_string(*a.isotope_label);
      out += sym;
      if (a.implicit_h > 0) {
        out += 'H';
        if (a.implicit_h > 1)
          out += std::to_string(a.implicit_h);
      }
      if (a.formal_charge != 0) {
        out += a.formal_charge > 0 ? '+' : '-';
        if (std::abs(a.formal_charge) > 1)
          out += std::to_string(std::abs(a.formal_charge));
      }
      out += ']';
    }
    for (auto [digit, order] : ring_digits[static_cast<std::size_t>(idx)]) {
      emit_bond_symbol(order, true);
      if (digit < 10)
        out += static_cast<char>('0' + digit);
      else {
        out += '%';
        out += std::to_string(digit);
      }
    }
  }

  void emit_bond_symbol(BondOrder order, bool ring) {
    switch (order) {
    case BondOrder::Single:
      if (ring)
        break; // never needed on a ring digit: closure defaults to single
      out += '-';
      break;
    case BondOrder::Double: out += '='; break;
    case BondOrder::Triple: out += '#'; break;
    case BondOrder::Aromatic:
      break; // default between aromatic atoms
    }
  }

  void maybe_emit_chain_bond(int from, int to) {
    const BondOrder order = order_between(from, to);
    const bool both_aromatic = mol.atoms[static_cast<std::size_t>(from)].aromatic &&
                               mol.atoms[static_cast<std::size_t>(to)].aromatic;
    if (order == BondOrder::Single) {
      if (both_aromatic)
        out += '-'; // e.g. the biphenyl bridge
      return;
    }
    if (order == BondOrder::Aromatic) {
      if (!both_aromatic)
        out += ':';
      return;
    }
    emit_bond_symbol(order, false);
  }

  void write(int atom) {
    emit_atom(atom);
    const auto &children = tree_children[static_cast<std::size_t>(atom)];
    for (std::size_t k = 0; k < children.size(); ++k) {
      const bool last = k + 1 == children.size();
      if (!last)
        out += '(';
      maybe_emit_chain_bond(atom, children[k]);
      write(children[k]);
      if (!last)
        out += ')';
    }
  }

  std::string run() {
    // Components ordered by their minimum-rank atom.
    std::vector<int> starts;
    {
      std::vector<int> order(mol.size());
      for (std::size_t i = 0; i < mol.size(); ++i)
        order[i] = static_cast<int>(i);
      std::sort(order.begin(), order.end(), [&](int x, int y) {
        return rank[static_cast<std::size_t>(x)] < rank[static_cast<std::size_t>(y)];
      });
      std::vector<bool> seen(mol.size(), false);
      for (int root : order) {
        if (seen[static_cast<std::size_t>(root)])
          continue;
        starts.push_back(root);
        // BFS to mark the component
        std::vector<int> stack{root};
        seen[static_cast<std::size_t>(root)] = true;
        while (!stack.empty()) {
          int a = stack.back();
          stack.pop_back();
          for (auto [n, o] : mol.neighbors(a)) {
            (void)o;
            if (!seen[static_cast<std::size_t>(n)]) {
              seen[static_cast<std::size_t>(n)] = true;
              stack.push_back(n);
            }
          }
        }
      }
    }
    std::fill(visited.begin(), visited.end(), false);
    for (int root : starts)
      discover(root, -1);
    for (std::size_t k = 0; k < starts.size(); ++k) {
      if (k > 0)
        out += '.';
      write(starts[k]);
    }
    return out;
  }
};

inline std::vector<int> identity_ranks(const Molecule &mol) {
  std::vector<int> r(mol.size());
  for (std::size_t i = 0; i < mol.size(); ++i)
    r[i] = static_cast<int>(i);
  return r;
}

/// Individualization-refinement canonical labeling. Branches on every atom of
/// the first non-singleton class and keeps the lexicographically smallest
/// rendered string, so isomorphic inputs map to one string.
inline void canonical_search(const Molecule &mol, const std::vector<int> &colors,
                             std::string &best, std::vector<int> &best_ranks) {
  const int n_colors = count_colors(colors);
  if (n_colors == static_cast<int>(mol.size())) {
    SmilesWriter writer(mol, colors);
    std::string candidate = writer.run();
    if (best.empty() || candidate < best) {
      best = std::move(candidate);
      best_ranks = colors;
    }
    return;
  }
  // First class with more than one member.
  int target_color = -1;
  for (int c = 0; c < n_colors && target_color < 0; ++c) {
    int count = 0;
    for (int cc : colors)
      if (cc == c)
        ++count;
    if (count > 1)
      target_color = c;
  }
  for (std::size_t a = 0; a < mol.size(); ++a) {
    if (colors[a] != target_color)
      continue;
    std::vector<int> split(colors.size());
    for (std::size_t i = 0; i < colors.size(); ++i)
      split[i] = colors[i] * 2 + 1;
    split[a] -= 1; // a sorts before the rest of its class
    canonical_search(mol, refine_to_fixpoint(mol, std::move(split)), best, best_ranks);
  }
}

} // namespace detail

/// Writes the molecule in input atom order (fragments joined by '.').
inline std::string to_smiles(const Molecule &mol) {
  detail::SmilesWriter writer(mol, detail::identity_ranks(mol));
  return writer.run();
}

/// Canonical SMILES: identical strings for isomorphic molecules regardless of
/// input atom numbering. Used as the dataset-split leakage guard.
inline std::string canonical_smiles(const Molecule &mol) {
  if (mol.atoms.empty())
    return "";
  std::string best;
  std::vector<int> ranks;
  detail::canonical_search(mol, detail::refine_to_fixpoint(mol, detail::initial_colors(mol)),
                           best, ranks);
  return best;
}

/// Rebuilds the molecule with atom i moved to position perm[i].
inline Molecule permute_atoms(const Molecule &mol, const std::vector<int> &perm) {
  Molecule out;
  out.atoms.resize(mol.atoms.size());
  for (std::size_t i = 0; i < mol.atoms.size(); ++i)
    out.atoms[static_cast<std::size_t>(perm[i])] = mol.atoms[i];
  for (const Bond &b : mol.bonds)
    out.bonds.push_back({perm[static_cast<std::size_t>(b.a)], perm[static_cast<std::size_t>(b.b)], b.order});
  out.multi_fragment = mol.multi_fragment;
  out.stereo_ignored = mol.stereo_ignored;
  out.finalize();
  return out;
}

} // namespace shiftkit

#endif // SHIFTKIT_CHEMGRAPH_HPP
