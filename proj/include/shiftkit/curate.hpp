//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Three-stage curation of literature entries: structure checks, spectrum
// validity checks (monotonicity, shift range, peak width), and the
// molecule/spectrum consistency check that turns an accepted pair into a
// per-atom target multiset. Also the heteroatom labeled-record extraction
// and the leakage-guarded dataset split.

#ifndef SHIFTKIT_CURATE_HPP
#define SHIFTKIT_CURATE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shiftkit/chemgraph.hpp"
#include "shiftkit/specparse.hpp"
#include "shiftkit/tomlcfg.hpp"
#include "shiftkit/util.hpp"

namespace shiftkit {

enum class MonotonicDirection : std::uint8_t { Either, Ascending, Descending };

struct ValidityConfig {
  // Indexed by Nucleus. Range defaults follow the published per-element
  // limits; widths are config-exposed ("excessively broad" is not a number).
  std::array<std::pair<double, double>, 6> shift_range = {{
      {-1.0, 15.0},    // 1H
      {-10.0, 230.0},  // 13C
      {-300.0, 300.0}, // 19F
      {-150.0, 200.0}, // 31P
      {-50.0, 100.0},  // 11B
      {-70.0, 40.0},   // 29Si
  }};
  std::array<double, 6> max_peak_width = {0.5, 2.0, 5.0, 5.0, 5.0, 5.0};
  MonotonicDirection monotonic_direction = MonotonicDirection::Either;
  bool lenient = false;

  std::pair<double, double> range_for(Nucleus n) const {
    return shift_range[static_cast<std::size_t>(n)];
  }
  double width_for(Nucleus n) const { return max_peak_width[static_cast<std::size_t>(n)]; }

  static ValidityConfig from_toml(const TomlTable &toml) {
    ValidityConfig cfg;
    for (std::size_t i = 0; i < kNucleusNames.size(); ++i) {
      const std::string name(kNucleusNames[i]);
      if (auto range = toml.get_array("shift_range." + name)) {
        if (range->size() != 2)
          throw std::runtime_error("shift_range." + name + " must be [lo, hi]");
        cfg.shift_range[i] = {(*range)[0], (*range)[1]};
      }
      if (auto width = toml.get_double("max_peak_width." + name))
        cfg.max_peak_width[i] = *width;
    }
    if (auto dir = toml.get_string("monotonic_direction")) {
      if (*dir == "either")
        cfg.monotonic_direction = MonotonicDirection::Either;
      else if (*dir == "ascending")
        cfg.monotonic_direction = MonotonicDirection::Ascending;
      else if (*dir == "descending")
        cfg.monotonic_direction = MonotonicDirection::Descending;
      else
        throw std::runtime_error("monotonic_direction: unknown value '" + *dir + "'");
    }
    if (auto lenient = toml.get_bool("lenient"))
      cfg.lenient = *lenient;
    return cfg;
  }
};

struct Verdict {
  std::string check;
  bool pass = true;
  std::string detail;
  int peak_index = -1;

  static Verdict ok(std::string check) { return {std::move(check), true, "", -1}; }
  static Verdict fail(std::string check, std::string detail, int peak_index = -1) {
    return {std::move(check), false, std::move(detail), peak_index};
  }
};

/// Validated, per-atom-expanded multiset of observed shifts for one
/// (molecule, nucleus) pair. shifts are kept sorted ascending; atom_map is
/// present only for labeled data and maps shifts[k] to an atom index.
struct TargetShiftSet {
  Nucleus nucleus = Nucleus::C13;
  std::vector<double> shifts;
  std::optional<std::vector<int>> atom_map;
  SolventClass solvent_class = SolventClass::Unspecified;
};

struct DatasetEntry {
  std::string id;
  std::string smiles;
  Molecule molecule;
  std::vector<Spectrum> spectra;
  std::vector<TargetShiftSet> targets;
  bool labeled = false;
  std::vector<Verdict> verdicts;
  std::string provenance;

  bool accepted() const {
    for (const Verdict &v : verdicts)
      if (!v.pass)
        return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// NMR validity
// ---------------------------------------------------------------------------

inline Verdict check_nmr_validity(const Spectrum &spec, const ValidityConfig &cfg) {
  // (a) representative shifts monotone in one consistent direction
  bool ascending = true;
  bool descending = true;
  int first_break = -1;
  for (std::size_t i = 1; i < spec.peaks.size(); ++i) {
    const double prev = peak_shift(spec.peaks[i - 1]);
    const double cur = peak_shift(spec.peaks[i]);
    const bool was_monotone = ascending || descending;
    if (cur < prev)
      ascending = false;
    if (cur > prev)
      descending = false;
    if (was_monotone && !(ascending || descending))
      first_break = static_cast<int>(i);
  }
  bool monotone_ok = false;
  switch (cfg.monotonic_direction) {
  case MonotonicDirection::Either: monotone_ok = ascending || descending; break;
  case MonotonicDirection::Ascending: monotone_ok = ascending; break;
  case MonotonicDirection::Descending: monotone_ok = descending; break;
  }
  if (!monotone_ok) {
    const int idx = first_break >= 0 ? first_break : static_cast<int>(spec.peaks.size()) - 1;
    return Verdict::fail("monotonicity", "shift order changes direction at peak " +
                         std::to_string(idx), idx);
  }
  // (b) every shift inside the per-nucleus range, bounds inclusive
  const auto [lo, hi] = cfg.range_for(spec.nucleus);
  for (std::size_t i = 0; i < spec.peaks.size(); ++i) {
    const Peak &p = spec.peaks[i];
    if (p.shift_low < lo || p.shift_high > hi)
      return Verdict::fail("range",
                           "peak " + std::to_string(i) + " outside [" + std::to_string(lo) +
                               ", " + std::to_string(hi) + "] for " +
                               std::string(nucleus_name(spec.nucleus)),
                           static_cast<int>(i));
  }
  // (c) peak width
  const double max_width = cfg.width_for(spec.nucleus);
  for (std::size_t i = 0; i < spec.peaks.size(); ++i) {
    const Peak &p = spec.peaks[i];
    if (p.shift_high - p.shift_low > max_width)
      return Verdict::fail("width",
                           "peak " + std::to_string(i) + " wider than " +
                               std::to_string(max_width) + " ppm",
                           static_cast<int>(i));
  }
  return Verdict::ok("nmr_validity");
}

// ---------------------------------------------------------------------------
// Consistency checks and target construction
// ---------------------------------------------------------------------------

namespace detail {

inline Element nucleus_element(Nucleus n) {
  switch (n) {
  case Nucleus::H1: return Element::H;
  case Nucleus::C13: return Element::C;
  case Nucleus::F19: return Element::F;
  case Nucleus::P31: return Element::P;
  case Nucleus::B11: return Element::B;
  case Nucleus::Si29: return Element::Si;
  }
  return Element::C;
}

/// Equivalence classes restricted to atoms of one element:
/// class id -> member atom indices, ordered by class id.
inline std::vector<std::vector<int>> element_classes(const Molecule &mol, Element element) {
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < mol.size(); ++i)
    if (mol.atoms[i].element == element)
      by_class[mol.equiv_class[i]].push_back(static_cast<int>(i));
  std::vector<std::vector<int>> out;
  out.reserve(by_class.size());
  for (auto &kv : by_class)
    out.push_back(std::move(kv.second));
  return out;
}

/// Exchangeable hydrogens: those attached to O or N (used by lenient 1H).
inline int exchangeable_hydrogens(const Molecule &mol) {
  int n = 0;
  for (std::size_t i = 0; i < mol.size(); ++i) {
    const Atom &a = mol.atoms[i];
    if (a.element == Element::O || a.element == Element::N)
      n += a.implicit_h;
  }
  return n;
}

} // namespace detail

struct ConsistencyResult {
  Verdict verdict = Verdict::ok("consistency");
  std::optional<TargetShiftSet> target;
};

/// 13C: the number of peaks must equal the number of carbon equivalence
/// classes. The target multiset repeats each observed shift once per carbon
/// of its class. Which class pairs with which peak only matters when class
/// sizes differ; strict mode rejects that ambiguity (unless there is a single
/// peak), lenient mode uses the canonical pairing (classes by descending
/// size, refinement id as tiebreak; peaks ascending).
///
/// 1H: the integrations must sum to the number of predicted hydrogens; each
/// peak's shift enters the multiset once per integrated proton. Lenient mode
/// tolerates a deficit up to the O/N-bound hydrogen count (those atoms are
/// then excluded from prediction).
inline ConsistencyResult check_consistency(const Molecule &mol, const Spectrum &spec,
                                           const ValidityConfig &cfg = {}) {
  ConsistencyResult res;
  if (spec.nucleus == Nucleus::C13) {
    auto classes = detail::element_classes(mol, Element::C);
    if (classes.size() != spec.peaks.size()) {
      res.verdict = Verdict::fail("consistency", std::to_string(spec.peaks.size()) +
                                  " peaks vs " + std::to_string(classes.size()) +
                                  " carbon classes");
      return res;
    }
    if (classes.empty()) {
      res.verdict = Verdict::fail("consistency", "no carbon atoms");
      return res;
    }
    std::vector<std::size_t> sizes;
    for (const auto &cls : classes)
      sizes.push_back(cls.size());
    const bool uniform = std::set<std::size_t>(sizes.begin(), sizes.end()).size() == 1;
    if (!uniform && spec.peaks.size() > 1 && !cfg.lenient) {
      res.verdict = Verdict::fail("consistency",
                                  "unequal class sizes make the target multiset ambiguous "
                                  "(strict mode)");
      return res;
    }
    std::vector<double> peak_values;
    for (const Peak &p : spec.peaks)
      peak_values.push_back(peak_shift(p));
    std::sort(peak_values.begin(), peak_values.end());
    // canonical class order: size descending, class id (= discovery order
    // of element_classes) as tiebreak
    std::vector<std::size_t> class_order(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k)
      class_order[k] = k;
    std::stable_sort(class_order.begin(), class_order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return classes[a].size() > classes[b].size();
                     });
    TargetShiftSet target;
    target.nucleus = Nucleus::C13;
    target.solvent_class = spec.solvent_class;
    for (std::size_t k = 0; k < class_order.size(); ++k)
      target.shifts.insert(target.shifts.end(), classes[class_order[k]].size(), peak_values[k]);
    std::sort(target.shifts.begin(), target.shifts.end());
    res.target = std::move(target);
    return res;
  }
  if (spec.nucleus == Nucleus::H1) {
    int integration_sum = 0;
    for (std::size_t i = 0; i < spec.peaks.size(); ++i) {
      if (!spec.peaks[i].integration) {
        res.verdict = Verdict::fail("missing_integration",
                                    "1H peak " + std::to_string(i) + " lacks nH",
                                    static_cast<int>(i));
        return res;
      }
      integration_sum += *spec.peaks[i].integration;
    }
    const int total_h = mol.total_hydrogens();
    const int deficit = total_h - integration_sum;
    const bool ok = cfg.lenient
                        ? deficit >= 0 && deficit <= detail::exchangeable_hydrogens(mol)
                        : deficit == 0;
    if (!ok) {
      res.verdict = Verdict::fail("consistency", std::to_string(integration_sum) +
                                  " integrated protons vs " + std::to_string(total_h) +
                                  " hydrogens");
      return res;
    }
    TargetShiftSet target;
    target.nucleus = Nucleus::H1;
    target.solvent_class = spec.solvent_class;
    for (const Peak &p : spec.peaks)
      target.shifts.insert(target.shifts.end(), static_cast<std::size_t>(*p.integration),
                           peak_shift(p));
    std::sort(target.shifts.begin(), target.shifts.end());
    res.target = std::move(target);
    return res;
  }
  res.verdict = Verdict::fail("consistency",
                              "consistency check applies to 1H/13C; use "
                              "extract_heteroatom_label for heteroatoms");
  return res;
}

/// Labeled heteroatom record: valid iff the molecule has exactly one
/// equivalence class of the observed element and the spectrum exactly one
/// peak. All atoms of that class map to the single shift.
struct LabeledRecord {
  Nucleus nucleus = Nucleus::F19;
  std::vector<int> atom_indices;
  double shift = 0.0;
  SolventClass solvent_class = SolventClass::Unspecified;
};

inline std::optional<LabeledRecord> extract_heteroatom_label(const Molecule &mol,
                                                             const Spectrum &spec) {
  if (spec.nucleus == Nucleus::H1 || spec.nucleus == Nucleus::C13)
    return std::nullopt;
  auto classes = detail::element_classes(mol, detail::nucleus_element(spec.nucleus));
  if (classes.size() != 1 || spec.peaks.size() != 1)
    return std::nullopt;
  LabeledRecord rec;
  rec.nucleus = spec.nucleus;
  rec.atom_indices = classes.front();
  rec.shift = peak_shift(spec.peaks.front());
  rec.solvent_class = spec.solvent_class;
  return rec;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct RawEntry {
  std::string id;
  std::string smiles;
  std::string spectrum_text;
  std::string provenance;
};

struct CurationReport {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> rejected_by_rule;
  std::map<std::string, std::size_t> accepted_by_nucleus;
};

struct PipelineResult {
  CurationReport report;
  std::vector<DatasetEntry> accepted;
  std::vector<DatasetEntry> rejected;
};

/// classify_structure -> check_nmr_validity -> consistency/heteroatom
/// extraction, in that order; the first failing verdict rejects the entry.
/// Deterministic in the input order.
inline DatasetEntry curate_entry(const RawEntry &raw, const ValidityConfig &cfg) {
  DatasetEntry entry;
  entry.id = raw.id;
  entry.smiles = raw.smiles;
  entry.provenance = raw.provenance;

  Molecule mol;
  try {
    mol = parse_smiles(raw.smiles);
  } catch (const SmilesError &e) {
    entry.verdicts.push_back(Verdict::fail("illegal_smiles", e.what()));
    return entry;
  }
  entry.molecule = mol;

  Spectrum spec;
  try {
    spec = parse_spectrum(raw.spectrum_text);
  } catch (const SpectrumError &e) {
    entry.verdicts.push_back(Verdict::fail("unparseable_spectrum", e.what()));
    return entry;
  }
  if (spec.partial) {
    entry.verdicts.push_back(Verdict::fail("partial_spectrum", "trailing fragment dropped"));
    return entry;
  }
  entry.spectra.push_back(spec);

  const bool hc_nucleus = spec.nucleus == Nucleus::H1 || spec.nucleus == Nucleus::C13;
  const StructureFlags flags = classify_structure(mol);
  if (flags.has_isotope) {
    entry.verdicts.push_back(Verdict::fail("has_isotope", "isotope label present"));
    return entry;
  }
  if (flags.is_radical) {
    entry.verdicts.push_back(Verdict::fail("is_radical", "valence outside standard set"));
    return entry;
  }
  if (flags.multi_fragment) {
    entry.verdicts.push_back(Verdict::fail("multi_fragment", "'.' in SMILES"));
    return entry;
  }
  if (hc_nucleus && flags.outside_element_whitelist) {
    entry.verdicts.push_back(
        Verdict::fail("outside_element_whitelist", "element outside C,H,O,N,S,P,F,Cl"));
    return entry;
  }
  entry.verdicts.push_back(Verdict::ok("structure"));

  Verdict nmr = check_nmr_validity(spec, cfg);
  entry.verdicts.push_back(nmr);
  if (!nmr.pass)
    return entry;

  if (hc_nucleus) {
    ConsistencyResult consistency = check_consistency(mol, spec, cfg);
    entry.verdicts.push_back(consistency.verdict);
    if (!consistency.verdict.pass)
      return entry;
    entry.targets.push_back(std::move(*consistency.target));
    entry.labeled = false;
  } else {
    auto record = extract_heteroatom_label(mol, spec);
    if (!record) {
      entry.verdicts.push_back(Verdict::fail(
          "heteroatom_consistency", "need exactly one equivalent heteroatom and one peak"));
      return entry;
    }
    entry.verdicts.push_back(Verdict::ok("heteroatom_consistency"));
    TargetShiftSet target;
    target.nucleus = record->nucleus;
    target.solvent_class = record->solvent_class;
    target.shifts.assign(record->atom_indices.size(), record->shift);
    target.atom_map = record->atom_indices;
    entry.targets.push_back(std::move(target));
    entry.labeled = true;
  }
  return entry;
}

inline PipelineResult run_pipeline(const std::vector<RawEntry> &raws, const ValidityConfig &cfg,
                                   unsigned threads = 1) {
  PipelineResult out;
  out.report.total = raws.size();
  std::vector<DatasetEntry> entries(raws.size());
  parallel_for(raws.size(), threads, [&](std::size_t i) { entries[i] = curate_entry(raws[i], cfg); });
  for (DatasetEntry &entry : entries) {
    if (entry.accepted()) {
      ++out.report.accepted;
      for (const TargetShiftSet &t : entry.targets)
        ++out.report.accepted_by_nucleus[std::string(nucleus_name(t.nucleus))];
      out.accepted.push_back(std::move(entry));
    } else {
      ++out.report.rejected;
      for (const Verdict &v : entry.verdicts)
        if (!v.pass)
          ++out.report.rejected_by_rule[v.check];
      out.rejected.push_back(std::move(entry));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset split
// ---------------------------------------------------------------------------

/// Deterministic, leakage-guarded split: entries sharing a canonical SMILES
/// always land in the same side. Group order is a seeded shuffle; the train
/// side is filled until it reaches round(ratio * n).
inline std::pair<std::vector<DatasetEntry>, std::vector<DatasetEntry>>
split_dataset(const std::vector<DatasetEntry> &entries, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("split ratio must be in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<std::string> group_keys; // first-appearance order
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::string key = canonical_smiles(entries[i].molecule);
    auto [it, fresh] = groups.emplace(std::move(key), std::vector<std::size_t>{});
    if (fresh)
      group_keys.push_back(it->first);
    it->second.push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(group_keys);
  const auto target =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(entries.size())));
  std::vector<DatasetEntry> train, test;
  for (const std::string &key : group_keys) {
    const auto &members = groups[key];
    auto &side = train.size() < target ? train : test;
    for (std::size_t idx : members)
      side.push_back(entries[idx]);
  }
  return {std::move(train), std::move(test)};
}

} // namespace shiftkit

#endif // SHIFTKIT_CURATE_HPP
