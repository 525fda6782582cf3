//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON (de)serialization for every record that crosses a file boundary.
// Dataset files are JSON Lines with a schema header line.

#ifndef SHIFTKIT_SERIALIZE_HPP
#define SHIFTKIT_SERIALIZE_HPP

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftkit/chemgraph.hpp"
#include "shiftkit/curate.hpp"
#include "shiftkit/shiftnet.hpp"
#include "shiftkit/specparse.hpp"
#include "shiftkit/trainer.hpp"
#include "shiftkit/util.hpp"

namespace shiftkit {

using json = nlohmann::json;

inline constexpr std::string_view kDatasetSchema = "shiftkit.dataset.v1";

// --- Molecule ---------------------------------------------------------------

inline json to_json(const Molecule &mol) {
  json atoms = json::array();
  for (const Atom &a : mol.atoms) {
    json atom;
    atom["el"] = std::string(element_symbol(a.element));
    atom["q"] = a.formal_charge;
    atom["h"] = a.implicit_h;
    atom["ar"] = a.aromatic;
    if (a.isotope_label)
      atom["iso"] = *a.isotope_label;
    if (a.explicit_h)
      atom["eh"] = *a.explicit_h;
    atoms.push_back(std::move(atom));
  }
  json bonds = json::array();
  for (const Bond &b : mol.bonds)
    bonds.push_back({b.a, b.b, static_cast<int>(b.order)});
  json out;
  out["atoms"] = std::move(atoms);
  out["bonds"] = std::move(bonds);
  out["multi_fragment"] = mol.multi_fragment;
  out["stereo_ignored"] = mol.stereo_ignored;
  return out;
}

inline Molecule molecule_from_json(const json &j) {
  Molecule mol;
  for (const json &aj : j.at("atoms")) {
    Atom a;
    auto el = element_from_symbol(aj.at("el").get<std::string>());
    if (!el)
      throw std::runtime_error("unknown element in molecule json");
    a.element = *el;
    a.formal_charge = aj.at("q").get<int>();
    a.implicit_h = aj.at("h").get<int>();
    a.aromatic = aj.at("ar").get<bool>();
    if (aj.contains("iso"))
      a.isotope_label = aj.at("iso").get<int>();
    if (aj.contains("eh"))
      a.explicit_h = aj.at("eh").get<int>();
    mol.atoms.push_back(a);
  }
  for (const json &bj : j.at("bonds"))
    mol.bonds.push_back({bj.at(0).get<int>(), bj.at(1).get<int>(),
                         static_cast<BondOrder>(bj.at(2).get<int>())});
  mol.multi_fragment = j.at("multi_fragment").get<bool>();
  mol.stereo_ignored = j.at("stereo_ignored").get<bool>();
  mol.finalize();
  return mol;
}

// --- Spectrum ----------------------------------------------------------------

inline json to_json(const Peak &p) {
  json out;
  out["lo"] = p.shift_low;
  out["hi"] = p.shift_high;
  out["mult"] = std::string(multiplicity_name(p.multiplicity));
  if (p.integration)
    out["nH"] = *p.integration;
  if (!p.j_values.empty())
    out["j"] = p.j_values;
  return out;
}

inline Peak peak_from_json(const json &j) {
  Peak p;
  p.shift_low = j.at("lo").get<double>();
  p.shift_high = j.at("hi").get<double>();
  const std::string mult = j.at("mult").get<std::string>();
  p.multiplicity = Multiplicity::unknown;
  for (std::size_t i = 0; i < kMultiplicityNames.size(); ++i)
    if (kMultiplicityNames[i] == mult)
      p.multiplicity = static_cast<Multiplicity>(i);
  if (j.contains("nH"))
    p.integration = j.at("nH").get<int>();
  if (j.contains("j"))
    p.j_values = j.at("j").get<std::vector<double>>();
  return p;
}

inline json to_json(const Spectrum &s) {
  json out;
  out["nucleus"] = std::string(nucleus_name(s.nucleus));
  if (s.frequency_mhz)
    out["frequency_mhz"] = *s.frequency_mhz;
  out["solvent_raw"] = s.solvent_raw;
  out["solvent_class"] = std::string(solvent_class_name(s.solvent_class));
  json peaks = json::array();
  for (const Peak &p : s.peaks)
    peaks.push_back(to_json(p));
  out["peaks"] = std::move(peaks);
  if (s.partial)
    out["partial"] = true;
  return out;
}

inline SolventClass solvent_class_from_name(const std::string &name) {
  for (SolventClass c : {SolventClass::CDCl3, SolventClass::DMSOd6, SolventClass::Other,
                         SolventClass::Unspecified})
    if (solvent_class_name(c) == name)
      return c;
  throw std::runtime_error("unknown solvent class '" + name + "'");
}

inline Spectrum spectrum_from_json(const json &j) {
  Spectrum s;
  auto nuc = nucleus_from_name(j.at("nucleus").get<std::string>());
  if (!nuc)
    throw std::runtime_error("unknown nucleus in spectrum json");
  s.nucleus = *nuc;
  if (j.contains("frequency_mhz"))
    s.frequency_mhz = j.at("frequency_mhz").get<double>();
  s.solvent_raw = j.at("solvent_raw").get<std::string>();
  s.solvent_class = solvent_class_from_name(j.at("solvent_class").get<std::string>());
  for (const json &pj : j.at("peaks"))
    s.peaks.push_back(peak_from_json(pj));
  s.partial = j.value("partial", false);
  return s;
}

// --- Targets, verdicts, entries ----------------------------------------------

inline json to_json(const TargetShiftSet &t) {
  json out;
  out["nucleus"] = std::string(nucleus_name(t.nucleus));
  out["shifts"] = t.shifts;
  if (t.atom_map)
    out["atom_map"] = *t.atom_map;
  out["solvent_class"] = std::string(solvent_class_name(t.solvent_class));
  return out;
}

inline TargetShiftSet target_from_json(const json &j) {
  TargetShiftSet t;
  t.nucleus = *nucleus_from_name(j.at("nucleus").get<std::string>());
  t.shifts = j.at("shifts").get<std::vector<double>>();
  if (j.contains("atom_map"))
    t.atom_map = j.at("atom_map").get<std::vector<int>>();
  t.solvent_class = solvent_class_from_name(j.at("solvent_class").get<std::string>());
  return t;
}

inline json to_json(const Verdict &v) {
  json out;
  out["check"] = v.check;
  out["pass"] = v.pass;
  if (!v.detail.empty())
    out["detail"] = v.detail;
  if (v.peak_index >= 0)
    out["peak_index"] = v.peak_index;
  return out;
}

inline Verdict verdict_from_json(const json &j) {
  Verdict v;
  v.check = j.at("check").get<std::string>();
  v.pass = j.at("pass").get<bool>();
  v.detail = j.value("detail", "");
  v.peak_index = j.value("peak_index", -1);
  return v;
}

inline json to_json(const DatasetEntry &e) {
  json out;
  out["id"] = e.id;
  out["smiles"] = e.smiles;
  out["molecule"] = to_json(e.molecule);
  json spectra = json::array();
  for (const Spectrum &s : e.spectra)
    spectra.push_back(to_json(s));
  out["spectra"] = std::move(spectra);
  json targets = json::array();
  for (const TargetShiftSet &t : e.targets)
    targets.push_back(to_json(t));
  out["targets"] = std::move(targets);
  out["labeled"] = e.labeled;
  json verdicts = json::array();
  for (const Verdict &v : e.verdicts)
    verdicts.push_back(to_json(v));
  out["verdicts"] = std::move(verdicts);
  out["provenance"] = e.provenance;
  return out;
}

inline DatasetEntry entry_from_json(const json &j) {
  DatasetEntry e;
  e.id = j.at("id").get<std::string>();
  e.smiles = j.at("smiles").get<std::string>();
  e.molecule = molecule_from_json(j.at("molecule"));
  for (const json &sj : j.at("spectra"))
    e.spectra.push_back(spectrum_from_json(sj));
  for (const json &tj : j.at("targets"))
    e.targets.push_back(target_from_json(tj));
  e.labeled = j.at("labeled").get<bool>();
  for (const json &vj : j.at("verdicts"))
    e.verdicts.push_back(verdict_from_json(vj));
  e.provenance = j.at("provenance").get<std::string>();
  return e;
}

inline json to_json(const CurationReport &r) {
  json out;
  out["total"] = r.total;
  out["accepted"] = r.accepted;
  out["rejected"] = r.rejected;
  out["rejected_by_rule"] = r.rejected_by_rule;
  out["accepted_by_nucleus"] = r.accepted_by_nucleus;
  return out;
}

// --- Reports ---------------------------------------------------------------

inline json to_json(const MetricBlock &b) {
  json out;
  auto put = [&](const char *key, double v) {
    if (std::isfinite(v))
      out[key] = v;
  };
  put("mae_atom", b.mae_atom);
  put("rmse_atom", b.rmse_atom);
  put("mae_mol", b.mae_mol);
  put("rmse_mol", b.rmse_mol);
  out["molecules"] = b.molecules;
  out["atoms"] = b.atoms;
  out["labeled_atoms"] = b.labeled_atoms;
  return out;
}

inline json to_json(const EvalReport &r) {
  json out;
  out["schema"] = "shiftkit.eval.v1";
  json nuc = json::object();
  for (const auto &[key, block] : r.per_nucleus)
    nuc[key] = to_json(block);
  out["per_nucleus"] = std::move(nuc);
  json solv = json::object();
  for (const auto &[key, block] : r.per_solvent)
    solv[key] = to_json(block);
  out["per_solvent"] = std::move(solv);
  out["overall"] = to_json(r.overall);
  return out;
}

inline json to_json(const AblationReport &r) {
  json out;
  out["schema"] = "shiftkit.ablation.v1";
  out["seeds"] = r.seeds;
  out["steps_budget"] = r.steps_budget;
  json table = json::array();
  for (const AblationRow &row : r.table)
    table.push_back({{"config", row.config},
                     {"mae_atom", row.mae_atom},
                     {"rmse_atom", row.rmse_atom},
                     {"mae_mol", row.mae_mol},
                     {"rmse_mol", row.rmse_mol}});
  out["table"] = std::move(table);
  json sweep = json::array();
  for (const SweepPoint &p : r.lambda_sweep)
    sweep.push_back({{"lambda", p.lambda}, {"mae_atom", p.mae_atom}, {"mae_mol", p.mae_mol}});
  out["lambda_sweep"] = std::move(sweep);
  return out;
}

inline json to_json(const CrossSolventReport &r) {
  json cells = json::object();
  for (const auto &[key, cell] : r.cells)
    cells[key] = {{"mae", cell.mae}, {"atoms", cell.atoms}};
  return cells;
}

inline json to_json(const SolventReport &r) {
  json out;
  out["schema"] = "shiftkit.solvent.v1";
  out["seeds"] = r.seeds;
  json strategies = json::array();
  for (const SolventStrategyResult &s : r.strategies) {
    json entry;
    entry["strategy"] = s.strategy;
    entry["mae_mol_per_class"] = s.mae_mol_per_class;
    entry["cross_solvent"] = to_json(s.cross);
    strategies.push_back(std::move(entry));
  }
  out["strategies"] = std::move(strategies);
  return out;
}

// --- Model checkpoints ---------------------------------------------------------

/// Versioned checkpoint with explicit layout. nlohmann serializes doubles
/// with shortest round-trip precision, so save/load is bit-exact.
inline json to_json(const ToyModel &model) {
  json out;
  out["schema"] = std::string(kModelSchema);
  out["input_dim"] = model.input_dim();
  out["hidden_dim"] = model.hidden_dim();
  out["strategy"] = std::string(strategy_name(model.strategy()));
  out["params"] = model.params();
  return out;
}

inline ToyModel model_from_json(const json &j) {
  const std::string schema = j.at("schema").get<std::string>();
  if (schema != kModelSchema)
    throw std::runtime_error("unsupported model schema '" + schema + "'");
  auto strategy = strategy_from_name(j.at("strategy").get<std::string>());
  if (!strategy)
    throw std::runtime_error("unknown solvent strategy in checkpoint");
  ToyModel model(j.at("input_dim").get<int>(), j.at("hidden_dim").get<int>(), *strategy);
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != model.params().size())
    throw std::runtime_error("checkpoint parameter count mismatch");
  model.params() = std::move(params);
  return model;
}

inline void save_model(const std::filesystem::path &path, const ToyModel &model) {
  atomic_write_file(path, to_json(model).dump() + "\n");
}

inline ToyModel load_model(const std::filesystem::path &path) {
  return model_from_json(json::parse(read_file(path)));
}

// --- JSONL dataset files -------------------------------------------------------

inline std::string dataset_to_jsonl(const std::vector<DatasetEntry> &entries) {
  std::string out;
  out += json{{"schema", std::string(kDatasetSchema)}}.dump();
  out += '\n';
  for (const DatasetEntry &e : entries) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<DatasetEntry> dataset_from_jsonl(const std::string &content) {
  std::istringstream in(content);
  std::string line;
  std::vector<DatasetEntry> entries;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    json j = json::parse(line);
    if (!header_seen) {
      header_seen = true;
      if (!j.contains("schema"))
        throw std::runtime_error("dataset file lacks a schema header line");
      const std::string schema = j.at("schema").get<std::string>();
      if (schema != kDatasetSchema)
        throw std::runtime_error("unsupported dataset schema '" + schema + "'");
      continue;
    }
    entries.push_back(entry_from_json(j));
  }
  if (!header_seen)
    throw std::runtime_error("empty dataset file");
  return entries;
}

} // namespace shiftkit

#endif // SHIFTKIT_SERIALIZE_HPP
