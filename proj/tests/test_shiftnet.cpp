//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "shiftkit/serialize.hpp"
#include "shiftkit/shiftnet.hpp"
#include "oracles.hpp"

using namespace shiftkit;

namespace {

const std::vector<SolventStrategy> kAllStrategies = {
    SolventStrategy::None, SolventStrategy::GlobalContext, SolventStrategy::PreBackbone,
    SolventStrategy::PostBackbone, SolventStrategy::ScalarCorrection};

std::vector<FeatureRow> random_rows(Rng &rng, std::size_t n, int dim) {
  std::vector<FeatureRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].atom_index = static_cast<int>(i);
    rows[i].features.resize(static_cast<std::size_t>(dim));
    for (double &f : rows[i].features)
      f = rng.uniform(-1.0, 1.0);
  }
  return rows;
}

} // namespace

TEST_CASE("featurize shapes and symmetry") {
  Molecule benzene = parse_smiles("c1ccccc1");
  auto rows = featurize(benzene, Nucleus::C13);
  REQUIRE(rows.size() == 6);
  for (const FeatureRow &r : rows) {
    CHECK(r.features.size() == kFeatureDim);
    CHECK(r.features == rows[0].features); // full symmetry
  }

  Molecule ethanol = parse_smiles("CCO");
  auto erows = featurize(ethanol, Nucleus::C13);
  REQUIRE(erows.size() == 2);
  CHECK(erows[0].features != erows[1].features);

  Molecule methane = parse_smiles("C");
  auto hrows = featurize(methane, Nucleus::H1);
  REQUIRE(hrows.size() == 4);
  for (const FeatureRow &r : hrows)
    CHECK(r.features == hrows[0].features);

  CHECK_THROWS_AS(featurize(ethanol, Nucleus::F19), FeaturizeError);
}

TEST_CASE("equivalent atoms always share features") {
  for (const char *smiles : {"Cc1ccc(C)cc1", "FC(F)(F)C(F)(F)F", "CC(C)C", "c1ccc2ccccc2c1"}) {
    Molecule mol = parse_smiles(smiles);
    auto rows = featurize(mol, Nucleus::C13);
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b)
        if (mol.equiv_class[static_cast<std::size_t>(rows[a].atom_index)] ==
            mol.equiv_class[static_cast<std::size_t>(rows[b].atom_index)])
          CHECK(rows[a].features == rows[b].features);
  }
}

TEST_CASE("featurize is permutation-equivariant") {
  Rng rng(11);
  Molecule mol = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  auto base = featurize(mol, Nucleus::C13);
  for (int rep = 0; rep < 4; ++rep) {
    std::vector<int> perm(mol.size());
    for (std::size_t i = 0; i < mol.size(); ++i)
      perm[i] = static_cast<int>(i);
    rng.shuffle(perm);
    Molecule shuffled = permute_atoms(mol, perm);
    auto rows = featurize(shuffled, Nucleus::C13);
    REQUIRE(rows.size() == base.size());
    for (const FeatureRow &r : base) {
      const int mapped = perm[static_cast<std::size_t>(r.atom_index)];
      bool found = false;
      for (const FeatureRow &s : rows)
        if (s.atom_index == mapped) {
          CHECK(s.features == r.features);
          found = true;
        }
      CHECK(found);
    }
  }
}

TEST_CASE("strategy None ignores the solvent; ScalarCorrection shifts uniformly") {
  Molecule mol = parse_smiles("CCO");
  auto rows = featurize(mol, Nucleus::C13);

  ToyModel none = ToyModel::init(kFeatureDim, 16, SolventStrategy::None, 5);
  auto out_a = predict(none, rows, SolventClass::CDCl3);
  auto out_b = predict(none, rows, SolventClass::DMSOd6);
  auto out_c = predict(none, rows, SolventClass::Other);
  CHECK(out_a == out_b);
  CHECK(out_a == out_c);

  ToyModel scalar = ToyModel::init(kFeatureDim, 16, SolventStrategy::ScalarCorrection, 5);
  const double b_cdcl3 = scalar.params()[scalar.bsolv_off() + 0];
  const double b_dmso = scalar.params()[scalar.bsolv_off() + 1];
  auto s_a = predict(scalar, rows, SolventClass::CDCl3);
  auto s_b = predict(scalar, rows, SolventClass::DMSOd6);
  for (std::size_t i = 0; i < s_a.size(); ++i)
    CHECK(s_a[i] - s_b[i] == Catch::Approx(b_cdcl3 - b_dmso).margin(1e-14));
}

TEST_CASE("solvent-aware strategies are generically sensitive to the tag") {
  Molecule mol = parse_smiles("CCO");
  auto rows = featurize(mol, Nucleus::C13);
  for (SolventStrategy strategy :
       {SolventStrategy::GlobalContext, SolventStrategy::PreBackbone,
        SolventStrategy::PostBackbone, SolventStrategy::ScalarCorrection}) {
    ToyModel m = ToyModel::init(kFeatureDim, 16, strategy, 21);
    auto a = predict(m, rows, SolventClass::CDCl3);
    auto b = predict(m, rows, SolventClass::DMSOd6);
    INFO(strategy_name(strategy));
    CHECK(a != b);
  }
}

TEST_CASE("equivalent atoms get bitwise-equal predictions under every strategy") {
  Molecule mol = parse_smiles("Cc1ccc(C)cc1");
  auto rows = featurize(mol, Nucleus::C13);
  for (SolventStrategy strategy : kAllStrategies) {
    ToyModel m = ToyModel::init(kFeatureDim, 24, strategy, 99);
    auto out = predict(m, rows, SolventClass::DMSOd6);
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b)
        if (mol.equiv_class[static_cast<std::size_t>(rows[a].atom_index)] ==
            mol.equiv_class[static_cast<std::size_t>(rows[b].atom_index)])
          CHECK(out[a] == out[b]);
  }
}

TEST_CASE("permuting rows permutes predictions bitwise") {
  Rng rng(3);
  auto rows = random_rows(rng, 9, kFeatureDim);
  for (SolventStrategy strategy : kAllStrategies) {
    ToyModel m = ToyModel::init(kFeatureDim, 16, strategy, 31);
    auto base = predict(m, rows, SolventClass::CDCl3);
    std::vector<int> perm(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      perm[i] = static_cast<int>(i);
    rng.shuffle(perm);
    std::vector<FeatureRow> shuffled(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      shuffled[static_cast<std::size_t>(perm[i])] = rows[i];
    auto out = predict(m, shuffled, SolventClass::CDCl3);
    INFO(strategy_name(strategy));
    for (std::size_t i = 0; i < rows.size(); ++i)
      CHECK(out[static_cast<std::size_t>(perm[i])] == base[i]);
  }
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  Rng rng(8);
  auto rows = random_rows(rng, 5, 6);
  ToyModel m = ToyModel::init(6, 4, SolventStrategy::GlobalContext, 17);
  ForwardCache cache = forward(m, rows, SolventClass::CDCl3);
  std::vector<double> grad(m.params().size(), 0.0);
  backward(m, cache, std::vector<double>(5, 0.0), grad);
  for (double g : grad)
    CHECK(g == 0.0);
}

TEST_CASE("scalar correction gradient is the upstream sum") {
  Rng rng(9);
  auto rows = random_rows(rng, 7, 5);
  ToyModel m = ToyModel::init(5, 4, SolventStrategy::ScalarCorrection, 23);
  ForwardCache cache = forward(m, rows, SolventClass::DMSOd6);
  std::vector<double> upstream(7);
  double sum = 0.0;
  for (double &u : upstream) {
    u = rng.uniform(-1.0, 1.0);
    sum += u;
  }
  std::vector<double> grad(m.params().size(), 0.0);
  backward(m, cache, upstream, grad);
  CHECK(grad[m.bsolv_off() + 1] == Catch::Approx(sum).margin(1e-12));
  CHECK(grad[m.bsolv_off() + 0] == 0.0);
  CHECK(grad[m.bsolv_off() + 2] == 0.0);
}

TEST_CASE("analytic gradients match finite differences on a tiny model") {
  Rng rng(123);
  const int d = 4;
  const int h = 3;
  for (SolventStrategy strategy : kAllStrategies) {
    INFO(strategy_name(strategy));
    ToyModel m = ToyModel::init(d, h, strategy, 555);
    auto rows = random_rows(rng, 6, d);
    std::vector<double> upstream(6);
    for (double &u : upstream)
      u = rng.uniform(-1.0, 1.0);
    auto scalar_loss = [&](const ToyModel &model) {
      auto out = predict(model, rows, SolventClass::DMSOd6);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i)
        acc += upstream[i] * out[i];
      return acc;
    };
    ForwardCache cache = forward(m, rows, SolventClass::DMSOd6);
    std::vector<double> grad(m.params().size(), 0.0);
    backward(m, cache, upstream, grad);
    const double hstep = 1e-6;
    for (std::size_t k = 0; k < m.params().size(); ++k) {
      ToyModel up = m;
      up.params()[k] += hstep;
      ToyModel down = m;
      down.params()[k] -= hstep;
      const double fd = (scalar_loss(up) - scalar_loss(down)) / (2.0 * hstep);
      CHECK(std::abs(grad[k] - fd) < 1e-5);
    }
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Rng rng(77);
  ToyModel m = ToyModel::init(kFeatureDim, 32, SolventStrategy::GlobalContext, 2027);
  // scramble params so they are not "nice" values
  for (double &p : m.params())
    p *= rng.uniform(0.5, 1.5);
  const auto path = std::filesystem::temp_directory_path() / "shiftkit_test_model.json";
  save_model(path, m);
  ToyModel loaded = load_model(path);
  std::filesystem::remove(path);
  CHECK(loaded.input_dim() == m.input_dim());
  CHECK(loaded.hidden_dim() == m.hidden_dim());
  CHECK(loaded.strategy() == m.strategy());
  REQUIRE(loaded.params().size() == m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i)
    CHECK(loaded.params()[i] == m.params()[i]);

  Molecule mol = parse_smiles("CCO");
  auto rows = featurize(mol, Nucleus::C13);
  CHECK(predict(loaded, rows, SolventClass::Other) == predict(m, rows, SolventClass::Other));
}
