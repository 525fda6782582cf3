//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "shiftkit/serialize.hpp"
#include "shiftkit/trainer.hpp"
#include "oracles.hpp"

using namespace shiftkit;

namespace {

/// Small synthetic setup shared by the loop tests.
SynthOptions small_synth() {
  SynthOptions opt;
  opt.n_labeled = 20;
  opt.n_weak = 60;
  opt.n_test = 40;
  opt.n_paired = 6;
  opt.seed = 3;
  opt.labeled_broad_fraction = 0.0; // keep the family gap sharp for assertions
  return opt;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden_dim = 8;
  cfg.seed = 5;
  return cfg;
}

} // namespace

TEST_CASE("adamw single step matches hand arithmetic") {
  std::vector<double> params = {1.0, -2.0};
  std::vector<double> grad = {0.5, -1.0};
  const double lr = 0.1, beta1 = 0.9, beta2 = 0.99, eps = 1e-6, wd = 0.01;
  AdamW opt(2, beta1, beta2, eps, wd);
  opt.step(params, grad, lr);

  for (int i = 0; i < 2; ++i) {
    const double g = grad[static_cast<std::size_t>(i)];
    const double theta = i == 0 ? 1.0 : -2.0;
    const double m = (1.0 - beta1) * g;
    const double v = (1.0 - beta2) * g * g;
    const double mhat = m / (1.0 - beta1);
    const double vhat = v / (1.0 - beta2);
    const double expected = theta - lr * (mhat / (std::sqrt(vhat) + eps) + wd * theta);
    CHECK(params[static_cast<std::size_t>(i)] == Catch::Approx(expected).margin(1e-12));
  }
}

TEST_CASE("learning rate schedule: warmup then linear decay") {
  const std::size_t total = 100;
  const double peak = 4e-4;
  // 3% of 100 -> 3 warmup steps
  CHECK(lr_at_step(0, total, peak, 0.03) == Catch::Approx(peak / 3.0));
  CHECK(lr_at_step(1, total, peak, 0.03) == Catch::Approx(2.0 * peak / 3.0));
  CHECK(lr_at_step(2, total, peak, 0.03) == Catch::Approx(peak));
  // decay hits zero only past the final step
  CHECK(lr_at_step(3, total, peak, 0.03) == Catch::Approx(peak * 97.0 / 97.0));
  CHECK(lr_at_step(99, total, peak, 0.03) == Catch::Approx(peak * 1.0 / 97.0));
  CHECK(lr_at_step(99, total, peak, 0.03) > 0.0);
}

TEST_CASE("train config defaults match the published table") {
  const TrainConfig cfg;
  CHECK(cfg.lambda == 16.0);
  CHECK(cfg.batch_labeled == 4);
  CHECK(cfg.batch_weak == 16);
  CHECK(cfg.peak_lr == 4e-4);
  CHECK(cfg.warmup_ratio == 0.03);
  CHECK(cfg.adam_beta1 == 0.9);
  CHECK(cfg.adam_beta2 == 0.99);
  CHECK(cfg.adam_eps == 1e-6);
  CHECK(cfg.weight_decay == 1e-4);
  CHECK(cfg.grad_clip_norm == 1.0);
  CHECK(cfg.epochs == 10);
  CHECK(cfg.loss_kind == LossKind::mae());
}

TEST_CASE("train config from toml") {
  TomlTable toml = TomlTable::parse("lambda = 4.0\npeak_lr = 0.01\nepochs = 3\n"
                                    "loss_kind = \"huber\"\nhuber_delta = 2.0\nseed = 11\n");
  TrainConfig cfg = TrainConfig::from_toml(toml);
  CHECK(cfg.lambda == 4.0);
  CHECK(cfg.peak_lr == 0.01);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.loss_kind == LossKind::huber(2.0));
  CHECK(cfg.seed == 11);
  CHECK(cfg.batch_weak == 16); // untouched default
}

TEST_CASE("prepare_mol aligns labeled targets with feature rows") {
  DatasetEntry entry;
  entry.id = "x";
  entry.smiles = "CCO";
  entry.molecule = parse_smiles("CCO");
  TargetShiftSet target;
  target.nucleus = Nucleus::C13;
  target.solvent_class = SolventClass::CDCl3;
  target.shifts = {18.0, 58.0};     // sorted canonical form
  target.atom_map = {{0, 1}};       // atom 0 -> 18.0, atom 1 -> 58.0
  entry.targets.push_back(target);
  entry.labeled = true;

  PreparedMol mol = prepare_mol(entry, entry.targets[0]);
  REQUIRE(mol.rows.size() == 2);
  CHECK(mol.labeled);
  // rows come in atom-index order
  CHECK(mol.rows[0].atom_index == 0);
  CHECK(mol.rows[1].atom_index == 1);
  CHECK(mol.targets == std::vector<double>({18.0, 58.0}));

  entry.targets[0].atom_map = {{1, 0}}; // swap assignment
  PreparedMol swapped = prepare_mol(entry, entry.targets[0]);
  CHECK(swapped.targets == std::vector<double>({58.0, 18.0}));

  // weak version must match the predicted-atom count
  TargetShiftSet weak = entry.targets[0];
  weak.atom_map.reset();
  weak.shifts = {18.0};
  CHECK_THROWS_AS(prepare_mol(entry, weak), TrainError);
}

TEST_CASE("training rejects the concave test kind and empty streams") {
  TrainConfig cfg = small_config();
  cfg.loss_kind = LossKind::sqrt_test();
  ToyModel model = ToyModel::init(kFeatureDim, 8, SolventStrategy::None, 1);
  SynthData data = synth_generate(small_synth());
  auto labeled = prepare_dataset(data.labeled);
  CHECK_THROWS_AS(train(cfg, labeled, {}, model), TrainError);
  TrainConfig ok = small_config();
  CHECK_THROWS_AS(train(ok, {}, {}, model), TrainError);
}

TEST_CASE("lambda zero reproduces the supervised-only trajectory bitwise") {
  SynthData data = synth_generate(small_synth());
  auto labeled = prepare_dataset(data.labeled);
  auto weak = prepare_dataset(data.weak);

  TrainConfig cfg = small_config();
  cfg.lambda = 0.0;
  ToyModel init = ToyModel::init(kFeatureDim, cfg.hidden_dim, SolventStrategy::None, 2);
  TrainResult with_weak_present = train(cfg, labeled, weak, init);
  TrainResult without_weak = train(cfg, labeled, {}, init);
  REQUIRE(with_weak_present.steps == without_weak.steps);
  CHECK(with_weak_present.model.params() == without_weak.model.params());
}

TEST_CASE("training is deterministic and loss stays finite") {
  SynthData data = synth_generate(small_synth());
  auto labeled = prepare_dataset(data.labeled);
  auto weak = prepare_dataset(data.weak);
  TrainConfig cfg = small_config();
  ToyModel init = ToyModel::init(kFeatureDim, cfg.hidden_dim, SolventStrategy::None, 2);
  TrainResult a = train(cfg, labeled, weak, init);
  TrainResult b = train(cfg, labeled, weak, init);
  CHECK(a.model.params() == b.model.params());
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].total == b.curve[i].total);
    CHECK(std::isfinite(a.curve[i].total));
  }
  // curve csv round-trips the exact numbers in text form
  std::string csv = curve_to_csv(a.curve);
  CHECK(csv.rfind("step,total,supervised,weak\n", 0) == 0);
}

TEST_CASE("doubling lambda doubles the weak term at a frozen model state") {
  SynthData data = synth_generate(small_synth());
  auto labeled = prepare_dataset(data.labeled);
  auto weak = prepare_dataset(data.weak);
  ToyModel model = ToyModel::init(kFeatureDim, 8, SolventStrategy::None, 4);

  std::vector<LabeledSample> lbatch;
  for (std::size_t i = 0; i < 3; ++i)
    lbatch.push_back({predict(model, labeled[i].rows, labeled[i].solvent), labeled[i].targets});
  std::vector<WeakSample> wbatch;
  for (std::size_t i = 0; i < 5; ++i)
    wbatch.push_back({predict(model, weak[i].rows, weak[i].solvent), weak[i].targets});

  BatchLoss l1 = batch_loss(LossKind::mae(), lbatch, wbatch, 8.0);
  BatchLoss l2 = batch_loss(LossKind::mae(), lbatch, wbatch, 16.0);
  CHECK(l1.supervised == l2.supervised);
  CHECK(l1.weak == l2.weak);
  CHECK(l2.total - l2.supervised == Catch::Approx(2.0 * (l1.total - l1.supervised)));
}

TEST_CASE("evaluate: pinned examples") {
  SECTION("perfect predictor scores zero everywhere") {
    ToyModel model = ToyModel::init(kFeatureDim, 8, SolventStrategy::None, 6);
    SynthData data = synth_generate(small_synth());
    auto mols = prepare_dataset(data.test);
    for (PreparedMol &m : mols)
      m.targets = predict(model, m.rows, m.solvent); // make the model perfect
    EvalReport r = evaluate(model, mols);
    CHECK(r.overall.mae_atom == 0.0);
    CHECK(r.overall.rmse_atom == 0.0);
    CHECK(r.overall.mae_mol == 0.0);
    CHECK(r.overall.rmse_mol == 0.0);
  }
  SECTION("constant +1 bias gives mae_atom exactly 1") {
    ToyModel model = ToyModel::init(kFeatureDim, 8, SolventStrategy::None, 6);
    SynthData data = synth_generate(small_synth());
    auto mols = prepare_dataset(data.test);
    for (PreparedMol &m : mols) {
      m.targets = predict(model, m.rows, m.solvent);
      for (double &t : m.targets)
        t -= 1.0;
    }
    EvalReport r = evaluate(model, mols);
    CHECK(r.overall.mae_atom == Catch::Approx(1.0).margin(1e-12));
    CHECK(r.overall.mae_mol == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("single molecule preds {0,1} vs targets {1,2}") {
    // Build the pinned instance directly.
    PreparedMol m;
    m.labeled = true;
    m.rows.resize(2);
    m.targets = {1.0, 2.0};
    ToyModel model(2, 2, SolventStrategy::None); // zero params -> predicts 0
    m.rows[0].features = {0.0, 0.0};
    m.rows[1].features = {0.0, 0.0};
    // force predictions {0, 1} through the skip path: x = [0,0] and [1,0],
    // w_skip = [1, 0]
    m.rows[1].features[0] = 1.0;
    model.params()[model.wskip_off()] = 1.0;
    EvalReport r = evaluate(model, {m});
    CHECK(r.overall.mae_mol == Catch::Approx(1.0));
    CHECK(r.overall.rmse_mol == Catch::Approx(1.0));
    CHECK(r.overall.mae_atom == Catch::Approx(1.0));
  }
}

TEST_CASE("evaluate: mae_mol never exceeds mae_atom on labeled data") {
  Rng rng(15);
  ToyModel model = ToyModel::init(kFeatureDim, 8, SolventStrategy::None, 7);
  SynthData data = synth_generate(small_synth());
  auto mols = prepare_dataset(data.labeled);
  EvalReport r = evaluate(model, mols);
  CHECK(r.overall.mae_mol <= r.overall.mae_atom + 1e-12);

  // and L_mol agrees with an independent sorted-loss aggregation
  double abs_sum = 0.0;
  std::size_t atoms = 0;
  for (const PreparedMol &m : mols) {
    auto preds = predict(model, m.rows, m.solvent);
    abs_sum += sorted_loss(LossKind::mae(), preds, m.targets).loss;
    atoms += preds.size();
  }
  CHECK(r.overall.mae_mol == Catch::Approx(abs_sum / static_cast<double>(atoms)));
}

TEST_CASE("synthetic data: determinism and solvent construction") {
  SynthOptions opt = small_synth();
  SynthData a = synth_generate(opt);
  SynthData b = synth_generate(opt);
  REQUIRE(a.labeled.size() == b.labeled.size());
  for (std::size_t i = 0; i < a.labeled.size(); ++i)
    CHECK(to_json(a.labeled[i]) == to_json(b.labeled[i]));
  CHECK(a.weak.size() == opt.n_weak);
  CHECK(a.paired.size() == opt.n_paired * 3);

  // zero noise: paired entries differ exactly by the injected offsets
  SynthOptions clean = small_synth();
  clean.noise_sigma = 0.0;
  clean.weak_noise_sigma = 0.0;
  SynthData c = synth_generate(clean);
  for (std::size_t i = 0; i < c.paired.size(); i += 3) {
    const auto &cdcl3 = c.paired[i].targets[0].shifts;
    const auto &dmso = c.paired[i + 1].targets[0].shifts;
    const auto &other = c.paired[i + 2].targets[0].shifts;
    REQUIRE(cdcl3.size() == dmso.size());
    for (std::size_t k = 0; k < cdcl3.size(); ++k) {
      CHECK(dmso[k] - cdcl3[k] == Catch::Approx(0.5).margin(1e-12));
      CHECK(other[k] - cdcl3[k] == Catch::Approx(-0.3).margin(1e-12));
    }
  }
  // labeled split sticks to the narrow family: no aromatic atoms
  for (const DatasetEntry &e : a.labeled)
    for (const Atom &atom : e.molecule.atoms)
      CHECK_FALSE(atom.aromatic);
  // weak split is broader: aromatics occur
  bool any_aromatic = false;
  for (const DatasetEntry &e : a.weak)
    for (const Atom &atom : e.molecule.atoms)
      any_aromatic = any_aromatic || atom.aromatic;
  CHECK(any_aromatic);
}

TEST_CASE("noise-free supervised training converges to the generator") {
  SynthOptions opt;
  opt.n_labeled = 300;
  opt.n_weak = 1;
  opt.n_test = 80;
  opt.n_paired = 1;
  opt.seed = 9;
  opt.noise_sigma = 0.0;
  opt.weak_noise_sigma = 0.0;
  opt.labeled_broad = true;
  opt.solvent_offsets = {0.0, 0.0, 0.0};
  SynthData data = synth_generate(opt);
  auto labeled = prepare_dataset(data.labeled);
  auto test = prepare_dataset(data.test);

  TrainConfig cfg;
  cfg.lambda = 0.0;
  cfg.loss_kind = LossKind::mse();
  cfg.batch_labeled = 16;
  cfg.peak_lr = 0.02;
  cfg.epochs = 2000;
  cfg.hidden_dim = 8;
  cfg.seed = 1;
  cfg.weight_decay = 0.0; // pure fit: regularization would bias the optimum
  ToyModel init = ToyModel::init(kFeatureDim, cfg.hidden_dim, SolventStrategy::None, 3);
  TrainResult result = train(cfg, labeled, {}, std::move(init));
  EvalReport r = evaluate(result.model, test);
  CHECK(r.overall.mae_atom < 1e-3);
}
