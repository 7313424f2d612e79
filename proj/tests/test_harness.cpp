/**
 * Copyright 2026 The aroface Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aroface/error.hpp"
#include "aroface/gradcheck.hpp"
#include "aroface/metrics.hpp"
#include "aroface/report.hpp"
#include "aroface/training.hpp"
#include "support.hpp"

using namespace aroface;
using namespace aroface::testing;
namespace fs = std::filesystem;

TEST_CASE("config text parsing, overrides and round trip") {
  const RunConfig cfg = parse_config(
      "# comment\n"
      "seed = 42\n"
      "train.epochs=3   # trailing comment\n"
      "loss.variant = cosface\n"
      "budget.scale = 0.02\n"
      "eval.far = 0.1, 0.01\n"
      "model.stages = 4x3x2, 6x3x2\n"
      "pgd.components = rotation+scale\n");
  CHECK(cfg.seed == 42);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.margin.variant == MarginVariant::kCosine);
  CHECK(cfg.pgd.budget.max_scale_deviation == 0.02);
  CHECK(cfg.far_list == std::vector<double>{0.1, 0.01});
  CHECK(cfg.model.stages.size() == 2);
  CHECK(cfg.model.stages[1].out_channels == 6);
  CHECK(cfg.pgd.active == std::array<bool, 4>{true, false, false, true});

  const RunConfig again = parse_config(cfg.to_text());
  CHECK(again.to_text() == cfg.to_text());
  for (const auto& key : RunConfig::keys()) CHECK(again.get(key) == cfg.get(key));

  RunConfig odd;
  odd.set("optim.lr", "0.1234567890123456789");
  CHECK(parse_config(odd.to_text()).optim.lr == odd.optim.lr);

  CHECK_THROWS_AS(parse_config("no_such.key = 1\n"), ContractError);
  CHECK_THROWS_AS(parse_config("seed\n"), ContractError);
  CHECK_THROWS_AS(parse_config("train.epochs = two\n"), ContractError);
  CHECK_THROWS_AS(parse_config("train.mode = sideways\n"), ContractError);
  try {
    parse_config("seed = 1\n\nbogus = 2\n");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  RunConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.template_path = fixture("does_not_exist.txt");
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.template_path.clear();
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.far_list = {0.1, 1.0};
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.train_path = "/nonexistent/train";
  cfg.test_path = "/nonexistent/test";
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("TAR threshold is the ceil(far * N)-th largest impostor score") {
  const std::vector<double> impostor{0.1, 0.5, 0.2, 0.9, 0.3, 0.4, 0.0, 0.6, 0.7, 0.8};
  const std::vector<double> genuine{0.95, 0.85, 0.75, 0.9};
  const std::vector<double> fars{0.5, 0.1, 0.01};
  const auto r = tar_at_far(genuine, impostor, fars);
  REQUIRE(r.size() == 3);
  CHECK(r[0].threshold == 0.5);
  CHECK(r[0].tar == 1.0);
  CHECK(r[1].threshold == 0.9);
  CHECK(r[1].tar == 0.25);
  CHECK(r[1].reliable);
  CHECK_FALSE(r[2].reliable);
  const std::vector<double> bad{0.0};
  CHECK_THROWS_AS(tar_at_far(genuine, impostor, bad), ContractError);
}

TEST_CASE("TAR is nonincreasing as FAR shrinks") {
  RngStream rng(31, 0);
  std::vector<double> genuine(300), impostor(5000);
  for (double& g : genuine) g = 0.5 + 0.2 * rng.normal();
  for (double& s : impostor) s = 0.2 * rng.normal();
  const std::vector<double> fars{0.5, 0.2, 0.1, 0.05, 0.01, 0.001};
  const auto r = tar_at_far(genuine, impostor, fars);
  for (std::size_t k = 1; k < r.size(); ++k) {
    CHECK(r[k].tar <= r[k - 1].tar);
    CHECK(r[k].threshold >= r[k - 1].threshold);
  }
}

TEST_CASE("random embeddings give chance-level rank-1") {
  const int classes = 20, per_class = 20;
  ModelSpec spec;
  spec.kind = ExtractorKind::kMlp;
  spec.input = {2, 2};
  spec.embedding_dim = 16;
  spec.num_classes = classes;
  const ModelParams params = init_model(spec, 3);
  Dataset ds{classes, 1, {2, 2}, {}};
  std::vector<std::vector<double>> emb;
  RngStream rng(32, 0);
  for (int c = 0; c < classes; ++c) {
    for (int n = 0; n < per_class; ++n) {
      Sample s;
      s.id = static_cast<std::uint64_t>(c * per_class + n);
      s.label = c;
      s.image = ImageTensor(1, {2, 2});
      ds.samples.push_back(s);
      std::vector<double> z(16);
      double norm = 0.0;
      for (double& v : z) v = rng.normal(), norm += v * v;
      for (double& v : z) v /= std::sqrt(norm);
      emb.push_back(z);
    }
  }
  const SetMetrics m = score_embeddings(params, ds, emb, emb, {0.1});
  const double probes = classes * per_class / 2.0;
  const double p = 1.0 / classes;
  CHECK(std::abs(m.rank1 - p) <= 3.0 * std::sqrt(p * (1 - p) / probes));
  CHECK(m.rank5 >= m.rank1);
  CHECK(m.genuine_pairs == static_cast<std::size_t>(classes * per_class * (per_class - 1) / 2));
  CHECK(m.genuine_pairs + m.impostor_pairs == static_cast<std::size_t>(400 * 399 / 2));
}

TEST_CASE("evaluation: zero-std spec matches aligned metrics exactly") {
  const RunConfig cfg = tiny_config();
  const Benchmark bench = prepare_benchmark(cfg);
  const ModelParams params = init_model(model_spec_for(cfg, bench.test), 4);
  const EvalReport r = evaluate(params, bench.test, PerturbSpec{}, cfg.far_list, 5);
  CHECK(eval_report_json(r).at("aligned") == eval_report_json(r).at("perturbed"));
  CHECK(r.accuracy_gap == 0.0);
  CHECK(r.rank1_gap == 0.0);
  const EvalReport p = evaluate(params, bench.test, PerturbSpec{0.1, 1.0, 0.05}, cfg.far_list, 5);
  CHECK(p.aligned.rank5 >= p.aligned.rank1);
  CHECK(p.perturbed.rank5 >= p.perturbed.rank1);
  CHECK(p.accuracy_gap == p.aligned.accuracy - p.perturbed.accuracy);
  for (const SetMetrics* m : {&p.aligned, &p.perturbed}) {
    CHECK(m->accuracy >= 0.0);
    CHECK(m->accuracy <= 1.0);
    for (const auto& t : m->tar) CHECK((t.tar >= 0.0 && t.tar <= 1.0));
  }
  CHECK_THROWS_AS(evaluate(params, Dataset{}, PerturbSpec{}, cfg.far_list, 5), ContractError);
  CHECK_THROWS_AS(evaluate(params, bench.test, PerturbSpec{}, {1.5}, 5), ContractError);
}

TEST_CASE("training is reproducible across worker counts") {
  RunConfig cfg = tiny_config();
  cfg.mode = TrainMode::kAroface;
  const Benchmark bench = prepare_benchmark(cfg);
  std::string reference;
  for (int threads : {1, 2, 4}) {
    cfg.threads = threads;
    const ExperimentRow row = run_experiment("run", cfg, bench, TrainMode::kAroface);
    const std::string dump = experiments_json({row}).dump();
    if (reference.empty()) reference = dump;
    CHECK(dump == reference);
  }
  cfg.threads = 1;
  const TrainResult a = train(cfg, bench.train, bench.tpl, TrainMode::kBaseline);
  const TrainResult b = train(cfg, bench.train, bench.tpl, TrainMode::kBaseline);
  CHECK(a.params == b.params);
  CHECK(a.iterations == 2 * 4);
  CHECK(a.curve.size() == static_cast<std::size_t>(a.iterations));
  CHECK(a.curve.front().lr == cfg.optim.lr);
  for (const auto& pt : a.curve) CHECK(pt.l1 == 0.0);
}

TEST_CASE("zero budget aroface training warps nothing") {
  RunConfig cfg = tiny_config();
  cfg.pgd.budget = {0.0, 0.0, 0.0, 0.0};
  cfg.pgd.init_other_std = 0.0;
  cfg.pgd.init_scale_std = 0.0;
  const Benchmark bench = prepare_benchmark(cfg);
  int batches = 0;
  TrainHooks hooks;
  hooks.on_augmented = [&](std::int64_t, const std::vector<const Sample*>& batch, const AugmentedBatch& adv) {
    ++batches;
    REQUIRE(adv.images.size() == batch.size());
    for (std::size_t n = 0; n < batch.size(); ++n) {
      CHECK(adv.images[n] == batch[n]->image);
      CHECK(adv.results[n].theta_star == AffineParams::identity());
    }
  };
  const TrainResult r = train(cfg, bench.train, bench.tpl, TrainMode::kAroface, hooks);
  CHECK(batches == r.iterations);
  for (const auto& pt : r.curve) CHECK(pt.l1 == pt.l2);
}

TEST_CASE("divergent training aborts naming the iteration") {
  RunConfig cfg = tiny_config();
  cfg.optim.lr = 1e300;
  const Benchmark bench = prepare_benchmark(cfg);
  try {
    train(cfg, bench.train, bench.tpl, TrainMode::kAroface);
    FAIL("expected a numerical abort");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("k = 0 trains on the random initial warps") {
  RunConfig cfg = tiny_config();
  cfg.pgd.k = 0;
  const Benchmark bench = prepare_benchmark(cfg);
  bool moved = false;
  TrainHooks hooks;
  hooks.on_augmented = [&](std::int64_t, const std::vector<const Sample*>& batch, const AugmentedBatch& adv) {
    for (std::size_t n = 0; n < batch.size(); ++n) {
      const AdversarialResult& r = adv.results[n];
      CHECK(r.steps_taken == 0);
      CHECK(r.theta_star == r.theta_init);
      CHECK(adv.images[n] == warp_image(batch[n]->image, r.theta_init));
      moved = moved || !(r.theta_init == AffineParams::identity());
    }
  };
  train(cfg, bench.train, bench.tpl, TrainMode::kAroface, hooks);
  CHECK(moved);
}

TEST_CASE("ablation rows") {
  std::array<bool, 4> active{};
  CHECK_FALSE(parse_component_subset("none", active));
  CHECK(parse_component_subset("rotation+scale", active));
  CHECK(active == std::array<bool, 4>{true, false, false, true});
  CHECK(parse_component_subset("translation", active));
  CHECK(active == std::array<bool, 4>{false, true, true, false});
  CHECK(parse_component_subset("translation_v,rotation", active));
  CHECK(active == std::array<bool, 4>{true, false, true, false});
  CHECK(parse_component_subset("all", active));
  CHECK(active == std::array<bool, 4>{true, true, true, true});
  CHECK_THROWS_AS(parse_component_subset("shear", active), ContractError);
  CHECK_THROWS_AS(parse_component_subset("", active), ContractError);

  RunConfig cfg = tiny_config();
  cfg.epochs = 1;
  const Benchmark bench = prepare_benchmark(cfg);
  const auto rows = ablate(cfg, bench, {"none", "scale", "all"});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].train.mode == TrainMode::kBaseline);
  CHECK(rows[0].train.params == train(cfg, bench.train, bench.tpl, TrainMode::kBaseline).params);
  CHECK(rows[2].train.params == train(cfg, bench.train, bench.tpl, TrainMode::kAroface).params);

  cfg.pgd.active = {false, false, false, true};
  TrainHooks hooks;
  hooks.on_augmented = [&](std::int64_t, const std::vector<const Sample*>&, const AugmentedBatch& adv) {
    for (const auto& r : adv.results) {
      CHECK(r.theta_star.phi == 0.0);
      CHECK(r.theta_star.du == 0.0);
      CHECK(r.theta_star.dv == 0.0);
    }
  };
  CHECK(rows[1].train.params == train(cfg, bench.train, bench.tpl, TrainMode::kAroface, hooks).params);
}

TEST_CASE("alpha study arms coincide when alpha has no spread") {
  RunConfig cfg = tiny_config();
  cfg.epochs = 1;
  cfg.pgd.alpha_mean = 0.01;
  cfg.pgd.alpha_std = 0.0;
  const Benchmark bench = prepare_benchmark(cfg);
  const AlphaStudy same = alpha_study(cfg, bench);
  CHECK(same.fixed.train.params == same.random.train.params);
  CHECK(eval_report_json(same.fixed.eval).dump() == eval_report_json(same.random.eval).dump());

  cfg.pgd.alpha_std = 0.1;
  cfg.pgd.projection = false;
  const AlphaStudy study = alpha_study(cfg, bench);
  CHECK(study.fixed.train.attack.step_norm.count > 0);
  CHECK(study.fixed.train.attack.step_norm.stddev() == 0.0);
  CHECK(study.random.train.attack.step_norm.stddev() > 0.0);
  CHECK(study.fixed.train.attack.alpha.stddev() == 0.0);
  CHECK(study.fixed.train.attack.alpha.mean == 0.01);
}

TEST_CASE("gradcheck reports") {
  const ModelSpec model = model_spec_for(tiny_config(), Dataset{4, 1, {16, 16}, {}});
  const GradcheckReport empty = gradcheck(GradcheckSettings::for_trials(0, model, MarginConfig{}), 1);
  CHECK(empty.pass);
  CHECK(empty.entries.empty());

  GradcheckSettings s = GradcheckSettings::for_trials(200, model, MarginConfig{});
  const GradcheckReport good = gradcheck(s, 2);
  CHECK(good.pass);
  CHECK(good.trials() == 200 + 20 + 20);

  s.corrupt_jacobian = [](WarpJacobian& jac) {
    for (auto& v : jac.values()) v[3] *= 1.5;
  };
  const GradcheckReport bad = gradcheck(s, 2);
  CHECK_FALSE(bad.pass);
  for (const auto& e : bad.entries) {
    if (e.suite == "recognizer") CHECK(e.pass);
    else CHECK(e.pass == (e.component != "scale"));
  }
  const std::string text = render_text(gradcheck_json(bad));
  CHECK(text.find("FAIL") != std::string::npos);
  CHECK(text.find("scale") != std::string::npos);
}

TEST_CASE("running statistics") {
  RunningStat s;
  for (double x : {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) s.add(x);
  CHECK(s.mean == 5.0);
  CHECK(s.stddev() == doctest::Approx(2.0).epsilon(1e-14));
  RunningStat same;
  for (int k = 0; k < 10; ++k) same.add(0.3);
  CHECK(same.stddev() == 0.0);
}

TEST_CASE("reports render as aligned text and survive a file round trip") {
  TextTable t({"name", "value"});
  t.add_row({"a", "1.5"});
  t.add_row({"longer", "-12.25"});
  const std::string text = t.render();
  CHECK(text ==
        "name    value\n"
        "------  ------\n"
        "a          1.5\n"
        "longer  -12.25\n");

  RunConfig cfg = tiny_config();
  cfg.epochs = 1;
  const Benchmark bench = prepare_benchmark(cfg);
  const ExperimentRow row = run_experiment("baseline", cfg, bench, TrainMode::kBaseline);
  const auto report = experiments_json({row});
  const std::string base = (fs::temp_directory_path() / "aroface_report").string();
  write_report(report, render_text(report), base);
  CHECK(read_report(base + ".json") == report);
  CHECK(render_text(read_report(base + ".json")).find("baseline") != std::string::npos);
  CHECK(render_text(eval_report_json(row.eval)).find("*") != std::string::npos);  // unreliable FAR flagged
  const std::string dir = (fs::temp_directory_path() / "aroface_train_out").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_train_outputs(row.train, dir);
  for (const char* f : {"model.ckpt", "loss_curve.csv", "train_report.json", "train_report.txt"})
    CHECK(fs::exists(fs::path(dir) / f));
  CHECK(load_checkpoint(dir + "/model.ckpt") == row.train.params);
}

TEST_CASE("run defaults") {
  const RunConfig cfg;
  CHECK(cfg.optim.lr == 0.05);
  CHECK(cfg.optim.momentum == 0.9);
  CHECK(cfg.optim.weight_decay == 1e-4);
  CHECK(cfg.pgd.alpha_mean == 0.0);
  CHECK(cfg.pgd.alpha_std == 0.1);
  CHECK(cfg.pgd.init_scale_mean == 1.0);
  CHECK(cfg.pgd.init_scale_std == 0.1);
  CHECK(cfg.pgd.init_other_std == 0.1);
  CHECK(cfg.pgd.k == 1);
  CHECK(cfg.pgd.budget.max_rotation == 0.01);
  CHECK(cfg.pgd.budget.max_translation_u == 0.01);
  CHECK(cfg.pgd.budget.max_translation_v == 0.01);
  CHECK(cfg.pgd.budget.max_scale_deviation == 0.01);
  CHECK(cfg.synth.num_classes == 10);
  CHECK(cfg.synth.per_class == 200);
  CHECK(cfg.synth_test_per_class == 50);
  CHECK(cfg.synth.shape == GridShape{64, 64});
  CHECK(cfg.epochs == 5);
  // the shipped desk config spells out the defaults
  const RunConfig desk = load_config(std::string(AROFACE_FIXTURE_DIR) + "/../configs/desk.conf");
  RunConfig expected;
  expected.template_path = "fixtures/template_112.txt";
  expected.out_dir = "runs/desk";
  CHECK(desk.to_text() == expected.to_text());
}
