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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "aroface/adversary.hpp"
#include "aroface/constraint.hpp"
#include "aroface/gradcheck.hpp"
#include "aroface/metrics.hpp"
#include "aroface/recognizer.hpp"
#include "aroface/report.hpp"
#include "aroface/training.hpp"
#include "aroface/warp.hpp"
#include "support.hpp"

using namespace aroface;
using namespace aroface::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s  %-28s %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
              seconds_since(start));
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

ImageTensor small_random_image(RngStream& rng) {
  const int channels = 1 + static_cast<int>(rng.below(3));
  const GridShape shape{1 + static_cast<int>(rng.below(16)), 1 + static_cast<int>(rng.below(16))};
  return random_image(channels, shape, rng);
}

Outcome warp_oracle() {
  const auto start = Clock::now();
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    RngStream rng(1001, n);
    const ImageTensor x = small_random_image(rng);
    for (int t = 0; t < 10; ++t) {
      const AffineParams theta = random_theta(rng, 1.0, 6.0, 0.6);
      worst = std::max(worst, max_abs_diff(warp_image(x, theta), oracle_warp(x, theta)));
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-12 && secs <= 5.0, fmt("max|warp - oracle| = %.3g, %.2f s", worst, secs)};
}

Outcome identity_warp() {
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    RngStream rng(1002, n);
    const ImageTensor x = small_random_image(rng);
    worst = std::max(worst, max_abs_diff(warp_image(x, AffineParams::identity()), x));
  }
  return {worst <= 1e-9, fmt("max|warp(x, id) - x| = %.3g", worst)};
}

Outcome gradient_suite(const RunConfig& reference) {
  const auto start = Clock::now();
  const ModelSpec model = model_spec_for(reference, Dataset{reference.synth.num_classes, reference.synth.channels,
                                                            reference.synth.shape, {}});
  GradcheckSettings s = GradcheckSettings::for_trials(1000, model, reference.margin);
  s.end_to_end_trials = 100;
  const GradcheckReport r = gradcheck(s, 3);
  const double secs = seconds_since(start);
  int warp_trials = 0, warp_passed = 0, e2e_trials = 0, e2e_passed = 0;
  for (const auto& e : r.entries) {
    if (e.suite == "warp") warp_trials += e.trials, warp_passed += e.passed;
    if (e.suite == "end_to_end") e2e_trials += e.trials, e2e_passed += e.passed;
  }
  const bool ok = r.pass && warp_trials == 1000 && e2e_trials == 100 && warp_passed >= 950 && e2e_passed >= 95 &&
                  secs <= 60.0;
  return {ok, fmt("warp %.0f/1000, end-to-end %.0f/100 within 1e-3, %.1f s", warp_passed, e2e_passed, secs)};
}

Outcome projection_suite() {
  double worst_slack = 0.0, worst_tight = 0.0, worst_idem = 0.0, worst_closed = 0.0;
  int infeasible = 0;
  for (int n = 0; n < 1000; ++n) {
    RngStream rng(1004, n);
    const LandmarkTemplate tpl = random_template(rng);
    const BudgetSpec bound{0.005 + 0.05 * rng.uniform(), 0.1 + 2.0 * rng.uniform(), 0.1 + 2.0 * rng.uniform(),
                           0.005 + 0.05 * rng.uniform()};
    const FlowBudget budget = compute_budget(bound, tpl);
    const AffineParams theta = random_theta(rng, 0.3, 6.0, 0.3);
    const AffineParams p = project(theta, budget, tpl);
    const double flow = total_flow(p, tpl);
    worst_slack = std::min(worst_slack, budget.total - flow);
    if (!is_feasible(theta, budget, tpl)) {
      ++infeasible;
      worst_tight = std::max(worst_tight, std::abs(budget.total - flow));
    }
    const AffineParams pp = project(p, budget, tpl);
    for (int c = 0; c < 4; ++c) worst_idem = std::max(worst_idem, std::abs(pp[c] - p[c]));

    const AffineParams shift{0.0, theta.du, theta.dv, 1.0};
    if (!is_feasible(shift, budget, tpl)) {
      const double factor = budget.total / (kNumLandmarks * std::hypot(shift.du, shift.dv));
      const AffineParams ps = project(shift, budget, tpl);
      worst_closed = std::max({worst_closed, std::abs(ps.du - factor * shift.du), std::abs(ps.dv - factor * shift.dv),
                               std::abs(ps.phi), std::abs(ps.scale - 1.0)});
    }
  }
  const bool ok = worst_slack >= -1e-9 && worst_tight <= 1e-6 && worst_idem <= 1e-9 && worst_closed <= 1e-9 &&
                  infeasible > 0;
  return {ok, fmt("min slack %.3g, tightness %.3g, idempotence %.3g, translation closed form %.3g", worst_slack,
                  worst_tight, worst_idem, worst_closed)};
}

Outcome flow_closed_forms() {
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    RngStream rng(1005, n);
    const LandmarkTemplate tpl = random_template(rng);
    const double phi = (rng.uniform() - 0.5) * 1.0;
    const double du = (rng.uniform() - 0.5) * 8.0, dv = (rng.uniform() - 0.5) * 8.0;
    const double s = 0.6 + 0.8 * rng.uniform();
    const auto rot = landmark_flow({phi, 0.0, 0.0, 1.0}, tpl);
    const auto tr = landmark_flow({0.0, du, dv, 1.0}, tpl);
    const auto sc = landmark_flow({0.0, 0.0, 0.0, s}, tpl);
    for (int k = 0; k < kNumLandmarks; ++k) {
      const double r = std::hypot(tpl.points[k].u, tpl.points[k].v);
      worst = std::max(worst, std::abs(std::hypot(rot[k].u, rot[k].v) - 2.0 * r * std::sin(std::abs(phi) / 2.0)));
      worst = std::max(worst, std::abs(std::hypot(tr[k].u, tr[k].v) - std::hypot(du, dv)));
      worst = std::max(worst, std::abs(std::hypot(sc[k].u, sc[k].v) - r * std::abs(1.0 / s - 1.0)));
    }
  }
  return {worst <= 1e-9, fmt("max closed-form error %.3g", worst)};
}

Outcome pgd_contract() {
  RunConfig cfg = tiny_config();
  const Benchmark bench = prepare_benchmark(cfg);
  const ModelParams params = init_model(model_spec_for(cfg, bench.train), 6);
  const RecognizerTarget target(params, cfg.margin);

  // raw step law
  PGDConfig raw;
  raw.landmarks = bench.tpl;
  raw.projection = false;
  raw.randomize_alpha = false;
  int checked = 0, step_bad = 0;
  for (std::size_t n = 0; n < bench.train.samples.size(); ++n) {
    const Sample& s = bench.train.samples[n];
    raw.alpha_mean = n % 2 ? 0.003 : -0.007;
    RngStream rng(1006, n);
    const AdversarialResult r = pgd_attack(target, s.image, s.label, raw, rng);
    for (int c = 0; c < 4; ++c) {
      if (r.step_sum[c] == 0.0) continue;
      ++checked;
      const double dev = r.theta_unprojected[c] - r.theta_init[c];
      if (std::abs(r.step_sum[c]) != std::abs(raw.alpha_mean) || std::abs(std::abs(dev) - std::abs(raw.alpha_mean)) > 1e-15)
        ++step_bad;
    }
  }

  // feasibility of crafted transforms
  PGDConfig proj;
  proj.landmarks = bench.tpl;
  proj.budget = {0.02, 0.5, 0.5, 0.02};
  proj.alpha_std = 0.5;
  const FlowBudget budget = compute_budget(proj.budget, bench.tpl);
  int infeasible = 0;
  for (int n = 0; n < 1000; ++n) {
    const Sample& s = bench.train.samples[n % bench.train.samples.size()];
    RngStream rng(1007, n);
    const AdversarialResult r = pgd_attack(target, s.image, s.label, proj, rng);
    if (total_flow(r.theta_star, bench.tpl) > budget.total + kFeasibilityTolerance) ++infeasible;
  }

  // ascent on toy batches
  PGDConfig up;
  up.landmarks = bench.tpl;
  up.randomize_alpha = false;
  up.alpha_mean = 0.002;
  up.budget = {0.5, 2.0, 2.0, 0.3};
  int ascents = 0;
  for (int b = 0; b < 100; ++b) {
    std::vector<const Sample*> batch;
    for (int k = 0; k < 8; ++k) batch.push_back(&bench.train.samples[(b * 8 + k) % bench.train.samples.size()]);
    const AugmentedBatch adv = augment_batch(target, batch, up, 5000 + b);
    double before = 0.0, after = 0.0;
    for (const auto& r : adv.results) before += r.loss_before, after += r.loss_after;
    ascents += after >= before;
  }
  const bool ok = checked > 0 && step_bad == 0 && infeasible == 0 && ascents >= 90;
  return {ok, fmt("step law %.0f/%.0f exact, infeasible %.0f/1000, ascent %.0f/100 batches", checked - step_bad,
                  checked, infeasible, ascents)};
}

Outcome degeneracy() {
  RunConfig cfg = tiny_config();
  cfg.pgd.budget = {0.0, 0.0, 0.0, 0.0};
  const Benchmark bench = prepare_benchmark(cfg);
  std::size_t compared = 0, differing = 0;
  TrainHooks hooks;
  hooks.on_augmented = [&](std::int64_t, const std::vector<const Sample*>& batch, const AugmentedBatch& adv) {
    for (std::size_t n = 0; n < batch.size(); ++n) {
      ++compared;
      differing += !(adv.images[n] == batch[n]->image);
    }
  };
  const TrainResult r = train(cfg, bench.train, bench.tpl, TrainMode::kAroface, hooks);
  const EvalReport e = evaluate(r.params, bench.test, PerturbSpec{}, cfg.far_list, cfg.seed);
  const bool same_eval = eval_report_json(e).at("aligned").dump() == eval_report_json(e).at("perturbed").dump();
  return {compared > 0 && differing == 0 && same_eval,
          fmt("warped != benign in %.0f of %.0f images; zero-std eval identical: %.0f", differing, compared, same_eval)};
}

Outcome desk_scale(const RunConfig& reference) {
  const auto start = Clock::now();
  const Benchmark bench = prepare_benchmark(reference);
  const ExperimentRow base = run_experiment("baseline", reference, bench, TrainMode::kBaseline);
  const ExperimentRow adv = run_experiment("aroface", reference, bench, TrainMode::kAroface);
  const double secs = seconds_since(start);
  const double gain = 100.0 * (adv.eval.perturbed.accuracy - base.eval.perturbed.accuracy);
  const double aligned_diff = 100.0 * std::abs(adv.eval.aligned.accuracy - base.eval.aligned.accuracy);
  std::fputs(render_text(experiments_json({base, adv})).c_str(), stdout);
  const bool ok = gain >= 5.0 && aligned_diff <= 2.0 && secs <= 600.0;
  return {ok, fmt("perturbed gain %+.1f pts, aligned diff %.1f pts, %.0f s", gain, aligned_diff, secs)};
}

Outcome alpha_mechanism() {
  RunConfig cfg = tiny_config();
  cfg.epochs = 1;
  cfg.pgd.k = 1;
  cfg.pgd.alpha_mean = 0.01;
  cfg.pgd.projection = false;
  const Benchmark bench = prepare_benchmark(cfg);
  const AlphaStudy study = alpha_study(cfg, bench);
  const double fixed_std = study.fixed.train.attack.step_norm.stddev();
  const double random_std = study.random.train.attack.step_norm.stddev();
  cfg.pgd.alpha_std = 0.0;
  cfg.pgd.projection = true;
  const AlphaStudy flat = alpha_study(cfg, bench);
  const bool collapse = flat.fixed.train.params == flat.random.train.params &&
                        eval_report_json(flat.fixed.eval).dump() == eval_report_json(flat.random.eval).dump();
  const bool ok = study.fixed.train.attack.step_norm.count > 0 && fixed_std == 0.0 && random_std > 0.0 && collapse;
  return {ok, fmt("fixed std %.3g, random std %.3g, sigma = 0 arms identical: %.0f", fixed_std, random_std, collapse)};
}

Outcome reproducibility() {
  RunConfig cfg = tiny_config();
  cfg.synth.num_classes = 6;
  cfg.synth.per_class = 12;
  const Benchmark bench = prepare_benchmark(cfg);
  std::vector<std::string> dumps;
  for (TrainMode mode : {TrainMode::kBaseline, TrainMode::kAroface}) {
    std::string reference;
    for (int threads : {1, 2, 4}) {
      cfg.threads = threads;
      const ExperimentRow row = run_experiment(to_string(mode), cfg, bench, mode);
      const std::string dump = experiments_json({row}).dump() + train_report_json(row.train).dump();
      if (reference.empty()) reference = dump;
      dumps.push_back(dump == reference ? "same" : "diff");
    }
  }
  int same = 0;
  for (const auto& d : dumps) same += d == "same";
  return {same == 6, fmt("%.0f of 6 runs match the 1-thread report byte for byte", same)};
}

}  // namespace

int main() {
  RunConfig reference;
  reference.template_path = fixture("template_112.txt");
  reference.out_dir = "";
  reference.validate();

  run(1, "warp oracle equivalence", warp_oracle);
  run(2, "identity warp", identity_warp);
  run(3, "gradient suite", [&] { return gradient_suite(reference); });
  run(4, "projection suite", projection_suite);
  run(5, "flow closed forms", flow_closed_forms);
  run(6, "pgd contract", pgd_contract);
  run(7, "degeneracy equalities", degeneracy);
  run(8, "desk-scale robustness", [&] { return desk_scale(reference); });
  run(9, "alpha mechanism", alpha_mechanism);
  run(10, "reproducibility", reproducibility);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
