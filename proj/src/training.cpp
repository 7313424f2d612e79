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

#include "aroface/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "aroface/error.hpp"
#include "aroface/report.hpp"

namespace aroface {
namespace {

constexpr std::uint64_t kTagInit = 0x1A17ULL;
constexpr std::uint64_t kTagShuffle = 0x5F1EULL;
constexpr std::uint64_t kTagAttack = 0xA77AULL;
constexpr std::uint64_t kTestSplit = 1;

// Per-sample gradients are summed in fixed-size blocks so the reduction
// order never depends on the worker count.
constexpr std::size_t kGradBlock = 8;

struct GradItem {
  const ImageTensor* image;
  int label;
};

struct BlockSum {
  std::vector<double> grad;
  double loss = 0.0;
};

BlockSum summed_gradient(const ModelParams& params, const std::vector<GradItem>& items, const MarginConfig& margin,
                         const Workers& workers) {
  const std::size_t blocks = (items.size() + kGradBlock - 1) / kGradBlock;
  std::vector<BlockSum> partial(blocks);
  workers.parallel_for(blocks, [&](std::size_t b) {
    BlockSum& out = partial[b];
    out.grad.assign(params.size(), 0.0);
    const std::size_t end = std::min(items.size(), (b + 1) * kGradBlock);
    for (std::size_t n = b * kGradBlock; n < end; ++n) {
      const BackwardResult r = backward(params, *items[n].image, items[n].label, margin, kGradParams);
      out.loss += r.loss;
      for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += r.grad_params[k];
    }
  });
  BlockSum total;
  total.grad.assign(params.size(), 0.0);
  for (const BlockSum& part : partial) {
    total.loss += part.loss;
    for (std::size_t k = 0; k < total.grad.size(); ++k) total.grad[k] += part.grad[k];
  }
  return total;
}

double norm4(const std::array<double, 4>& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
}

[[noreturn]] void abort_at(const std::string& what, int epoch, std::int64_t iteration) {
  std::ostringstream msg;
  msg << "train: " << what << " at epoch " << epoch << ", iteration " << iteration;
  throw NumericalError(msg.str());
}

}  // namespace

void RunningStat::add(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

double RunningStat::stddev() const { return count > 0 ? std::sqrt(m2 / static_cast<double>(count)) : 0.0; }

void AttackStats::add(const AdversarialResult& r) {
  ++samples;
  if (r.all_grad_nonzero) {
    ++all_grad_nonzero;
    step_norm.add(norm4(r.step_sum));
  }
  const auto a = r.theta_star.as_array();
  const auto b = r.theta_init.as_array();
  shift_norm.add(norm4({a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]}));
  alpha.add(r.alpha);
  if (r.loss_after >= r.loss_before) ++ascents;
}

Benchmark prepare_benchmark(const RunConfig& cfg) {
  Benchmark bench;
  if (!cfg.train_path.empty()) {
    bench.train = load_dataset(cfg.train_path);
    require(!cfg.test_path.empty(), "data.test_path is required with data.train_path");
    bench.test = load_dataset(cfg.test_path);
    require(bench.test.shape == bench.train.shape && bench.test.channels == bench.train.channels,
            "train and test datasets differ in image shape");
    require(bench.test.num_classes <= bench.train.num_classes, "test set has more classes than the train set");
    bench.tpl = resolve_template(cfg, bench.train.shape);
    return bench;
  }
  bench.tpl = resolve_template(cfg, cfg.synth.shape);
  bench.train = generate_synthetic(cfg.synth, bench.tpl, cfg.seed);
  SyntheticSpec test_spec = cfg.synth;
  test_spec.per_class = cfg.synth_test_per_class;
  bench.test = generate_synthetic_split(test_spec, bench.tpl, cfg.seed, kTestSplit);
  return bench;
}

ModelSpec model_spec_for(const RunConfig& cfg, const Dataset& ds) {
  ModelSpec spec = cfg.model;
  spec.in_channels = ds.channels;
  spec.input = ds.shape;
  spec.num_classes = ds.num_classes;
  require(spec.valid(), "model spec is invalid for this dataset");
  return spec;
}

TrainResult train(const RunConfig& cfg, const Dataset& train_set, const LandmarkTemplate& tpl, TrainMode mode,
                  const TrainHooks& hooks) {
  cfg.validate(false);
  require(!train_set.samples.empty(), "train: training set is empty");
  const LandmarkTemplate local = tpl.shape == train_set.shape ? tpl : tpl.rescaled(train_set.shape);

  PGDConfig pgd = cfg.pgd;
  pgd.landmarks = local;
  require(pgd.valid(), "train: invalid attack settings");

  const Workers workers(cfg.threads);
  TrainResult result;
  result.mode = mode;
  result.params = init_model(model_spec_for(cfg, train_set), derive_seed(cfg.seed, kTagInit));
  SgdState state;

  const std::size_t n = train_set.samples.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const std::int64_t per_epoch = static_cast<std::int64_t>((n + batch - 1) / batch);
  const std::int64_t total = per_epoch * cfg.epochs;

  std::vector<std::size_t> order(n);
  std::int64_t iteration = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    RngStream shuffle(derive_seed(cfg.seed, kTagShuffle), static_cast<std::uint64_t>(epoch));
    for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[shuffle.below(k)]);

    for (std::size_t start = 0; start < n; start += batch, ++iteration) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<const Sample*> members;
      std::vector<GradItem> benign;
      for (std::size_t k = start; k < end; ++k) {
        const Sample* s = &train_set.samples[order[k]];
        members.push_back(s);
        benign.push_back({&s->image, s->label});
      }
      const double count = static_cast<double>(members.size());

      LossPoint point;
      point.epoch = epoch;
      point.iteration = iteration;
      point.lr = 0.5 * cfg.optim.lr * (1.0 + std::cos(std::numbers::pi * iteration / static_cast<double>(total)));

      try {
        std::vector<double> grad(result.params.size(), 0.0);
        if (mode == TrainMode::kAroface) {
          const RecognizerTarget target(result.params, cfg.margin);
          const AugmentedBatch adv =
              augment_batch(target, members, pgd, derive_seed(cfg.seed, kTagAttack, iteration), workers);
          if (hooks.on_augmented) hooks.on_augmented(iteration, members, adv);
          for (const auto& r : adv.results) result.attack.add(r);
          std::vector<GradItem> crafted;
          for (std::size_t k = 0; k < members.size(); ++k) crafted.push_back({&adv.images[k], members[k]->label});
          const BlockSum l1 = summed_gradient(result.params, crafted, cfg.margin, workers);
          point.l1 = l1.loss / count;
          if (!std::isfinite(point.l1)) throw NumericalError("non-finite adversarial loss");
          for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = l1.grad[k] / count;
        }
        const BlockSum l2 = summed_gradient(result.params, benign, cfg.margin, workers);
        point.l2 = l2.loss / count;
        if (!std::isfinite(point.l2)) throw NumericalError("non-finite benign loss");
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += l2.grad[k] / count;

        SgdSettings step = cfg.optim;
        step.lr = point.lr;
        sgd_update(result.params, grad, step, state);
        if (!result.params.all_finite()) throw NumericalError("non-finite parameters");
      } catch (const NumericalError& e) {
        abort_at(e.what(), epoch, iteration);
      }
      result.curve.push_back(point);
    }
  }
  result.iterations = iteration;
  return result;
}

void write_train_outputs(const TrainResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(IoError::Kind::kWriteFailed, dir, "cannot create output directory");
  save_checkpoint(result.params, (fs::path(dir) / "model.ckpt").string());

  const std::string curve_path = (fs::path(dir) / "loss_curve.csv").string();
  std::ofstream curve(curve_path);
  if (!curve) throw IoError(IoError::Kind::kWriteFailed, curve_path, "cannot write loss curve");
  curve.precision(17);
  curve << "epoch,iteration,lr,l1,l2\n";
  for (const auto& p : result.curve) {
    curve << p.epoch << ',' << p.iteration << ',' << p.lr << ',' << p.l1 << ',' << p.l2 << '\n';
  }
  if (!curve) throw IoError(IoError::Kind::kWriteFailed, curve_path, "cannot write loss curve");

  write_report(train_report_json(result), train_report_text(result), (fs::path(dir) / "train_report").string());
}

ExperimentRow run_experiment(const std::string& name, const RunConfig& cfg, const Benchmark& bench, TrainMode mode,
                             const TrainHooks& hooks) {
  ExperimentRow row;
  row.name = name;
  row.train = train(cfg, bench.train, bench.tpl, mode, hooks);
  row.eval = evaluate(row.train.params, bench.test, cfg.eval_perturb, cfg.far_list, cfg.seed,
                      Workers(cfg.threads));
  return row;
}

std::vector<ExperimentRow> ablate(const RunConfig& cfg, const Benchmark& bench,
                                  const std::vector<std::string>& subsets) {
  require(!subsets.empty(), "ablate: no component subsets requested");
  std::vector<ExperimentRow> rows;
  for (const auto& subset : subsets) {
    RunConfig run = cfg;
    std::array<bool, 4> active{};
    const bool attack = parse_component_subset(subset, active);
    if (attack) run.pgd.active = active;
    rows.push_back(run_experiment(subset, run, bench, attack ? TrainMode::kAroface : TrainMode::kBaseline));
  }
  return rows;
}

AlphaStudy alpha_study(const RunConfig& cfg, const Benchmark& bench) {
  AlphaStudy study;
  RunConfig fixed = cfg;
  fixed.pgd.randomize_alpha = false;
  RunConfig random = cfg;
  random.pgd.randomize_alpha = true;
  study.fixed = run_experiment("fixed", fixed, bench, TrainMode::kAroface);
  study.random = run_experiment("random", random, bench, TrainMode::kAroface);
  return study;
}

}  // namespace aroface
