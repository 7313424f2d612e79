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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aroface/adversary.hpp"
#include "aroface/config.hpp"
#include "aroface/data.hpp"
#include "aroface/metrics.hpp"
#include "aroface/recognizer.hpp"

namespace aroface {

/// Train and test splits plus the template rescaled to their grid.
struct Benchmark {
  Dataset train;
  Dataset test;
  LandmarkTemplate tpl;
};

/// Load data.train_path / data.test_path, or generate the synthetic benchmark.
Benchmark prepare_benchmark(const RunConfig& cfg);

/// cfg.model with input shape, channels and class count taken from the data.
ModelSpec model_spec_for(const RunConfig& cfg, const Dataset& ds);

struct LossPoint {
  int epoch = 0;
  std::int64_t iteration = 0;
  double lr = 0.0;
  double l1 = 0.0;  // adversarial batch loss, 0 in baseline mode
  double l2 = 0.0;  // benign batch loss
};

/// Running mean / std (population) with Welford updates.
struct RunningStat {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x);
  double stddev() const;
};

struct AttackStats {
  std::int64_t samples = 0;
  std::int64_t all_grad_nonzero = 0;
  /// |sum of raw steps| over samples whose active gradients were all nonzero.
  RunningStat step_norm;
  /// |theta* - theta_0| after projection, all samples.
  RunningStat shift_norm;
  RunningStat alpha;
  std::int64_t ascents = 0;  // loss_after >= loss_before
  double ascent_fraction() const { return samples ? static_cast<double>(ascents) / samples : 0.0; }
  void add(const AdversarialResult& r);
};

struct TrainHooks {
  /// Called after each attack with the benign batch and its adversarial copy.
  std::function<void(std::int64_t iteration, const std::vector<const Sample*>& batch, const AugmentedBatch& adv)>
      on_augmented;
};

struct TrainResult {
  TrainMode mode = TrainMode::kBaseline;
  ModelParams params;
  std::vector<LossPoint> curve;
  AttackStats attack;
  std::int64_t iterations = 0;
};

/*!
 * Mini-batch training. Baseline minimizes the benign loss l2; aroface crafts
 * an adversarial copy of every batch and steps on grad(l1) + grad(l2), both
 * batch means. Learning rate follows a cosine from optim.lr to 0. Throws
 * NumericalError naming the iteration when a loss turns non-finite.
 */
TrainResult train(const RunConfig& cfg, const Dataset& train_set, const LandmarkTemplate& tpl, TrainMode mode,
                  const TrainHooks& hooks = {});

/// model.ckpt, loss_curve.csv, train_report.json and train_report.txt under dir.
void write_train_outputs(const TrainResult& result, const std::string& dir);

/// One trained and evaluated configuration.
struct ExperimentRow {
  std::string name;
  TrainResult train;
  EvalReport eval;
};

ExperimentRow run_experiment(const std::string& name, const RunConfig& cfg, const Benchmark& bench, TrainMode mode,
                             const TrainHooks& hooks = {});

/// One row per subset; "none" trains the baseline.
std::vector<ExperimentRow> ablate(const RunConfig& cfg, const Benchmark& bench, const std::vector<std::string>& subsets);

struct AlphaStudy {
  ExperimentRow fixed;   // alpha = alpha_mean for every sample
  ExperimentRow random;  // alpha ~ N(alpha_mean, alpha_std^2)
};

/// Two aroface runs that differ only in the alpha rule.
AlphaStudy alpha_study(const RunConfig& cfg, const Benchmark& bench);

}  // namespace aroface
