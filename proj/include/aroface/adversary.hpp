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
#include <vector>

#include "aroface/constraint.hpp"
#include "aroface/data.hpp"
#include "aroface/image.hpp"
#include "aroface/parallel.hpp"
#include "aroface/recognizer.hpp"
#include "aroface/rng.hpp"

namespace aroface {

/*!
 * Settings of the inner maximization. Defaults: one step, alpha ~ N(0, 0.1^2),
 * scale initialized from N(1, 0.1^2), rotation and shifts from N(0, 0.1^2).
 */
struct PGDConfig {
  int k = 1;
  double alpha_mean = 0.0;
  double alpha_std = 0.1;
  double init_scale_mean = 1.0;
  double init_scale_std = 0.1;
  double init_other_std = 0.1;
  BudgetSpec budget;
  LandmarkTemplate landmarks;

  /// false: every sample uses alpha = alpha_mean.
  bool randomize_alpha = true;
  /// false: no projection at all (test hook for the raw step law).
  bool projection = true;
  /// Components that take part in the attack; the rest stay at identity.
  std::array<bool, 4> active{true, true, true, true};

  bool valid() const;
};

/// Loss oracle the attack maximizes. Implementations must be safe to call
/// concurrently from several threads.
class AttackTarget {
 public:
  virtual ~AttackTarget() = default;
  virtual double loss(const ImageTensor& x, int label) const = 0;
  /// Returns the loss and writes dL/dx into grad.
  virtual double loss_and_input_grad(const ImageTensor& x, int label, ImageTensor& grad) const = 0;
};

class RecognizerTarget final : public AttackTarget {
 public:
  RecognizerTarget(const ModelParams& params, MarginConfig cfg) : params_(params), cfg_(cfg) {}

  double loss(const ImageTensor& x, int label) const override;
  double loss_and_input_grad(const ImageTensor& x, int label, ImageTensor& grad) const override;

 private:
  const ModelParams& params_;
  MarginConfig cfg_;
};

struct AdversarialResult {
  AffineParams theta_init;
  AffineParams theta_star;
  /// Final iterate before projection (theta_init when k = 0).
  AffineParams theta_unprojected;
  /// Sum of the raw sign steps alpha * sign(grad), per component, before any
  /// projection. For k = 1 this is the pre-projection deviation from theta_init.
  std::array<double, 4> step_sum{};
  double alpha = 0.0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  int steps_taken = 0;
  /// Every active component had a nonzero theta-gradient on every step.
  bool all_grad_nonzero = true;
};

/// Initial transform: independent Gaussian draws, scale kept positive, inactive
/// components reset to identity, then projected (when projection is on).
AffineParams sample_init_theta(const PGDConfig& cfg, RngStream& rng);

/// One draw from N(alpha_mean, alpha_std^2); no clamping, negative values allowed.
double sample_alpha(const PGDConfig& cfg, RngStream& rng);

/*!
 * Randomized-step projected sign-gradient ascent on the transform of one
 * sample. alpha is drawn once and shared by all steps and components. Each
 * step warps x, evaluates the loss and its image gradient, contracts with the
 * warp Jacobian and moves every active component by alpha * sign(grad),
 * then projects. Throws NumericalError on non-finite loss or gradient.
 */
AdversarialResult pgd_attack(const AttackTarget& target, const ImageTensor& x, int label, const PGDConfig& cfg,
                             RngStream& rng);

/// pgd_attack with a precomputed flow budget.
AdversarialResult pgd_attack(const AttackTarget& target, const ImageTensor& x, int label, const PGDConfig& cfg,
                             const FlowBudget& budget, RngStream& rng);

struct AugmentedBatch {
  std::vector<ImageTensor> images;  // warped by theta_star
  std::vector<AdversarialResult> results;
};

/*!
 * Attack every sample independently. Sample n uses the stream
 * RngStream(master_seed, batch[n]->id), so results depend on sample ids,
 * never on batch position or worker count.
 */
AugmentedBatch augment_batch(const AttackTarget& target, const std::vector<const Sample*>& batch,
                             const PGDConfig& cfg, std::uint64_t master_seed, const Workers& workers = Workers(1));

}  // namespace aroface
