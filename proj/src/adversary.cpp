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

#include "aroface/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aroface/error.hpp"
#include "aroface/warp.hpp"

namespace aroface {
namespace {

constexpr double kMinScale = 1e-6;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void reset_inactive(AffineParams& theta, const std::array<bool, 4>& active) {
  const AffineParams id = AffineParams::identity();
  for (int c = 0; c < kNumComponents; ++c) {
    if (!active[c]) theta[c] = id[c];
  }
}

void check_finite(double loss, const std::array<double, 4>& grad, int step) {
  bool ok = std::isfinite(loss);
  for (double g : grad) ok = ok && std::isfinite(g);
  if (!ok) {
    std::ostringstream msg;
    msg << "pgd_attack: non-finite loss or gradient at step " << step << " (loss=" << loss << ")";
    throw NumericalError(msg.str());
  }
}

AffineParams draw_init(const PGDConfig& cfg, const FlowBudget& budget, RngStream& rng) {
  AffineParams theta;
  theta.phi = cfg.init_other_std * rng.normal();
  theta.du = cfg.init_other_std * rng.normal();
  theta.dv = cfg.init_other_std * rng.normal();
  theta.scale = std::max(cfg.init_scale_mean + cfg.init_scale_std * rng.normal(), kMinScale);
  reset_inactive(theta, cfg.active);
  if (cfg.projection) theta = project(theta, budget, cfg.landmarks);
  return theta;
}

}  // namespace

bool PGDConfig::valid() const {
  return k >= 0 && alpha_std >= 0.0 && init_scale_std >= 0.0 && init_other_std >= 0.0 && std::isfinite(alpha_mean) &&
         std::isfinite(init_scale_mean) && budget.valid() && landmarks.valid();
}

double RecognizerTarget::loss(const ImageTensor& x, int label) const {
  return sample_loss(params_, x, label, cfg_);
}

double RecognizerTarget::loss_and_input_grad(const ImageTensor& x, int label, ImageTensor& grad) const {
  BackwardResult r = backward(params_, x, label, cfg_, kGradInput);
  grad = std::move(r.grad_input);
  return r.loss;
}

AffineParams sample_init_theta(const PGDConfig& cfg, RngStream& rng) {
  return draw_init(cfg, compute_budget(cfg.budget, cfg.landmarks), rng);
}

double sample_alpha(const PGDConfig& cfg, RngStream& rng) {
  const double drawn = cfg.alpha_mean + cfg.alpha_std * rng.normal();
  return cfg.randomize_alpha ? drawn : cfg.alpha_mean;
}

AdversarialResult pgd_attack(const AttackTarget& target, const ImageTensor& x, int label, const PGDConfig& cfg,
                             RngStream& rng) {
  require(cfg.valid(), "pgd_attack: invalid PGD configuration");
  return pgd_attack(target, x, label, cfg, compute_budget(cfg.budget, cfg.landmarks), rng);
}

AdversarialResult pgd_attack(const AttackTarget& target, const ImageTensor& x, int label, const PGDConfig& cfg,
                             const FlowBudget& budget, RngStream& rng) {
  require(cfg.k >= 0, "pgd_attack: k must be nonnegative");
  AdversarialResult res;

  AffineParams theta = draw_init(cfg, budget, rng);
  res.theta_init = theta;
  res.theta_unprojected = theta;
  res.alpha = sample_alpha(cfg, rng);

  WarpJacobian jac;
  ImageTensor grad;
  for (int step = 0; step < cfg.k; ++step) {
    const ImageTensor warped = warp_image_with_jacobian(x, theta, jac);
    const double loss = target.loss_and_input_grad(warped, label, grad);
    const auto gtheta = loss_grad_wrt_theta(grad, jac);
    check_finite(loss, gtheta, step);
    if (step == 0) res.loss_before = loss;

    AffineParams next = theta;
    for (int c = 0; c < kNumComponents; ++c) {
      if (!cfg.active[c]) continue;
      if (gtheta[c] == 0.0) res.all_grad_nonzero = false;
      next[c] += res.alpha * sign(gtheta[c]);
      res.step_sum[c] += res.alpha * sign(gtheta[c]);
    }
    next.scale = std::max(next.scale, kMinScale);
    res.theta_unprojected = next;
    theta = cfg.projection ? project(next, budget, cfg.landmarks) : next;
    ++res.steps_taken;
  }
  res.theta_star = theta;

  if (cfg.k == 0) {
    res.loss_before = target.loss(warp_image(x, theta), label);
    res.loss_after = res.loss_before;
  } else {
    res.loss_after = target.loss(warp_image(x, theta), label);
  }
  if (!std::isfinite(res.loss_after)) throw NumericalError("pgd_attack: non-finite loss at the crafted transform");
  return res;
}

AugmentedBatch augment_batch(const AttackTarget& target, const std::vector<const Sample*>& batch,
                             const PGDConfig& cfg, std::uint64_t master_seed, const Workers& workers) {
  require(!batch.empty(), "augment_batch: batch must be nonempty");
  require(cfg.valid(), "augment_batch: invalid PGD configuration");
  const FlowBudget budget = compute_budget(cfg.budget, cfg.landmarks);
  AugmentedBatch out;
  out.images.resize(batch.size());
  out.results.resize(batch.size());
  workers.parallel_for(batch.size(), [&](std::size_t n) {
    const Sample& s = *batch[n];
    RngStream rng(master_seed, s.id);
    try {
      out.results[n] = pgd_attack(target, s.image, s.label, cfg, budget, rng);
    } catch (const NumericalError& e) {
      throw NumericalError("sample " + std::to_string(s.id) + ": " + e.what());
    }
    out.images[n] = warp_image(s.image, out.results[n].theta_star);
  });
  return out;
}

}  // namespace aroface
