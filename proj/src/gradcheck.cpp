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

#include "aroface/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "aroface/error.hpp"
#include "aroface/rng.hpp"

namespace aroface {
namespace {

constexpr std::array<const char*, 4> kComponentNames{"rotation", "shift_u", "shift_v", "scale"};
constexpr int kMaxRedraws = 1000;

ImageTensor random_image(int channels, GridShape shape, RngStream& rng) {
  ImageTensor img(channels, shape);
  for (double& v : img.data()) v = rng.normal();
  return img;
}

AffineParams random_theta(RngStream& rng) {
  AffineParams t;
  t.phi = (rng.uniform() - 0.5) * 0.6;
  t.du = (rng.uniform() - 0.5) * 4.0;
  t.dv = (rng.uniform() - 0.5) * 4.0;
  t.scale = 0.8 + 0.4 * rng.uniform();
  return t;
}

AffineParams nudged(AffineParams t, int component, double h) {
  switch (component) {
    case 0: t.phi += h; break;
    case 1: t.du += h; break;
    case 2: t.dv += h; break;
    default: t.scale += h; break;
  }
  return t;
}

// True when some sampling coordinate meets or crosses an integer grid line
// between theta - h and theta + h along the component.
bool straddles_kink(const AffineParams& theta, int component, double h, GridShape shape) {
  const AffineParams lo = nudged(theta, component, -h);
  const AffineParams hi = nudged(theta, component, h);
  const double cu = (shape.width - 1) / 2.0;
  const double cv = (shape.height - 1) / 2.0;
  for (int i = 0; i < shape.height; ++i) {
    for (int j = 0; j < shape.width; ++j) {
      const CenteredPoint p = to_centered(i, j, shape);
      const CenteredPoint a = inverse(lo, p);
      const CenteredPoint b = inverse(hi, p);
      const double cols[2] = {a.u + cu, b.u + cu};
      const double rows[2] = {cv - a.v, cv - b.v};
      for (const double* pair : {cols, rows}) {
        const double fa = std::floor(pair[0]);
        const double fb = std::floor(pair[1]);
        if (fa != fb || fa == pair[0] || fb == pair[1]) return true;
      }
    }
  }
  return false;
}

// True when some ReLU unit switches on or off between theta - h and theta + h.
bool crosses_relu(const ModelParams& params, const ImageTensor& x, const AffineParams& theta, int component,
                  double h) {
  const auto mid = relu_pattern(params, warp_image(x, theta));
  return relu_pattern(params, warp_image(x, nudged(theta, component, -h))) != mid ||
         relu_pattern(params, warp_image(x, nudged(theta, component, h))) != mid;
}

double weighted_sum(const ImageTensor& a, const ImageTensor& weights) {
  double s = 0.0;
  const auto x = a.data();
  const auto w = weights.data();
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * w[k];
  return s;
}

struct Tally {
  GradcheckEntry entry;
  void add(double rel, double tol) {
    ++entry.trials;
    if (rel <= tol) ++entry.passed;
    entry.worst_rel_error = std::max(entry.worst_rel_error, rel);
  }
};

void finish(std::vector<Tally>& tallies, const GradcheckSettings& s, GradcheckReport& report) {
  for (auto& t : tallies) {
    if (t.entry.trials == 0 && t.entry.redrawn == 0) continue;
    t.entry.pass = t.entry.trials > 0 && t.entry.passed >= s.pass_fraction * t.entry.trials;
    report.pass = report.pass && t.entry.pass;
    report.entries.push_back(t.entry);
  }
}

std::vector<Tally> component_tallies(const std::string& suite) {
  std::vector<Tally> out(4);
  for (int c = 0; c < 4; ++c) {
    out[c].entry.suite = suite;
    out[c].entry.component = kComponentNames[c];
  }
  return out;
}

void warp_suite(const GradcheckSettings& s, std::uint64_t seed, GradcheckReport& report) {
  auto tallies = component_tallies("warp");
  for (int trial = 0; trial < s.warp_trials; ++trial) {
    RngStream rng(derive_seed(seed, 0x3A4FULL), static_cast<std::uint64_t>(trial));
    const int component = static_cast<int>(rng.below(4));
    ImageTensor x, weights;
    AffineParams theta;
    int redraws = 0;
    for (;;) {
      const int channels = 1 + static_cast<int>(rng.below(3));
      const GridShape shape{4 + static_cast<int>(rng.below(13)), 4 + static_cast<int>(rng.below(13))};
      x = random_image(channels, shape, rng);
      weights = random_image(channels, shape, rng);
      theta = random_theta(rng);
      if (!straddles_kink(theta, component, s.warp_step, shape)) break;
      if (++redraws > kMaxRedraws) break;
    }
    tallies[component].entry.redrawn += redraws;
    WarpJacobian jac;
    warp_image_with_jacobian(x, theta, jac);
    if (s.corrupt_jacobian) s.corrupt_jacobian(jac);
    const double analytic = loss_grad_wrt_theta(weights, jac)[component];
    const double plus = weighted_sum(warp_image(x, nudged(theta, component, s.warp_step)), weights);
    const double minus = weighted_sum(warp_image(x, nudged(theta, component, -s.warp_step)), weights);
    const double numeric = (plus - minus) / (2.0 * s.warp_step);
    tallies[component].add(relative_error(analytic, numeric, s.abs_floor), s.rel_tolerance);
  }
  finish(tallies, s, report);
}

void recognizer_suite(const GradcheckSettings& s, std::uint64_t seed, GradcheckReport& report) {
  std::vector<Tally> tallies(2);
  tallies[0].entry = {"recognizer", "params"};
  tallies[1].entry = {"recognizer", "input"};
  for (int trial = 0; trial < s.recognizer_trials; ++trial) {
    RngStream rng(derive_seed(seed, 0x4EC0ULL), static_cast<std::uint64_t>(trial));
    ModelParams params = init_model(s.model, rng.next_u64());
    ImageTensor x = random_image(s.model.in_channels, s.model.input, rng);
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.model.num_classes)));
    const BackwardResult r = backward(params, x, label, s.margin, kGradBoth);
    const bool on_params = trial % 2 == 0;
    const double h = s.recognizer_step;
    double analytic = 0.0, plus = 0.0, minus = 0.0;
    if (on_params) {
      const std::size_t k = rng.below(params.size());
      analytic = r.grad_params[k];
      const double saved = params.weights()[k];
      params.weights()[k] = saved + h;
      plus = sample_loss(params, x, label, s.margin);
      params.weights()[k] = saved - h;
      minus = sample_loss(params, x, label, s.margin);
      params.weights()[k] = saved;
    } else {
      const std::size_t k = rng.below(x.size());
      analytic = r.grad_input.data()[k];
      const double saved = x.data()[k];
      x.data()[k] = saved + h;
      plus = sample_loss(params, x, label, s.margin);
      x.data()[k] = saved - h;
      minus = sample_loss(params, x, label, s.margin);
      x.data()[k] = saved;
    }
    const double numeric = (plus - minus) / (2.0 * h);
    tallies[on_params ? 0 : 1].add(relative_error(analytic, numeric, s.abs_floor), s.rel_tolerance);
  }
  finish(tallies, s, report);
}

void end_to_end_suite(const GradcheckSettings& s, std::uint64_t seed, GradcheckReport& report) {
  auto tallies = component_tallies("end_to_end");
  for (int trial = 0; trial < s.end_to_end_trials; ++trial) {
    RngStream rng(derive_seed(seed, 0xE2E0ULL), static_cast<std::uint64_t>(trial));
    const int component = static_cast<int>(rng.below(4));
    const ModelParams params = init_model(s.model, rng.next_u64());
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.model.num_classes)));
    ImageTensor x;
    AffineParams theta;
    int redraws = 0;
    for (;;) {
      x = random_image(s.model.in_channels, s.model.input, rng);
      theta = random_theta(rng);
      if (!straddles_kink(theta, component, s.end_to_end_step, s.model.input) &&
          !crosses_relu(params, x, theta, component, s.end_to_end_step)) {
        break;
      }
      if (++redraws > kMaxRedraws) break;
    }
    tallies[component].entry.redrawn += redraws;
    WarpJacobian jac;
    const ImageTensor warped = warp_image_with_jacobian(x, theta, jac);
    if (s.corrupt_jacobian) s.corrupt_jacobian(jac);
    const BackwardResult r = backward(params, warped, label, s.margin, kGradInput);
    const double analytic = loss_grad_wrt_theta(r.grad_input, jac)[component];
    const double h = s.end_to_end_step;
    const double plus = sample_loss(params, warp_image(x, nudged(theta, component, h)), label, s.margin);
    const double minus = sample_loss(params, warp_image(x, nudged(theta, component, -h)), label, s.margin);
    const double numeric = (plus - minus) / (2.0 * h);
    tallies[component].add(relative_error(analytic, numeric, s.abs_floor), s.rel_tolerance);
  }
  finish(tallies, s, report);
}

}  // namespace

GradcheckSettings GradcheckSettings::for_trials(int n, const ModelSpec& model, const MarginConfig& margin) {
  require(n >= 0, "gradcheck: trial count must be nonnegative");
  GradcheckSettings s;
  s.warp_trials = n;
  s.recognizer_trials = (n + 9) / 10;
  s.end_to_end_trials = (n + 9) / 10;
  s.model = model;
  s.margin = margin;
  return s;
}

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  const double rel = std::abs(analytic - numeric) / denom;
  return std::isnan(rel) ? HUGE_VAL : rel;
}

int GradcheckReport::trials() const {
  int n = 0;
  for (const auto& e : entries) n += e.trials;
  return n;
}

int GradcheckReport::passed() const {
  int n = 0;
  for (const auto& e : entries) n += e.passed;
  return n;
}

GradcheckReport gradcheck(const GradcheckSettings& settings, std::uint64_t seed) {
  GradcheckReport report;
  if (settings.warp_trials > 0) warp_suite(settings, seed, report);
  if (settings.recognizer_trials > 0 || settings.end_to_end_trials > 0) {
    require(settings.model.valid(), "gradcheck: invalid model spec");
    require(settings.margin.valid(), "gradcheck: invalid margin settings");
  }
  if (settings.recognizer_trials > 0) recognizer_suite(settings, seed, report);
  if (settings.end_to_end_trials > 0) end_to_end_suite(settings, seed, report);
  return report;
}

}  // namespace aroface
