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

#include "aroface/constraint.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "aroface/error.hpp"

namespace aroface {
namespace {

constexpr int kBisectionSteps = 48;
// Slack allowed when checking that total flow grows along the ray.
constexpr double kMonotoneSlack = 1e-12;

AffineParams along_ray(const AffineParams& theta, double t) {
  return {t * theta.phi, t * theta.du, t * theta.dv, 1.0 + t * (theta.scale - 1.0)};
}

}  // namespace

bool LandmarkTemplate::valid() const {
  if (!shape.valid()) return false;
  const double half_w = shape.width / 2.0;
  const double half_h = shape.height / 2.0;
  for (const auto& p : points) {
    if (!std::isfinite(p.u) || !std::isfinite(p.v)) return false;
    if (std::abs(p.u) > half_w || std::abs(p.v) > half_h) return false;
  }
  return true;
}

LandmarkTemplate LandmarkTemplate::rescaled(GridShape target) const {
  require(target.valid(), "LandmarkTemplate::rescaled: invalid target shape");
  LandmarkTemplate out;
  out.shape = target;
  const double su = static_cast<double>(target.width) / shape.width;
  const double sv = static_cast<double>(target.height) / shape.height;
  for (int k = 0; k < kNumLandmarks; ++k) out.points[k] = {points[k].u * su, points[k].v * sv};
  return out;
}

LandmarkTemplate load_template(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoError::Kind::kMissingFile, path, "cannot open landmark template");
  LandmarkTemplate tpl;
  std::string line;
  auto next_data_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      const auto pos = out.find_first_not_of(" \t\r");
      if (pos == std::string::npos || out[pos] == '#') continue;
      return true;
    }
    return false;
  };
  if (!next_data_line(line)) throw IoError(IoError::Kind::kMalformedManifest, path, "template is empty");
  {
    std::istringstream ss(line);
    if (!(ss >> tpl.shape.height >> tpl.shape.width)) {
      throw IoError(IoError::Kind::kMalformedManifest, path, "template header must be 'h w'");
    }
  }
  for (auto& p : tpl.points) {
    std::istringstream ss;
    if (!next_data_line(line)) {
      throw IoError(IoError::Kind::kMalformedManifest, path, "template needs exactly 5 landmark lines");
    }
    ss.str(line);
    if (!(ss >> p.u >> p.v)) throw IoError(IoError::Kind::kMalformedManifest, path, "landmark line must be 'u v'");
  }
  if (next_data_line(line)) {
    throw IoError(IoError::Kind::kMalformedManifest, path, "template has more than 5 landmark lines");
  }
  if (!tpl.valid()) throw IoError(IoError::Kind::kShapeMismatch, path, "template landmark outside image bounds");
  return tpl;
}

void save_template(const LandmarkTemplate& tpl, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(IoError::Kind::kWriteFailed, path, "cannot write landmark template");
  out << tpl.shape.height << ' ' << tpl.shape.width << '\n' << std::setprecision(17);
  for (const auto& p : tpl.points) out << p.u << ' ' << p.v << '\n';
}

bool BudgetSpec::valid() const {
  auto ok = [](double x) { return std::isfinite(x) && x >= 0.0; };
  return ok(max_rotation) && ok(max_translation_u) && ok(max_translation_v) && ok(max_scale_deviation) &&
         max_scale_deviation < 1.0;
}

AffineParams BudgetSpec::extreme() const {
  return {max_rotation, max_translation_u, max_translation_v, 1.0 + max_scale_deviation};
}

std::array<CenteredPoint, kNumLandmarks> landmark_flow(const AffineParams& theta, const LandmarkTemplate& tpl) {
  std::array<CenteredPoint, kNumLandmarks> flow;
  for (int k = 0; k < kNumLandmarks; ++k) {
    const CenteredPoint q = inverse(theta, tpl.points[k]);
    flow[k] = {q.u - tpl.points[k].u, q.v - tpl.points[k].v};
  }
  return flow;
}

double total_flow(const AffineParams& theta, const LandmarkTemplate& tpl) {
  double total = 0.0;
  for (const auto& f : landmark_flow(theta, tpl)) total += std::hypot(f.u, f.v);
  return total;
}

FlowBudget compute_budget(const BudgetSpec& bound, const LandmarkTemplate& tpl) {
  require(bound.valid(), "compute_budget: budget bounds must be nonnegative with scale deviation < 1");
  require(tpl.valid(), "compute_budget: invalid landmark template");
  FlowBudget budget;
  const auto flow = landmark_flow(bound.extreme(), tpl);
  for (int k = 0; k < kNumLandmarks; ++k) {
    budget.per_landmark[k] = std::hypot(flow[k].u, flow[k].v);
    budget.total += budget.per_landmark[k];
  }
  return budget;
}

bool is_feasible(const AffineParams& theta, const FlowBudget& budget, const LandmarkTemplate& tpl) {
  return total_flow(theta, tpl) <= budget.total + kFeasibilityTolerance;
}

AffineParams project(const AffineParams& theta, const FlowBudget& budget, const LandmarkTemplate& tpl) {
  require(theta.valid(), "project: invalid transform parameters");
  const double full = total_flow(theta, tpl);
  if (full <= budget.total + kFeasibilityTolerance) return theta;

  // Invariant: flow(lo) <= total < flow(hi).
  double lo = 0.0, hi = 1.0;
  double flow_lo = 0.0, flow_hi = full;
  for (int step = 0; step < kBisectionSteps; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double flow_mid = total_flow(along_ray(theta, mid), tpl);
    if (flow_mid + kMonotoneSlack < flow_lo || flow_mid > flow_hi + kMonotoneSlack) {
      std::ostringstream msg;
      msg << std::setprecision(17) << "project: total flow not monotone along the deviation ray (phi=" << theta.phi
          << ", du=" << theta.du << ", dv=" << theta.dv << ", scale=" << theta.scale << ") at t=" << mid
          << ": flow(lo)=" << flow_lo << ", flow(mid)=" << flow_mid << ", flow(hi)=" << flow_hi;
      throw NumericalError(msg.str());
    }
    if (flow_mid <= budget.total) {
      lo = mid;
      flow_lo = flow_mid;
    } else {
      hi = mid;
      flow_hi = flow_mid;
    }
  }
  return along_ray(theta, lo);
}

}  // namespace aroface
