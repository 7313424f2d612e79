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
#include <string>

#include "aroface/geometry.hpp"

namespace aroface {

inline constexpr int kNumLandmarks = 5;

using LandmarkSet = std::array<CenteredPoint, kNumLandmarks>;

/// Five alignment landmarks in centered pixel coordinates of `shape`.
struct LandmarkTemplate {
  LandmarkSet points{};
  GridShape shape{};

  /// Shape valid and every point inside the image rectangle.
  bool valid() const;

  /// Template rescaled to another grid (coordinates scale per axis).
  LandmarkTemplate rescaled(GridShape target) const;
};

/*!
 * Read a template file: a header line "h w" followed by five lines "u v"
 * in centered pixel coordinates. Throws IoError on malformed input.
 */
LandmarkTemplate load_template(const std::string& path);
void save_template(const LandmarkTemplate& tpl, const std::string& path);

/// Upper bounds on the individual transform components.
struct BudgetSpec {
  double max_rotation = 0.01;         // radians
  double max_translation_u = 0.01;    // pixels
  double max_translation_v = 0.01;    // pixels
  double max_scale_deviation = 0.01;  // bound on |scale - 1|

  bool valid() const;
  /// Transform at the positive extremes of every bound.
  AffineParams extreme() const;
};

struct FlowBudget {
  std::array<double, kNumLandmarks> per_landmark{};
  double total = 0.0;
};

inline constexpr double kFeasibilityTolerance = 1e-9;

/// f_p = inverse(theta, p) - p for each template landmark.
std::array<CenteredPoint, kNumLandmarks> landmark_flow(const AffineParams& theta, const LandmarkTemplate& tpl);

/// Sum over landmarks of |f_p|_2.
double total_flow(const AffineParams& theta, const LandmarkTemplate& tpl);

FlowBudget compute_budget(const BudgetSpec& bound, const LandmarkTemplate& tpl);

bool is_feasible(const AffineParams& theta, const FlowBudget& budget, const LandmarkTemplate& tpl);

/*!
 * Map theta into the feasible set.
 *
 * Feasible inputs are returned unchanged. Otherwise the deviation from the
 * identity, delta = (phi, du, dv, scale - 1), is shrunk along the ray
 * identity + t * delta and the largest t in [0, 1] whose total flow stays
 * within budget is located by bisection. Total flow must be nondecreasing
 * in t over the bisection bracket; a violation throws NumericalError.
 */
AffineParams project(const AffineParams& theta, const FlowBudget& budget, const LandmarkTemplate& tpl);

}  // namespace aroface
