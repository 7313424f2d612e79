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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aroface/recognizer.hpp"
#include "aroface/warp.hpp"

namespace aroface {

struct GradcheckSettings {
  int warp_trials = 1000;        // random image (<= 16 x 16, 1-3 channels), theta, component
  int recognizer_trials = 100;   // random parameter or input entry
  int end_to_end_trials = 100;   // loss through warp through model, random component
  double warp_step = 1e-5;
  double recognizer_step = 1e-6;
  double end_to_end_step = 1e-6;
  double rel_tolerance = 1e-3;
  double abs_floor = 1e-6;
  double pass_fraction = 0.95;
  ModelSpec model;  // used by the recognizer and end-to-end suites
  MarginConfig margin;
  /// Test hook: applied to every analytic warp Jacobian before use.
  std::function<void(WarpJacobian&)> corrupt_jacobian;

  /// warp suite n trials, the other two ceil(n / 10).
  static GradcheckSettings for_trials(int n, const ModelSpec& model, const MarginConfig& margin);
};

/// |a - n| / max(|a|, |n|, abs_floor)
double relative_error(double analytic, double numeric, double abs_floor);

struct GradcheckEntry {
  std::string suite;      // warp, recognizer, end_to_end
  std::string component;  // rotation, shift_u, shift_v, scale, params, input
  int trials = 0;
  int passed = 0;
  int redrawn = 0;  // draws rejected for straddling a sampling or ReLU kink
  double worst_rel_error = 0.0;
  bool pass = true;  // passed >= pass_fraction * trials
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool pass = true;
  int trials() const;
  int passed() const;
};

/*!
 * Central finite differences against the analytic warp Jacobian, the
 * recognizer backward pass, and the chain through both. Trials whose
 * sampling coordinates cross an integer grid line inside [theta - h,
 * theta + h] are redrawn, and so are end-to-end trials where a ReLU unit
 * changes state over that interval. Failures are report entries, never
 * exceptions.
 */
GradcheckReport gradcheck(const GradcheckSettings& settings, std::uint64_t seed);

}  // namespace aroface
