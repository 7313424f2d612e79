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
#include <cstddef>

namespace aroface {

struct GridShape {
  int height = 1;
  int width = 1;

  bool valid() const { return height >= 1 && width >= 1; }
  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
  bool operator==(const GridShape&) const = default;
};

/*!
 * Point in the centered image frame.
 *
 * u runs left to right, v runs bottom to top, and the origin sits at the
 * geometric center of the pixel grid. Row index i therefore grows against v.
 */
struct CenteredPoint {
  double u = 0.0;
  double v = 0.0;

  bool operator==(const CenteredPoint&) const = default;
};

/// Fractional (row, column) location on the pixel grid.
struct GridPoint {
  double i = 0.0;
  double j = 0.0;
};

/// Index of a transform component inside the 4-vector layout.
enum class Component : int { kRotation = 0, kShiftU = 1, kShiftV = 2, kScale = 3 };
inline constexpr int kNumComponents = 4;

/*!
 * Rotation / translation / scale transform about the centered origin:
 *
 *   forward(p) = scale * R(phi) * p + (du, dv)
 *
 * R rotates counterclockwise in the (u, v) frame. Scale is multiplicative;
 * scale = 1 + lambda where lambda is the deviation form (lambda > -1).
 */
struct AffineParams {
  double phi = 0.0;
  double du = 0.0;
  double dv = 0.0;
  double scale = 1.0;

  static constexpr AffineParams identity() { return {}; }

  bool valid() const;
  double lambda() const { return scale - 1.0; }

  double operator[](int c) const;
  double& operator[](int c);

  /// Components as (phi, du, dv, scale).
  std::array<double, 4> as_array() const { return {phi, du, dv, scale}; }
  /// Deviation from identity as (phi, du, dv, scale - 1).
  std::array<double, 4> deviation() const { return {phi, du, dv, scale - 1.0}; }

  bool operator==(const AffineParams&) const = default;
};

CenteredPoint to_centered(int i, int j, GridShape shape);
GridPoint from_centered(CenteredPoint p, GridShape shape);

CenteredPoint forward(const AffineParams& theta, CenteredPoint p);
CenteredPoint inverse(const AffineParams& theta, CenteredPoint p);

/// Partial derivatives of inverse(theta, p) with respect to (phi, du, dv, scale).
struct InverseJacobian {
  std::array<double, 4> du_dtheta;  // d q_u / d theta_c
  std::array<double, 4> dv_dtheta;  // d q_v / d theta_c
};

/// inverse(theta, p) together with its closed-form parameter Jacobian.
CenteredPoint inverse_with_jacobian(const AffineParams& theta, CenteredPoint p, InverseJacobian& jac);

}  // namespace aroface
