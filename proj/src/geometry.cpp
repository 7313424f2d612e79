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

#include "aroface/geometry.hpp"

#include <cmath>

#include "aroface/error.hpp"

namespace aroface {

bool AffineParams::valid() const {
  return std::isfinite(phi) && std::isfinite(du) && std::isfinite(dv) && std::isfinite(scale) &&
         scale > 0.0;
}

double AffineParams::operator[](int c) const {
  switch (c) {
    case 0: return phi;
    case 1: return du;
    case 2: return dv;
    case 3: return scale;
  }
  throw ContractError("AffineParams component index out of range");
}

double& AffineParams::operator[](int c) {
  switch (c) {
    case 0: return phi;
    case 1: return du;
    case 2: return dv;
    case 3: return scale;
  }
  throw ContractError("AffineParams component index out of range");
}

CenteredPoint to_centered(int i, int j, GridShape shape) {
  return {j - (shape.width - 1) / 2.0, (shape.height - 1) / 2.0 - i};
}

GridPoint from_centered(CenteredPoint p, GridShape shape) {
  return {(shape.height - 1) / 2.0 - p.v, p.u + (shape.width - 1) / 2.0};
}

CenteredPoint forward(const AffineParams& theta, CenteredPoint p) {
  if (theta == AffineParams::identity()) return p;
  const double c = std::cos(theta.phi);
  const double s = std::sin(theta.phi);
  return {theta.scale * (c * p.u - s * p.v) + theta.du,
          theta.scale * (s * p.u + c * p.v) + theta.dv};
}

CenteredPoint inverse(const AffineParams& theta, CenteredPoint p) {
  if (theta == AffineParams::identity()) return p;
  const double c = std::cos(theta.phi);
  const double s = std::sin(theta.phi);
  const double au = p.u - theta.du;
  const double av = p.v - theta.dv;
  return {(c * au + s * av) / theta.scale, (-s * au + c * av) / theta.scale};
}

CenteredPoint inverse_with_jacobian(const AffineParams& theta, CenteredPoint p, InverseJacobian& jac) {
  const double c = std::cos(theta.phi);
  const double s = std::sin(theta.phi);
  const double inv_scale = 1.0 / theta.scale;
  const CenteredPoint q = inverse(theta, p);
  // q = R(-phi) (p - shift) / scale
  jac.du_dtheta = {q.v, -c * inv_scale, -s * inv_scale, -q.u * inv_scale};
  jac.dv_dtheta = {-q.u, s * inv_scale, -c * inv_scale, -q.v * inv_scale};
  return q;
}

}  // namespace aroface
