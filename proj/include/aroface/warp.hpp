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
#include <span>
#include <vector>

#include "aroface/geometry.hpp"
#include "aroface/image.hpp"

namespace aroface {

/*!
 * Bilinear (tent kernel) sample of a channel at a centered location:
 *
 *   I(u, v) = sum_ij x_ij * max(0, 1 - |v - Pv(i)|) * max(0, 1 - |u - Pu(j)|)
 *
 * Only pixels with nonzero weight are visited. Locations farther than one
 * pixel outside the grid read as 0.
 */
double bilinear_sample(const ChannelView& channel, CenteredPoint p);

/// Spatial gradient (dI/du, dI/dv) of bilinear_sample.
struct SampleGradient {
  double d_du = 0.0;
  double d_dv = 0.0;
};

/*!
 * Derivative of bilinear_sample in u and v.
 *
 * Where a tent kernel k(t) = max(0, 1 - |t|) has a kink the left limit in t
 * is used: k'(t) = +1 on (-1, 0], -1 on (0, 1], 0 elsewhere. This makes the
 * result the exact one-sided derivative from below on every kink locus.
 */
SampleGradient sample_gradient(const ChannelView& channel, CenteredPoint p);

/// x'_{c,i,j} = I_x(inverse(theta, (Pu(j), Pv(i)))) for every channel.
ImageTensor warp_image(const ImageTensor& x, const AffineParams& theta);

/// d x'_{c,i,j} / d (phi, du, dv, scale) for every output entry.
class WarpJacobian {
 public:
  WarpJacobian() = default;
  WarpJacobian(int channels, GridShape shape);

  int channels() const { return channels_; }
  GridShape shape() const { return shape_; }
  std::size_t entries() const { return values_.size(); }

  std::array<double, 4>& at(int c, int i, int j) { return values_[index(c, i, j)]; }
  const std::array<double, 4>& at(int c, int i, int j) const { return values_[index(c, i, j)]; }
  std::span<const std::array<double, 4>> values() const { return values_; }
  std::span<std::array<double, 4>> values() { return values_; }

 private:
  std::size_t index(int c, int i, int j) const {
    return (static_cast<std::size_t>(c) * shape_.height + i) * shape_.width + j;
  }

  int channels_ = 0;
  GridShape shape_{};
  std::vector<std::array<double, 4>> values_;
};

WarpJacobian warp_param_jacobian(const ImageTensor& x, const AffineParams& theta);

/// Warped image and its parameter Jacobian from a single pass over the grid.
ImageTensor warp_image_with_jacobian(const ImageTensor& x, const AffineParams& theta, WarpJacobian& jac);

/*!
 * Contract an upstream image gradient with the warp Jacobian.
 *
 * Accumulates channel-major then row-major so the result is reproducible.
 * Throws ContractError on shape mismatch.
 */
std::array<double, 4> loss_grad_wrt_theta(const ImageTensor& dloss_dwarped, const WarpJacobian& jac);

}  // namespace aroface
