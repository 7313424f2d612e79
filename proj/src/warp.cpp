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

#include "aroface/warp.hpp"

#include <algorithm>
#include <cmath>

#include "aroface/error.hpp"

namespace aroface {
namespace {

inline double tent(double t) { return std::max(0.0, 1.0 - std::abs(t)); }

// Left-limit derivative of the tent kernel.
inline double tent_slope(double t) {
  if (t > -1.0 && t <= 0.0) return 1.0;
  if (t > 0.0 && t <= 1.0) return -1.0;
  return 0.0;
}

// Candidate rows/columns around a fractional coordinate. Four entries cover
// every index whose kernel argument can reach |t| <= 1, including rounding.
struct Support {
  int first = 0;
  int count = 0;
  std::array<double, 4> offset{};  // t = coordinate - P(index)
};

Support row_support(double v, GridShape shape) {
  Support s;
  const double fi = (shape.height - 1) / 2.0 - v;
  if (!(fi > -3.0 && fi < shape.height + 2.0)) return s;
  const int lo = std::max(0, static_cast<int>(std::floor(fi)) - 1);
  const int hi = std::min(shape.height - 1, static_cast<int>(std::floor(fi)) + 2);
  s.first = lo;
  s.count = std::max(0, hi - lo + 1);
  for (int k = 0; k < s.count; ++k) {
    s.offset[k] = v - ((shape.height - 1) / 2.0 - (lo + k));
  }
  return s;
}

Support col_support(double u, GridShape shape) {
  Support s;
  const double fj = u + (shape.width - 1) / 2.0;
  if (!(fj > -3.0 && fj < shape.width + 2.0)) return s;
  const int lo = std::max(0, static_cast<int>(std::floor(fj)) - 1);
  const int hi = std::min(shape.width - 1, static_cast<int>(std::floor(fj)) + 2);
  s.first = lo;
  s.count = std::max(0, hi - lo + 1);
  for (int k = 0; k < s.count; ++k) {
    s.offset[k] = u - ((lo + k) - (shape.width - 1) / 2.0);
  }
  return s;
}

double sample_with(const ChannelView& ch, const Support& rows, const Support& cols) {
  double acc = 0.0;
  for (int a = 0; a < rows.count; ++a) {
    const double wv = tent(rows.offset[a]);
    if (wv == 0.0) continue;
    for (int b = 0; b < cols.count; ++b) {
      const double wu = tent(cols.offset[b]);
      if (wu == 0.0) continue;
      acc += ch.at(rows.first + a, cols.first + b) * wv * wu;
    }
  }
  return acc;
}

SampleGradient gradient_with(const ChannelView& ch, const Support& rows, const Support& cols) {
  SampleGradient g;
  for (int a = 0; a < rows.count; ++a) {
    const double wv = tent(rows.offset[a]);
    const double sv = tent_slope(rows.offset[a]);
    if (wv == 0.0 && sv == 0.0) continue;
    for (int b = 0; b < cols.count; ++b) {
      const double x = ch.at(rows.first + a, cols.first + b);
      g.d_du += x * wv * tent_slope(cols.offset[b]);
      g.d_dv += x * sv * tent(cols.offset[b]);
    }
  }
  return g;
}

// inverse() with the trigonometry hoisted out of the pixel loop. Uses the
// same arithmetic so results match geometry::inverse bit for bit.
struct InverseMap {
  explicit InverseMap(const AffineParams& theta)
      : theta(theta), identity(theta == AffineParams::identity()),
        c(std::cos(theta.phi)), s(std::sin(theta.phi)), inv_scale(1.0 / theta.scale) {}

  CenteredPoint operator()(CenteredPoint p) const {
    if (identity) return p;
    const double au = p.u - theta.du;
    const double av = p.v - theta.dv;
    return {(c * au + s * av) / theta.scale, (-s * au + c * av) / theta.scale};
  }

  void jacobian(CenteredPoint q, InverseJacobian& jac) const {
    jac.du_dtheta = {q.v, -c * inv_scale, -s * inv_scale, -q.u * inv_scale};
    jac.dv_dtheta = {-q.u, s * inv_scale, -c * inv_scale, -q.v * inv_scale};
  }

  AffineParams theta;
  bool identity;
  double c, s, inv_scale;
};

}  // namespace

ImageTensor::ImageTensor(int channels, GridShape shape, double fill)
    : channels_(channels), shape_(shape) {
  require(channels >= 1 && shape.valid(), "ImageTensor: channels and shape must be positive");
  data_.assign(static_cast<std::size_t>(channels) * shape.size(), fill);
}

ImageTensor::ImageTensor(int channels, GridShape shape, std::vector<double> data)
    : channels_(channels), shape_(shape), data_(std::move(data)) {
  require(channels >= 1 && shape.valid(), "ImageTensor: channels and shape must be positive");
  require(data_.size() == static_cast<std::size_t>(channels) * shape.size(),
          "ImageTensor: data length must equal channels*height*width");
}

bool ImageTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double bilinear_sample(const ChannelView& channel, CenteredPoint p) {
  return sample_with(channel, row_support(p.v, channel.shape), col_support(p.u, channel.shape));
}

SampleGradient sample_gradient(const ChannelView& channel, CenteredPoint p) {
  return gradient_with(channel, row_support(p.v, channel.shape), col_support(p.u, channel.shape));
}

ImageTensor warp_image(const ImageTensor& x, const AffineParams& theta) {
  require(theta.valid(), "warp_image: invalid transform parameters");
  const GridShape shape = x.shape();
  ImageTensor out(x.channels(), shape);
  const InverseMap inv(theta);
  for (int i = 0; i < shape.height; ++i) {
    for (int j = 0; j < shape.width; ++j) {
      const CenteredPoint q = inv(to_centered(i, j, shape));
      const Support rows = row_support(q.v, shape);
      const Support cols = col_support(q.u, shape);
      for (int c = 0; c < x.channels(); ++c) out.at(c, i, j) = sample_with(x.channel(c), rows, cols);
    }
  }
  return out;
}

WarpJacobian::WarpJacobian(int channels, GridShape shape)
    : channels_(channels), shape_(shape),
      values_(static_cast<std::size_t>(channels) * shape.size(), std::array<double, 4>{}) {}

ImageTensor warp_image_with_jacobian(const ImageTensor& x, const AffineParams& theta, WarpJacobian& jac) {
  require(theta.valid(), "warp_image_with_jacobian: invalid transform parameters");
  const GridShape shape = x.shape();
  ImageTensor out(x.channels(), shape);
  jac = WarpJacobian(x.channels(), shape);
  const InverseMap inv(theta);
  InverseJacobian qjac;
  for (int i = 0; i < shape.height; ++i) {
    for (int j = 0; j < shape.width; ++j) {
      const CenteredPoint q = inv(to_centered(i, j, shape));
      inv.jacobian(q, qjac);
      const Support rows = row_support(q.v, shape);
      const Support cols = col_support(q.u, shape);
      for (int c = 0; c < x.channels(); ++c) {
        const ChannelView ch = x.channel(c);
        out.at(c, i, j) = sample_with(ch, rows, cols);
        const SampleGradient g = gradient_with(ch, rows, cols);
        auto& entry = jac.at(c, i, j);
        for (int k = 0; k < kNumComponents; ++k) {
          entry[k] = g.d_du * qjac.du_dtheta[k] + g.d_dv * qjac.dv_dtheta[k];
        }
      }
    }
  }
  return out;
}

WarpJacobian warp_param_jacobian(const ImageTensor& x, const AffineParams& theta) {
  WarpJacobian jac;
  warp_image_with_jacobian(x, theta, jac);
  return jac;
}

std::array<double, 4> loss_grad_wrt_theta(const ImageTensor& dloss_dwarped, const WarpJacobian& jac) {
  if (dloss_dwarped.channels() != jac.channels() || !(dloss_dwarped.shape() == jac.shape())) {
    throw ContractError("loss_grad_wrt_theta: upstream gradient and Jacobian shapes differ");
  }
  std::array<double, 4> out{};
  const auto upstream = dloss_dwarped.data();
  const auto values = jac.values();
  for (std::size_t n = 0; n < upstream.size(); ++n) {
    for (int k = 0; k < kNumComponents; ++k) out[k] += upstream[n] * values[n][k];
  }
  return out;
}

}  // namespace aroface
