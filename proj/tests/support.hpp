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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aroface/config.hpp"
#include "aroface/constraint.hpp"
#include "aroface/geometry.hpp"
#include "aroface/image.hpp"
#include "aroface/rng.hpp"

namespace aroface::testing {

inline std::string fixture(const std::string& name) { return std::string(AROFACE_FIXTURE_DIR) + "/" + name; }

inline ImageTensor random_image(int channels, GridShape shape, RngStream& rng) {
  ImageTensor img(channels, shape);
  for (double& v : img.data()) v = rng.normal();
  return img;
}

inline AffineParams random_theta(RngStream& rng, double rot = 0.6, double shift = 4.0, double scale = 0.4) {
  return {(rng.uniform() - 0.5) * rot, (rng.uniform() - 0.5) * shift, (rng.uniform() - 0.5) * shift,
          1.0 + (rng.uniform() - 0.5) * scale};
}

// Inverse map by solving A q = p - t with A = s [c -s; s c] through Cramer's rule.
inline CenteredPoint oracle_inverse(const AffineParams& th, CenteredPoint p) {
  const double a = th.scale * std::cos(th.phi), b = -th.scale * std::sin(th.phi);
  const double c = th.scale * std::sin(th.phi), d = th.scale * std::cos(th.phi);
  const double ru = p.u - th.du, rv = p.v - th.dv;
  const double det = a * d - b * c;
  return {(ru * d - b * rv) / det, (a * rv - c * ru) / det};
}

// Literal double sum over every pixel of the channel.
inline double oracle_bilinear(const ImageTensor& x, int ch, CenteredPoint p) {
  const GridShape s = x.shape();
  double acc = 0.0;
  for (int i = 0; i < s.height; ++i) {
    for (int j = 0; j < s.width; ++j) {
      const double pu = j - (s.width - 1) / 2.0;
      const double pv = (s.height - 1) / 2.0 - i;
      acc += x.at(ch, i, j) * std::max(0.0, 1.0 - std::abs(p.v - pv)) * std::max(0.0, 1.0 - std::abs(p.u - pu));
    }
  }
  return acc;
}

inline ImageTensor oracle_warp(const ImageTensor& x, const AffineParams& th) {
  const GridShape s = x.shape();
  ImageTensor out(x.channels(), s);
  for (int c = 0; c < x.channels(); ++c) {
    for (int i = 0; i < s.height; ++i) {
      for (int j = 0; j < s.width; ++j) {
        const CenteredPoint p{j - (s.width - 1) / 2.0, (s.height - 1) / 2.0 - i};
        out.at(c, i, j) = oracle_bilinear(x, c, oracle_inverse(th, p));
      }
    }
  }
  return out;
}

inline double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

inline LandmarkTemplate fixture_template() { return load_template(fixture("template_112.txt")); }

inline LandmarkTemplate random_template(RngStream& rng, GridShape shape = {64, 64}) {
  LandmarkTemplate tpl;
  tpl.shape = shape;
  for (auto& p : tpl.points) {
    p.u = (rng.uniform() - 0.5) * 0.9 * shape.width;
    p.v = (rng.uniform() - 0.5) * 0.9 * shape.height;
  }
  return tpl;
}

// A run small enough for unit tests: 4 classes, 16 x 16, tiny extractor.
inline RunConfig tiny_config() {
  RunConfig cfg;
  cfg.template_path = fixture("template_112.txt");
  cfg.synth.num_classes = 4;
  cfg.synth.per_class = 8;
  cfg.synth.shape = {16, 16};
  cfg.synth.blob_sigma = 2.0;
  cfg.synth.grating_radius = 2.0;
  cfg.synth_test_per_class = 4;
  cfg.model.stages = {{4, 3, 2}, {6, 3, 2}};
  cfg.model.embedding_dim = 8;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.pgd.budget = {0.05, 0.05, 0.05, 0.05};
  cfg.far_list = {0.1, 0.01};
  cfg.out_dir = "";
  return cfg;
}

}  // namespace aroface::testing
