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
#include <string>
#include <vector>

#include "aroface/constraint.hpp"
#include "aroface/image.hpp"
#include "aroface/rng.hpp"

namespace aroface {

struct Sample {
  std::uint64_t id = 0;
  int label = 0;
  ImageTensor image;
  LandmarkSet landmarks{};

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  int num_classes = 0;
  int channels = 1;
  GridShape shape{};
  std::vector<Sample> samples;

  bool operator==(const Dataset&) const = default;
};

/*!
 * Synthetic identities. Every class owns a pattern made of landmark-centred
 * components: a smooth Gaussian blob and a fine-grained grating patch whose
 * orientation, phase and contrast are drawn per class. The fine patches carry
 * most of the identity signal and lose contrast under sub-pixel misalignment,
 * which is what makes registration errors hurt a recogniser trained only on
 * aligned data.
 */
struct SyntheticSpec {
  int num_classes = 10;
  int per_class = 200;
  int channels = 1;
  GridShape shape{64, 64};
  double noise_std = 0.3;
  double blob_amplitude = 0.6;
  double blob_sigma = 4.0;     // pixels
  double grating_amplitude = 1.0;
  double grating_period = 2.5;  // pixels
  double grating_radius = 5.0;  // pixels

  bool valid() const;
};

Dataset generate_synthetic(const SyntheticSpec& spec, const LandmarkTemplate& tpl, std::uint64_t seed);

/// Same classes as `generate_synthetic(spec, tpl, seed)`, fresh nuisance noise.
/// Used for held-out evaluation sets.
Dataset generate_synthetic_split(const SyntheticSpec& spec, const LandmarkTemplate& tpl, std::uint64_t seed,
                                 std::uint64_t split);

/// Zero-mean Gaussian alignment perturbation (scale centred on 1).
struct PerturbSpec {
  double rotation_std = 0.0;     // radians
  double translation_std = 0.0;  // pixels
  double scale_std = 0.0;        // dimensionless

  bool valid() const;
  bool is_zero() const { return rotation_std == 0.0 && translation_std == 0.0 && scale_std == 0.0; }
};

/// Draw theta = (N(0, rot), N(0, tr), N(0, tr), N(1, scale)); scale is kept positive.
AffineParams draw_perturbation(const PerturbSpec& spec, RngStream& rng);

/*!
 * Warp the sample by a drawn transform. Stored landmarks follow the content:
 * an original landmark p appears at forward(theta, p), i.e. the point whose
 * inverse image is p.
 */
Sample perturb_alignment(const Sample& s, const PerturbSpec& spec, RngStream& rng);
Sample apply_transform(const Sample& s, const AffineParams& theta);

/*!
 * Dataset directory: manifest.jsonl (one JSON object per sample with id,
 * label, path, shape [c,h,w] and 10 landmark reals) plus one ".ten" file per
 * sample: 16-byte magic "AROTEN01" NUL-padded, three little-endian u32
 * dims c, h, w, then c*h*w little-endian f64 values.
 */
void save_dataset(const Dataset& ds, const std::string& directory);
Dataset load_dataset(const std::string& directory);

void write_tensor_file(const ImageTensor& image, const std::string& path);
ImageTensor read_tensor_file(const std::string& path);

}  // namespace aroface
