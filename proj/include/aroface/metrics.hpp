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
#include <span>
#include <vector>

#include "aroface/data.hpp"
#include "aroface/parallel.hpp"
#include "aroface/recognizer.hpp"

namespace aroface {

struct TarAtFar {
  double far = 0.0;
  double threshold = 0.0;
  double tar = 0.0;
  /// false when far * impostor_pairs < 1: the order statistic cannot resolve it.
  bool reliable = true;
};

/*!
 * TAR at each FAR. The threshold is the ceil(far * N_imp)-th largest impostor
 * score and a pair is accepted when its score is strictly above it.
 */
std::vector<TarAtFar> tar_at_far(std::span<const double> genuine, std::span<const double> impostor,
                                 std::span<const double> far_list);

struct SetMetrics {
  double accuracy = 0.0;  // classifier arg-max over the whole set
  double rank1 = 0.0;     // nearest class centroid, probe half
  double rank5 = 0.0;
  std::size_t genuine_pairs = 0;
  std::size_t impostor_pairs = 0;
  std::vector<TarAtFar> tar;
};

struct EvalReport {
  PerturbSpec perturb;
  SetMetrics aligned;
  SetMetrics perturbed;
  // aligned - perturbed
  double accuracy_gap = 0.0;
  double rank1_gap = 0.0;
  double rank5_gap = 0.0;
  std::vector<double> tar_gap;
};

/*!
 * Score a model twice: on the aligned samples and on perturb_alignment copies
 * (sample n perturbed with RngStream(seed, id)).
 *
 * Identification: within each class, samples at even positions form the
 * gallery (always aligned, averaged into a unit centroid) and odd positions
 * are probes. Verification: every unordered pair of the set, cosine score.
 */
EvalReport evaluate(const ModelParams& params, const Dataset& ds, const PerturbSpec& spec,
                    const std::vector<double>& far_list, std::uint64_t seed, const Workers& workers = Workers(1));

/// Metrics from precomputed unit embeddings; gallery_embeddings are used for the centroids.
SetMetrics score_embeddings(const ModelParams& params, const Dataset& ds,
                            const std::vector<std::vector<double>>& embeddings,
                            const std::vector<std::vector<double>>& gallery_embeddings,
                            const std::vector<double>& far_list);

}  // namespace aroface
