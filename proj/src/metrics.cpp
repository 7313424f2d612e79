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

#include "aroface/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "aroface/error.hpp"

namespace aroface {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

std::vector<TarAtFar> tar_at_far(std::span<const double> genuine, std::span<const double> impostor,
                                 std::span<const double> far_list) {
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(imp.begin(), imp.end(), std::greater<>());
  std::vector<TarAtFar> out;
  for (double far : far_list) {
    require(far > 0.0 && far < 1.0, "tar_at_far: FAR must lie in (0, 1)");
    TarAtFar entry;
    entry.far = far;
    if (imp.empty() || genuine.empty()) {
      entry.reliable = false;
      out.push_back(entry);
      continue;
    }
    const double expected = far * static_cast<double>(imp.size());
    entry.reliable = expected >= 1.0;
    // Guard against representation error such as 0.1 * 10 = 1.0000000000000002.
    std::size_t rank = static_cast<std::size_t>(std::ceil(expected - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, imp.size());
    entry.threshold = imp[rank - 1];
    const auto accepted = std::count_if(genuine.begin(), genuine.end(), [&](double s) { return s > entry.threshold; });
    entry.tar = static_cast<double>(accepted) / static_cast<double>(genuine.size());
    out.push_back(entry);
  }
  return out;
}

SetMetrics score_embeddings(const ModelParams& params, const Dataset& ds,
                            const std::vector<std::vector<double>>& embeddings,
                            const std::vector<std::vector<double>>& gallery_embeddings,
                            const std::vector<double>& far_list) {
  const std::size_t n = ds.samples.size();
  require(embeddings.size() == n && gallery_embeddings.size() == n, "score_embeddings: embedding count mismatch");
  const int classes = ds.num_classes;
  SetMetrics m;

  std::size_t correct = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto cos = class_cosines(params, embeddings[s]);
    const auto best = std::max_element(cos.begin(), cos.end()) - cos.begin();
    if (best == ds.samples[s].label) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);

  // Gallery / probe split by position within class.
  const int d = static_cast<int>(embeddings.front().size());
  std::vector<std::vector<double>> centroid(classes, std::vector<double>(d, 0.0));
  std::vector<int> seen(classes, 0);
  std::vector<std::size_t> probes;
  for (std::size_t s = 0; s < n; ++s) {
    const int label = ds.samples[s].label;
    if (seen[label]++ % 2 == 0) {
      for (int k = 0; k < d; ++k) centroid[label][k] += gallery_embeddings[s][k];
    } else {
      probes.push_back(s);
    }
  }
  std::vector<bool> has_gallery(classes, false);
  for (int c = 0; c < classes; ++c) {
    double sq = 0.0;
    for (double v : centroid[c]) sq += v * v;
    if (sq > 0.0) {
      has_gallery[c] = true;
      const double norm = std::sqrt(sq);
      for (double& v : centroid[c]) v /= norm;
    }
  }
  std::size_t hit1 = 0, hit5 = 0;
  for (std::size_t s : probes) {
    const int label = ds.samples[s].label;
    if (!has_gallery[label]) continue;
    const double own = dot(embeddings[s], centroid[label]);
    int better = 0;
    for (int c = 0; c < classes; ++c) {
      if (c != label && has_gallery[c] && dot(embeddings[s], centroid[c]) > own) ++better;
    }
    if (better < 1) ++hit1;
    if (better < 5) ++hit5;
  }
  if (!probes.empty()) {
    m.rank1 = static_cast<double>(hit1) / static_cast<double>(probes.size());
    m.rank5 = static_cast<double>(hit5) / static_cast<double>(probes.size());
  }

  std::vector<double> genuine, impostor;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double score = dot(embeddings[a], embeddings[b]);
      (ds.samples[a].label == ds.samples[b].label ? genuine : impostor).push_back(score);
    }
  }
  m.genuine_pairs = genuine.size();
  m.impostor_pairs = impostor.size();
  m.tar = tar_at_far(genuine, impostor, far_list);
  return m;
}

EvalReport evaluate(const ModelParams& params, const Dataset& ds, const PerturbSpec& spec,
                    const std::vector<double>& far_list, std::uint64_t seed, const Workers& workers) {
  require(!ds.samples.empty(), "evaluate: dataset is empty");
  require(spec.valid(), "evaluate: perturbation stds must be nonnegative");
  for (double far : far_list) require(far > 0.0 && far < 1.0, "evaluate: FAR values must lie in (0, 1)");
  require(ds.num_classes <= params.spec().num_classes, "evaluate: dataset has more classes than the model");

  const std::size_t n = ds.samples.size();
  std::vector<std::vector<double>> aligned(n), perturbed(n);
  workers.parallel_for(n, [&](std::size_t s) {
    const Sample& sample = ds.samples[s];
    aligned[s] = embed(params, sample.image);
    RngStream rng(seed, sample.id);
    perturbed[s] = embed(params, perturb_alignment(sample, spec, rng).image);
  });

  EvalReport report;
  report.perturb = spec;
  report.aligned = score_embeddings(params, ds, aligned, aligned, far_list);
  report.perturbed = score_embeddings(params, ds, perturbed, aligned, far_list);
  report.accuracy_gap = report.aligned.accuracy - report.perturbed.accuracy;
  report.rank1_gap = report.aligned.rank1 - report.perturbed.rank1;
  report.rank5_gap = report.aligned.rank5 - report.perturbed.rank5;
  for (std::size_t k = 0; k < far_list.size(); ++k) {
    report.tar_gap.push_back(report.aligned.tar[k].tar - report.perturbed.tar[k].tar);
  }
  return report;
}

}  // namespace aroface
