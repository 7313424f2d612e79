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
#include <string>
#include <vector>

#include "aroface/geometry.hpp"
#include "aroface/image.hpp"

namespace aroface {

enum class ExtractorKind { kConv, kMlp };

struct ConvStage {
  int out_channels = 8;
  int kernel = 5;
  int stride = 2;

  bool operator==(const ConvStage&) const = default;
};

/*!
 * Shape of the recognizer: an extractor (conv+ReLU stages or a one hidden
 * layer perceptron) followed by a linear map to the embedding, and a c x d
 * classifier with unit rows. Convolutions use "same" padding (kernel / 2).
 */
struct ModelSpec {
  int in_channels = 1;
  GridShape input{64, 64};
  ExtractorKind kind = ExtractorKind::kConv;
  std::vector<ConvStage> stages{{8, 5, 2}, {16, 5, 2}};
  int mlp_hidden = 64;
  int embedding_dim = 32;
  int num_classes = 10;

  bool valid() const;
  bool operator==(const ModelSpec&) const = default;
};

/// Named slice of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::vector<int> dims;

  std::size_t size() const;
  bool operator==(const ParamBlock&) const = default;
};

/// All weights of the recognizer in one flat vector, in declaration order.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }

  /// Parameters before this offset belong to the extractor.
  std::size_t extractor_size() const { return classifier_offset_; }
  std::span<double> classifier() { return std::span<double>(weights_).subspan(classifier_offset_); }
  std::span<const double> classifier() const {
    return std::span<const double>(weights_).subspan(classifier_offset_);
  }

  /// Rescale every classifier row to unit l2 norm.
  void normalize_classifier();
  bool all_finite() const;

  bool operator==(const ModelParams&) const = default;

 private:
  ModelSpec spec_;
  std::vector<ParamBlock> blocks_;
  std::size_t classifier_offset_ = 0;
  std::vector<double> weights_;
};

/// He-normal conv/hidden weights, Xavier-normal embedding map, unit random classifier rows.
ModelParams init_model(const ModelSpec& spec, std::uint64_t seed);

enum class MarginVariant { kSoftmax, kAngular, kCosine };

struct MarginConfig {
  MarginVariant variant = MarginVariant::kAngular;
  double logit_scale = 16.0;
  double margin = 0.5;

  bool valid() const;
};

std::string to_string(MarginVariant v);
MarginVariant margin_variant_from_string(const std::string& s);

/// l2-normalized embedding of x. Throws ContractError on input shape mismatch.
std::vector<double> embed(const ModelParams& params, const ImageTensor& x);

/// Which ReLU units are active (pre-activation > 0), in layer order.
std::vector<bool> relu_pattern(const ModelParams& params, const ImageTensor& x);

/// Cosine of the embedding to every classifier row.
std::vector<double> class_cosines(const ModelParams& params, std::span<const double> z);

/*!
 * Cross-entropy over margin-adjusted logits. Non-target logits are
 * s * cos(angle); the target logit is s * cos(angle + m) for the angular
 * variant, s * (cos(angle) - m) for the cosine variant and s * cos(angle)
 * for softmax. Cosines are clamped to [-1 + 1e-7, 1 - 1e-7] before arccos.
 * For angles beyond pi - m the angular target logit continues as
 * s * (cos(angle) + cos(m) - 1), which keeps it monotone and continuous.
 */
double margin_loss(std::span<const double> z, int label, const ModelParams& params, const MarginConfig& cfg);

/// Loss for a single image.
double sample_loss(const ModelParams& params, const ImageTensor& x, int label, const MarginConfig& cfg);

struct BackwardResult {
  double loss = 0.0;
  std::vector<double> grad_params;  // empty unless requested
  ImageTensor grad_input;           // empty unless requested
};

enum GradRequest : unsigned { kGradParams = 1u, kGradInput = 2u, kGradBoth = 3u };

/*!
 * Exact gradients of margin_loss(embed(x), label) with respect to the
 * parameters and/or the input pixels. Throws NumericalError if any
 * intermediate is non-finite.
 */
BackwardResult backward(const ModelParams& params, const ImageTensor& x, int label, const MarginConfig& cfg,
                        unsigned request = kGradBoth);

struct SgdSettings {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// Momentum buffer for sgd_update.
struct SgdState {
  std::vector<double> velocity;
};

/*!
 * One momentum-SGD step. Weight decay applies to extractor parameters only;
 * classifier rows are renormalized to unit length after the step.
 */
void sgd_update(ModelParams& params, std::span<const double> grads, const SgdSettings& opt, SgdState& state);

/// Flat binary checkpoint plus a "<path>.shapes.txt" manifest of block shapes.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace aroface
