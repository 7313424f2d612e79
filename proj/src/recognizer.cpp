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

#include "aroface/recognizer.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aroface/error.hpp"
#include "aroface/rng.hpp"

namespace aroface {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

constexpr double kMinSine = 1e-7;

int conv_out(int in, int kernel, int stride) { return (in + 2 * (kernel / 2) - kernel) / stride + 1; }

struct LayerGeometry {
  int cin, hin, win, cout, hout, wout, kernel, stride, pad;
  int patch() const { return cin * kernel * kernel; }
  int positions() const { return hout * wout; }
};

std::vector<LayerGeometry> conv_geometry(const ModelSpec& spec) {
  std::vector<LayerGeometry> out;
  int c = spec.in_channels, h = spec.input.height, w = spec.input.width;
  for (const auto& st : spec.stages) {
    LayerGeometry g{c, h, w, st.out_channels, conv_out(h, st.kernel, st.stride), conv_out(w, st.kernel, st.stride),
                    st.kernel, st.stride, st.kernel / 2};
    out.push_back(g);
    c = g.cout;
    h = g.hout;
    w = g.wout;
  }
  return out;
}

int feature_size(const ModelSpec& spec) {
  if (spec.kind == ExtractorKind::kMlp) return spec.mlp_hidden;
  const auto geo = conv_geometry(spec);
  if (geo.empty()) return spec.in_channels * static_cast<int>(spec.input.size());
  return geo.back().cout * geo.back().positions();
}

void im2col(std::span<const double> in, const LayerGeometry& g, std::vector<double>& col) {
  const int n = g.positions();
  col.assign(static_cast<std::size_t>(g.patch()) * n, 0.0);
  for (int ci = 0; ci < g.cin; ++ci) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        double* row = col.data() + static_cast<std::size_t>((ci * g.kernel + ki) * g.kernel + kj) * n;
        for (int oh = 0; oh < g.hout; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.hin) continue;
          const double* src = in.data() + (static_cast<std::size_t>(ci) * g.hin + ih) * g.win;
          for (int ow = 0; ow < g.wout; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.win) row[oh * g.wout + ow] = src[iw];
          }
        }
      }
    }
  }
}

void col2im(const RowMat& dcol, const LayerGeometry& g, std::span<double> din) {
  std::fill(din.begin(), din.end(), 0.0);
  for (int ci = 0; ci < g.cin; ++ci) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        const double* row = dcol.data() + static_cast<std::size_t>((ci * g.kernel + ki) * g.kernel + kj) *
                                              g.positions();
        for (int oh = 0; oh < g.hout; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.hin) continue;
          double* dst = din.data() + (static_cast<std::size_t>(ci) * g.hin + ih) * g.win;
          for (int ow = 0; ow < g.wout; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.win) dst[iw] += row[oh * g.wout + ow];
          }
        }
      }
    }
  }
}

struct ConvCache {
  std::vector<double> col;
  std::vector<double> pre;
  std::vector<double> act;
};

struct ForwardCache {
  std::vector<ConvCache> convs;
  std::vector<double> hidden_pre;
  std::vector<double> hidden_act;
  std::vector<double> embedding;  // before normalization
  double norm = 0.0;
  std::vector<double> z;
};

// Offsets of each block, in the order ModelParams lays them out.
struct Layout {
  std::vector<std::size_t> conv_w, conv_b;
  std::size_t hidden_w = 0, hidden_b = 0;
  std::size_t embed_w = 0, embed_b = 0;
  std::size_t classifier = 0;
};

Layout layout_of(const ModelParams& params) {
  Layout l;
  for (const auto& b : params.blocks()) {
    if (b.name.rfind("conv", 0) == 0) {
      (b.name.ends_with(".weight") ? l.conv_w : l.conv_b).push_back(b.offset);
    } else if (b.name == "hidden.weight") {
      l.hidden_w = b.offset;
    } else if (b.name == "hidden.bias") {
      l.hidden_b = b.offset;
    } else if (b.name == "embed.weight") {
      l.embed_w = b.offset;
    } else if (b.name == "embed.bias") {
      l.embed_b = b.offset;
    } else if (b.name == "classifier.weight") {
      l.classifier = b.offset;
    }
  }
  return l;
}

void check_input(const ModelParams& params, const ImageTensor& x) {
  const auto& spec = params.spec();
  if (x.channels() != spec.in_channels || !(x.shape() == spec.input)) {
    std::ostringstream msg;
    msg << "recognizer: input is " << x.channels() << "x" << x.shape().height << "x" << x.shape().width
        << " but model expects " << spec.in_channels << "x" << spec.input.height << "x" << spec.input.width;
    throw ContractError(msg.str());
  }
}

void run_forward(const ModelParams& params, const Layout& lay, const ImageTensor& x, ForwardCache& cache) {
  const auto& spec = params.spec();
  const auto w = params.weights();
  std::span<const double> feat = x.data();

  if (spec.kind == ExtractorKind::kConv) {
    const auto geo = conv_geometry(spec);
    cache.convs.resize(geo.size());
    for (std::size_t s = 0; s < geo.size(); ++s) {
      const auto& g = geo[s];
      auto& cc = cache.convs[s];
      im2col(feat, g, cc.col);
      cc.pre.resize(static_cast<std::size_t>(g.cout) * g.positions());
      ConstMatMap weight(w.data() + lay.conv_w[s], g.cout, g.patch());
      ConstMatMap col(cc.col.data(), g.patch(), g.positions());
      MatMap pre(cc.pre.data(), g.cout, g.positions());
      pre.noalias() = weight * col;
      ConstVecMap bias(w.data() + lay.conv_b[s], g.cout);
      pre.colwise() += bias;
      cc.act.resize(cc.pre.size());
      for (std::size_t n = 0; n < cc.pre.size(); ++n) cc.act[n] = cc.pre[n] > 0.0 ? cc.pre[n] : 0.0;
      feat = cc.act;
    }
  } else {
    const int in = static_cast<int>(x.size());
    ConstMatMap weight(w.data() + lay.hidden_w, spec.mlp_hidden, in);
    cache.hidden_pre.resize(spec.mlp_hidden);
    VecMap pre(cache.hidden_pre.data(), spec.mlp_hidden);
    pre.noalias() = weight * ConstVecMap(feat.data(), in);
    pre += ConstVecMap(w.data() + lay.hidden_b, spec.mlp_hidden);
    cache.hidden_act.resize(spec.mlp_hidden);
    for (int n = 0; n < spec.mlp_hidden; ++n) cache.hidden_act[n] = std::max(cache.hidden_pre[n], 0.0);
    feat = cache.hidden_act;
  }

  const int d = spec.embedding_dim;
  const int f = static_cast<int>(feat.size());
  cache.embedding.resize(d);
  VecMap e(cache.embedding.data(), d);
  e.noalias() = ConstMatMap(w.data() + lay.embed_w, d, f) * ConstVecMap(feat.data(), f);
  e += ConstVecMap(w.data() + lay.embed_b, d);
  cache.norm = e.norm();
  if (!(cache.norm > 0.0) || !std::isfinite(cache.norm)) {
    throw NumericalError("recognizer: embedding norm is zero or non-finite");
  }
  cache.z.resize(d);
  for (int k = 0; k < d; ++k) cache.z[k] = cache.embedding[k] / cache.norm;
}

std::span<const double> last_features(const ModelParams& params, const ImageTensor& x, const ForwardCache& cache) {
  if (params.spec().kind == ExtractorKind::kMlp) return cache.hidden_act;
  if (cache.convs.empty()) return x.data();
  return cache.convs.back().act;
}

// Loss and dL/dcos_j for every class.
double loss_and_cos_grad(std::span<const double> cosines, int label, const MarginConfig& cfg,
                         std::vector<double>* dcos) {
  const int c = static_cast<int>(cosines.size());
  std::vector<double> logits(c);
  double target_slope = 1.0;
  for (int j = 0; j < c; ++j) logits[j] = cfg.logit_scale * cosines[j];
  const double cy = cosines[label];
  switch (cfg.variant) {
    case MarginVariant::kSoftmax:
      break;
    case MarginVariant::kCosine:
      logits[label] = cfg.logit_scale * (cy - cfg.margin);
      break;
    case MarginVariant::kAngular: {
      // Past angle = pi - m, cos(angle + m) turns back up; continue linearly in cos instead.
      const double knee = -std::cos(cfg.margin);
      if (cy <= knee) {
        logits[label] = cfg.logit_scale * (cy - knee - 1.0);
        break;
      }
      const double sin_angle = std::sqrt(std::max(0.0, (1.0 - cy) * (1.0 + cy)));
      logits[label] = cfg.logit_scale * (cy * std::cos(cfg.margin) - sin_angle * std::sin(cfg.margin));
      target_slope = std::cos(cfg.margin) + cy * std::sin(cfg.margin) / std::max(sin_angle, kMinSine);
      break;
    }
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - peak);
  const double log_z = peak + std::log(denom);
  const double loss = log_z - logits[label];
  if (dcos) {
    dcos->resize(c);
    for (int j = 0; j < c; ++j) {
      const double p = std::exp(logits[j] - log_z);
      (*dcos)[j] = cfg.logit_scale * (j == label ? (p - 1.0) * target_slope : p);
    }
  }
  return loss;
}

}  // namespace

bool ModelSpec::valid() const {
  if (in_channels < 1 || !input.valid() || embedding_dim < 1 || num_classes < 2) return false;
  if (kind == ExtractorKind::kMlp) return mlp_hidden >= 1;
  int h = input.height, w = input.width;
  for (const auto& st : stages) {
    if (st.out_channels < 1 || st.kernel < 1 || st.stride < 1) return false;
    h = conv_out(h, st.kernel, st.stride);
    w = conv_out(w, st.kernel, st.stride);
    if (h < 1 || w < 1) return false;
  }
  return true;
}

std::size_t ParamBlock::size() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

ModelParams::ModelParams(ModelSpec spec) : spec_(std::move(spec)) {
  require(spec_.valid(), "ModelParams: invalid model spec");
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<int> dims) {
    ParamBlock b{std::move(name), offset, std::move(dims)};
    offset += b.size();
    blocks_.push_back(std::move(b));
  };
  if (spec_.kind == ExtractorKind::kConv) {
    const auto geo = conv_geometry(spec_);
    for (std::size_t s = 0; s < geo.size(); ++s) {
      const auto& g = geo[s];
      add("conv" + std::to_string(s) + ".weight", {g.cout, g.cin, g.kernel, g.kernel});
      add("conv" + std::to_string(s) + ".bias", {g.cout});
    }
  } else {
    add("hidden.weight", {spec_.mlp_hidden, spec_.in_channels * static_cast<int>(spec_.input.size())});
    add("hidden.bias", {spec_.mlp_hidden});
  }
  add("embed.weight", {spec_.embedding_dim, feature_size(spec_)});
  add("embed.bias", {spec_.embedding_dim});
  classifier_offset_ = offset;
  add("classifier.weight", {spec_.num_classes, spec_.embedding_dim});
  weights_.assign(offset, 0.0);
}

void ModelParams::normalize_classifier() {
  const int d = spec_.embedding_dim;
  auto cls = classifier();
  for (int r = 0; r < spec_.num_classes; ++r) {
    auto row = cls.subspan(static_cast<std::size_t>(r) * d, d);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0)) throw NumericalError("normalize_classifier: zero classifier row " + std::to_string(r));
    if (norm == 1.0) continue;
    for (double& v : row) v /= norm;
  }
}

bool ModelParams::all_finite() const {
  return std::all_of(weights_.begin(), weights_.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_model(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams params(spec);
  auto w = params.weights();
  std::uint64_t block_id = 0;
  for (const auto& b : params.blocks()) {
    RngStream rng(seed, block_id++);
    auto slice = w.subspan(b.offset, b.size());
    if (b.name.ends_with(".bias")) continue;
    double stddev = 1.0;
    if (b.name.rfind("conv", 0) == 0 || b.name == "hidden.weight") {
      const std::size_t fan_in = b.size() / static_cast<std::size_t>(b.dims[0]);
      stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    } else if (b.name == "embed.weight") {
      stddev = std::sqrt(2.0 / static_cast<double>(b.dims[0] + b.dims[1]));
    }
    for (double& v : slice) v = rng.normal(0.0, stddev);
  }
  params.normalize_classifier();
  return params;
}

bool MarginConfig::valid() const {
  if (!(logit_scale > 0.0) || !std::isfinite(logit_scale) || !(margin >= 0.0) || !std::isfinite(margin)) {
    return false;
  }
  if (variant == MarginVariant::kAngular && !(margin < std::acos(-1.0) / 2.0)) return false;
  return true;
}

std::string to_string(MarginVariant v) {
  switch (v) {
    case MarginVariant::kSoftmax: return "softmax";
    case MarginVariant::kAngular: return "angular";
    case MarginVariant::kCosine: return "cosine";
  }
  return "unknown";
}

MarginVariant margin_variant_from_string(const std::string& s) {
  if (s == "softmax") return MarginVariant::kSoftmax;
  if (s == "angular" || s == "arcface") return MarginVariant::kAngular;
  if (s == "cosine" || s == "cosface") return MarginVariant::kCosine;
  throw ContractError("unknown margin variant '" + s + "' (expected softmax, angular or cosine)");
}

std::vector<double> embed(const ModelParams& params, const ImageTensor& x) {
  check_input(params, x);
  ForwardCache cache;
  run_forward(params, layout_of(params), x, cache);
  return cache.z;
}

std::vector<bool> relu_pattern(const ModelParams& params, const ImageTensor& x) {
  check_input(params, x);
  ForwardCache cache;
  run_forward(params, layout_of(params), x, cache);
  std::vector<bool> out;
  for (const auto& cc : cache.convs) {
    for (double v : cc.pre) out.push_back(v > 0.0);
  }
  for (double v : cache.hidden_pre) out.push_back(v > 0.0);
  return out;
}

std::vector<double> class_cosines(const ModelParams& params, std::span<const double> z) {
  const int c = params.spec().num_classes;
  const int d = params.spec().embedding_dim;
  require(static_cast<int>(z.size()) == d, "class_cosines: embedding dimension mismatch");
  std::vector<double> out(c);
  VecMap(out.data(), c).noalias() = ConstMatMap(params.classifier().data(), c, d) * ConstVecMap(z.data(), d);
  return out;
}

double margin_loss(std::span<const double> z, int label, const ModelParams& params, const MarginConfig& cfg) {
  require(label >= 0 && label < params.spec().num_classes, "margin_loss: label out of range");
  const auto cosines = class_cosines(params, z);
  return loss_and_cos_grad(cosines, label, cfg, nullptr);
}

double sample_loss(const ModelParams& params, const ImageTensor& x, int label, const MarginConfig& cfg) {
  return margin_loss(embed(params, x), label, params, cfg);
}

BackwardResult backward(const ModelParams& params, const ImageTensor& x, int label, const MarginConfig& cfg,
                        unsigned request) {
  check_input(params, x);
  const auto& spec = params.spec();
  require(label >= 0 && label < spec.num_classes, "backward: label out of range");
  const Layout lay = layout_of(params);
  const auto w = params.weights();
  ForwardCache cache;
  run_forward(params, lay, x, cache);

  BackwardResult out;
  const bool want_params = request & kGradParams;
  const bool want_input = request & kGradInput;
  if (want_params) out.grad_params.assign(params.size(), 0.0);
  double* gp = want_params ? out.grad_params.data() : nullptr;

  const int c = spec.num_classes;
  const int d = spec.embedding_dim;
  const auto cosines = class_cosines(params, cache.z);
  std::vector<double> dcos;
  out.loss = loss_and_cos_grad(cosines, label, cfg, &dcos);
  if (!std::isfinite(out.loss)) throw NumericalError("backward: non-finite loss");

  // cos = W_c z
  ConstMatMap wc(w.data() + lay.classifier, c, d);
  ConstVecMap gcos(dcos.data(), c);
  ConstVecMap z(cache.z.data(), d);
  if (gp) MatMap(gp + lay.classifier, c, d).noalias() = gcos * z.transpose();
  Eigen::VectorXd dz = wc.transpose() * gcos;

  // z = e / |e|
  Eigen::VectorXd de = (dz - z * z.dot(dz)) / cache.norm;

  const auto feat = last_features(params, x, cache);
  const int f = static_cast<int>(feat.size());
  if (gp) {
    MatMap(gp + lay.embed_w, d, f).noalias() = de * ConstVecMap(feat.data(), f).transpose();
    VecMap(gp + lay.embed_b, d) = de;
  }
  Eigen::VectorXd dfeat = ConstMatMap(w.data() + lay.embed_w, d, f).transpose() * de;

  if (want_input) out.grad_input = ImageTensor(x.channels(), x.shape());

  if (spec.kind == ExtractorKind::kConv) {
    const auto geo = conv_geometry(spec);
    std::vector<double> dact(dfeat.data(), dfeat.data() + dfeat.size());
    if (geo.empty() && want_input) std::copy(dact.begin(), dact.end(), out.grad_input.data().begin());
    for (int s = static_cast<int>(geo.size()) - 1; s >= 0; --s) {
      const auto& g = geo[s];
      const auto& cc = cache.convs[s];
      RowMat dpre(g.cout, g.positions());
      for (std::size_t n = 0; n < cc.pre.size(); ++n) dpre.data()[n] = cc.pre[n] > 0.0 ? dact[n] : 0.0;
      ConstMatMap col(cc.col.data(), g.patch(), g.positions());
      if (gp) {
        MatMap(gp + lay.conv_w[s], g.cout, g.patch()).noalias() = dpre * col.transpose();
        VecMap(gp + lay.conv_b[s], g.cout) = dpre.rowwise().sum();
      }
      if (s == 0 && !want_input) break;
      RowMat dcol = ConstMatMap(w.data() + lay.conv_w[s], g.cout, g.patch()).transpose() * dpre;
      if (s == 0) {
        col2im(dcol, g, out.grad_input.data());
      } else {
        dact.assign(static_cast<std::size_t>(g.cin) * g.hin * g.win, 0.0);
        col2im(dcol, g, dact);
      }
    }
  } else {
    const int in = static_cast<int>(x.size());
    const int hdim = spec.mlp_hidden;
    Eigen::VectorXd dpre(hdim);
    for (int n = 0; n < hdim; ++n) dpre[n] = cache.hidden_pre[n] > 0.0 ? dfeat[n] : 0.0;
    if (gp) {
      MatMap(gp + lay.hidden_w, hdim, in).noalias() = dpre * ConstVecMap(x.data().data(), in).transpose();
      VecMap(gp + lay.hidden_b, hdim) = dpre;
    }
    if (want_input) {
      VecMap(out.grad_input.data().data(), in).noalias() =
          ConstMatMap(w.data() + lay.hidden_w, hdim, in).transpose() * dpre;
    }
  }

  if (gp && !std::all_of(out.grad_params.begin(), out.grad_params.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericalError("backward: non-finite parameter gradient");
  }
  if (want_input && !out.grad_input.all_finite()) throw NumericalError("backward: non-finite input gradient");
  return out;
}

void sgd_update(ModelParams& params, std::span<const double> grads, const SgdSettings& opt, SgdState& state) {
  require(grads.size() == params.size(), "sgd_update: gradient size does not match parameters");
  auto w = params.weights();
  if (state.velocity.size() != w.size()) state.velocity.assign(w.size(), 0.0);
  const std::size_t extractor = params.extractor_size();
  for (std::size_t n = 0; n < w.size(); ++n) {
    double g = grads[n];
    if (n < extractor && opt.weight_decay != 0.0) g += opt.weight_decay * w[n];
    double& v = state.velocity[n];
    v = opt.momentum * v + g;
    w[n] -= opt.lr * v;
  }
  params.normalize_classifier();
}

}  // namespace aroface
