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

#include "aroface/data.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aroface/error.hpp"
#include "aroface/warp.hpp"
#include "binary_io.hpp"

namespace aroface {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kTensorMagic[16] = {'A', 'R', 'O', 'T', 'E', 'N', '0', '1', 0, 0, 0, 0, 0, 0, 0, 0};
constexpr double kMinPerturbScale = 1e-3;

struct LandmarkComponent {
  double blob = 0.0;
  double grating = 0.0;
  double cos_dir = 1.0;
  double sin_dir = 0.0;
  double phase = 0.0;
};

using ClassPattern = std::array<LandmarkComponent, kNumLandmarks>;

ClassPattern draw_class_pattern(const SyntheticSpec& spec, std::uint64_t seed, int label, int channel) {
  RngStream rng(derive_seed(seed, 0xC1A55ULL, static_cast<std::uint64_t>(channel)), static_cast<std::uint64_t>(label));
  ClassPattern pattern;
  for (auto& comp : pattern) {
    comp.blob = spec.blob_amplitude * rng.normal();
    comp.grating = spec.grating_amplitude * rng.normal();
    const double angle = std::numbers::pi * rng.uniform();
    comp.cos_dir = std::cos(angle);
    comp.sin_dir = std::sin(angle);
    comp.phase = 2.0 * std::numbers::pi * rng.uniform();
  }
  return pattern;
}

ImageTensor render_class(const SyntheticSpec& spec, const LandmarkTemplate& tpl, std::uint64_t seed, int label) {
  ImageTensor img(spec.channels, spec.shape);
  const double blob_denom = 2.0 * spec.blob_sigma * spec.blob_sigma;
  const double window_denom = 2.0 * spec.grating_radius * spec.grating_radius;
  const double wave = 2.0 * std::numbers::pi / spec.grating_period;
  for (int c = 0; c < spec.channels; ++c) {
    const ClassPattern pattern = draw_class_pattern(spec, seed, label, c);
    for (int i = 0; i < spec.shape.height; ++i) {
      for (int j = 0; j < spec.shape.width; ++j) {
        const CenteredPoint p = to_centered(i, j, spec.shape);
        double value = 0.0;
        for (int k = 0; k < kNumLandmarks; ++k) {
          const auto& comp = pattern[k];
          const double du = p.u - tpl.points[k].u;
          const double dv = p.v - tpl.points[k].v;
          const double r2 = du * du + dv * dv;
          value += comp.blob * std::exp(-r2 / blob_denom);
          value += comp.grating * std::exp(-r2 / window_denom) *
                   std::cos(wave * (comp.cos_dir * du + comp.sin_dir * dv) + comp.phase);
        }
        img.at(c, i, j) = value;
      }
    }
  }
  return img;
}

Dataset generate_impl(const SyntheticSpec& spec, const LandmarkTemplate& tpl, std::uint64_t seed,
                      std::uint64_t noise_key) {
  require(spec.valid(), "generate_synthetic: invalid synthetic spec (need >= 2 classes, >= 1 sample per class)");
  require(tpl.valid(), "generate_synthetic: invalid landmark template");
  const LandmarkTemplate local = tpl.shape == spec.shape ? tpl : tpl.rescaled(spec.shape);
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.channels = spec.channels;
  ds.shape = spec.shape;
  ds.samples.reserve(static_cast<std::size_t>(spec.num_classes) * spec.per_class);
  for (int label = 0; label < spec.num_classes; ++label) {
    const ImageTensor base = render_class(spec, local, seed, label);
    for (int n = 0; n < spec.per_class; ++n) {
      Sample s;
      s.id = static_cast<std::uint64_t>(label) * spec.per_class + n;
      s.label = label;
      s.landmarks = local.points;
      s.image = base;
      if (spec.noise_std > 0.0) {
        RngStream rng(derive_seed(seed, noise_key), s.id);
        for (double& v : s.image.data()) v += spec.noise_std * rng.normal();
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

void check_finite_nonneg(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) throw ContractError(std::string(what) + " must be finite and nonnegative");
}

}  // namespace

bool SyntheticSpec::valid() const {
  return num_classes >= 2 && per_class >= 1 && channels >= 1 && shape.valid() && noise_std >= 0.0 &&
         blob_sigma > 0.0 && grating_period > 0.0 && grating_radius > 0.0;
}

Dataset generate_synthetic(const SyntheticSpec& spec, const LandmarkTemplate& tpl, std::uint64_t seed) {
  return generate_impl(spec, tpl, seed, 0);
}

Dataset generate_synthetic_split(const SyntheticSpec& spec, const LandmarkTemplate& tpl, std::uint64_t seed,
                                 std::uint64_t split) {
  return generate_impl(spec, tpl, seed, split);
}

bool PerturbSpec::valid() const {
  return std::isfinite(rotation_std) && std::isfinite(translation_std) && std::isfinite(scale_std) &&
         rotation_std >= 0.0 && translation_std >= 0.0 && scale_std >= 0.0;
}

AffineParams draw_perturbation(const PerturbSpec& spec, RngStream& rng) {
  check_finite_nonneg(spec.rotation_std, "rotation_std");
  check_finite_nonneg(spec.translation_std, "translation_std");
  check_finite_nonneg(spec.scale_std, "scale_std");
  AffineParams theta;
  theta.phi = spec.rotation_std * rng.normal();
  theta.du = spec.translation_std * rng.normal();
  theta.dv = spec.translation_std * rng.normal();
  theta.scale = std::max(kMinPerturbScale, 1.0 + spec.scale_std * rng.normal());
  return theta;
}

Sample apply_transform(const Sample& s, const AffineParams& theta) {
  Sample out;
  out.id = s.id;
  out.label = s.label;
  out.image = warp_image(s.image, theta);
  for (int k = 0; k < kNumLandmarks; ++k) out.landmarks[k] = forward(theta, s.landmarks[k]);
  return out;
}

Sample perturb_alignment(const Sample& s, const PerturbSpec& spec, RngStream& rng) {
  return apply_transform(s, draw_perturbation(spec, rng));
}

void write_tensor_file(const ImageTensor& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoError::Kind::kWriteFailed, path, "cannot write tensor file");
  out.write(kTensorMagic, sizeof kTensorMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(image.channels()));
  detail::put_u32(out, static_cast<std::uint32_t>(image.shape().height));
  detail::put_u32(out, static_cast<std::uint32_t>(image.shape().width));
  detail::put_f64s(out, image.data());
  if (!out) throw IoError(IoError::Kind::kWriteFailed, path, "tensor write failed");
}

ImageTensor read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::kMissingFile, path, "missing tensor file");
  char magic[16];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kTensorMagic, sizeof kTensorMagic) != 0) {
    throw IoError(IoError::Kind::kFileIntegrity, path, "tensor file has a bad magic header");
  }
  std::uint32_t c, h, w;
  if (!detail::get_u32(in, c) || !detail::get_u32(in, h) || !detail::get_u32(in, w)) {
    throw IoError(IoError::Kind::kFileIntegrity, path, "tensor file header truncated");
  }
  if (c == 0 || h == 0 || w == 0 || c > 4096 || h > 1u << 16 || w > 1u << 16) {
    throw IoError(IoError::Kind::kFileIntegrity, path, "tensor file header has implausible dims");
  }
  ImageTensor img(static_cast<int>(c), {static_cast<int>(h), static_cast<int>(w)});
  if (!detail::get_f64s(in, img.data())) throw IoError(IoError::Kind::kFileIntegrity, path, "tensor file truncated");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(IoError::Kind::kFileIntegrity, path, "tensor file has trailing bytes");
  }
  return img;
}

void save_dataset(const Dataset& ds, const std::string& directory) {
  std::error_code ec;
  fs::create_directories(fs::path(directory) / "images", ec);
  if (ec) throw IoError(IoError::Kind::kWriteFailed, directory, "cannot create dataset directory");
  {
    std::ofstream meta(fs::path(directory) / "dataset.json");
    if (!meta) throw IoError(IoError::Kind::kWriteFailed, directory + "/dataset.json", "cannot write dataset metadata");
    meta << json{{"num_classes", ds.num_classes},
                 {"channels", ds.channels},
                 {"height", ds.shape.height},
                 {"width", ds.shape.width},
                 {"samples", ds.samples.size()}}
                .dump()
         << '\n';
  }
  const std::string manifest_path = (fs::path(directory) / "manifest.jsonl").string();
  std::ofstream manifest(manifest_path);
  if (!manifest) throw IoError(IoError::Kind::kWriteFailed, manifest_path, "cannot write manifest");
  for (const auto& s : ds.samples) {
    std::ostringstream name;
    name << "images/" << std::setw(8) << std::setfill('0') << s.id << ".ten";
    write_tensor_file(s.image, (fs::path(directory) / name.str()).string());
    json lm = json::array();
    for (const auto& p : s.landmarks) {
      lm.push_back(p.u);
      lm.push_back(p.v);
    }
    json row{{"id", s.id},
             {"label", s.label},
             {"path", name.str()},
             {"shape", {s.image.channels(), s.image.shape().height, s.image.shape().width}},
             {"landmarks", lm}};
    // nlohmann serializes doubles with round-trip precision.
    manifest << row.dump() << '\n';
  }
  if (!manifest) throw IoError(IoError::Kind::kWriteFailed, manifest_path, "manifest write failed");
}

Dataset load_dataset(const std::string& directory) {
  const fs::path root(directory);
  const std::string manifest_path = (root / "manifest.jsonl").string();
  std::ifstream manifest(manifest_path);
  if (!manifest) throw IoError(IoError::Kind::kMissingFile, manifest_path, "missing dataset manifest");

  Dataset ds;
  bool have_meta = false;
  if (std::ifstream meta(root / "dataset.json"); meta) {
    try {
      const json m = json::parse(meta);
      ds.num_classes = m.at("num_classes").get<int>();
      ds.channels = m.at("channels").get<int>();
      ds.shape = {m.at("height").get<int>(), m.at("width").get<int>()};
      have_meta = true;
    } catch (const json::exception& e) {
      throw IoError(IoError::Kind::kMalformedManifest, (root / "dataset.json").string(),
                    std::string("malformed dataset metadata (") + e.what() + ")");
    }
  }

  std::string line;
  std::size_t line_no = 0;
  int max_label = -1;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Sample s;
    std::string rel;
    std::array<int, 3> dims{};
    try {
      const json row = json::parse(line);
      s.id = row.at("id").get<std::uint64_t>();
      s.label = row.at("label").get<int>();
      rel = row.at("path").get<std::string>();
      dims = row.at("shape").get<std::array<int, 3>>();
      const auto lm = row.at("landmarks").get<std::vector<double>>();
      if (lm.size() != 2 * kNumLandmarks) throw std::runtime_error("expected 10 landmark reals");
      for (int k = 0; k < kNumLandmarks; ++k) s.landmarks[k] = {lm[2 * k], lm[2 * k + 1]};
    } catch (const std::exception& e) {
      throw IoError(IoError::Kind::kMalformedManifest, manifest_path,
                    "malformed manifest line " + std::to_string(line_no) + " (" + e.what() + ")");
    }
    if (s.label < 0) {
      throw IoError(IoError::Kind::kMalformedManifest, manifest_path,
                    "negative label on manifest line " + std::to_string(line_no));
    }
    const std::string image_path = (root / rel).string();
    s.image = read_tensor_file(image_path);
    if (s.image.channels() != dims[0] || s.image.shape().height != dims[1] || s.image.shape().width != dims[2]) {
      throw IoError(IoError::Kind::kShapeMismatch, image_path, "tensor dims disagree with manifest shape");
    }
    if (!ds.samples.empty() && !s.image.same_layout(ds.samples.front().image)) {
      throw IoError(IoError::Kind::kShapeMismatch, image_path, "sample shape differs from the rest of the dataset");
    }
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw IoError(IoError::Kind::kMalformedManifest, manifest_path, "manifest lists no samples");
  const auto& first = ds.samples.front().image;
  if (have_meta) {
    if (ds.channels != first.channels() || !(ds.shape == first.shape())) {
      throw IoError(IoError::Kind::kShapeMismatch, directory, "dataset metadata shape disagrees with samples");
    }
    if (max_label >= ds.num_classes) {
      throw IoError(IoError::Kind::kMalformedManifest, manifest_path, "label exceeds declared class count");
    }
  } else {
    ds.channels = first.channels();
    ds.shape = first.shape();
    ds.num_classes = max_label + 1;
  }
  return ds;
}

}  // namespace aroface
