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

// Checkpoint layout (all integers little-endian):
//   8 bytes  magic "AROCKPT1"
//   u32      in_channels, height, width, extractor kind (0 conv, 1 mlp)
//   u32      stage count, then (out_channels, kernel, stride) per stage
//   u32      mlp_hidden, embedding_dim, num_classes
//   u64      weight count
//   f64[]    weights in block declaration order
// A sidecar "<path>.shapes.txt" lists "name offset d0xd1x..." per block.

#include <cstring>
#include <fstream>

#include "aroface/error.hpp"
#include "aroface/recognizer.hpp"
#include "binary_io.hpp"

namespace aroface {
namespace {
constexpr char kMagic[8] = {'A', 'R', 'O', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoError::Kind::kWriteFailed, path, "cannot write checkpoint");
  const auto& spec = params.spec();
  out.write(kMagic, sizeof kMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(spec.in_channels));
  detail::put_u32(out, static_cast<std::uint32_t>(spec.input.height));
  detail::put_u32(out, static_cast<std::uint32_t>(spec.input.width));
  detail::put_u32(out, spec.kind == ExtractorKind::kConv ? 0u : 1u);
  detail::put_u32(out, static_cast<std::uint32_t>(spec.stages.size()));
  for (const auto& st : spec.stages) {
    detail::put_u32(out, static_cast<std::uint32_t>(st.out_channels));
    detail::put_u32(out, static_cast<std::uint32_t>(st.kernel));
    detail::put_u32(out, static_cast<std::uint32_t>(st.stride));
  }
  detail::put_u32(out, static_cast<std::uint32_t>(spec.mlp_hidden));
  detail::put_u32(out, static_cast<std::uint32_t>(spec.embedding_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(spec.num_classes));
  detail::put_u64(out, params.size());
  detail::put_f64s(out, params.weights());
  if (!out) throw IoError(IoError::Kind::kWriteFailed, path, "checkpoint write failed");

  std::ofstream shapes(path + ".shapes.txt");
  if (!shapes) throw IoError(IoError::Kind::kWriteFailed, path + ".shapes.txt", "cannot write shape manifest");
  for (const auto& b : params.blocks()) {
    shapes << b.name << ' ' << b.offset << ' ';
    for (std::size_t k = 0; k < b.dims.size(); ++k) shapes << (k ? "x" : "") << b.dims[k];
    shapes << '\n';
  }
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::kMissingFile, path, "cannot open checkpoint");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError(IoError::Kind::kFileIntegrity, path, "not a checkpoint (bad magic)");
  }
  auto u32 = [&]() {
    std::uint32_t v;
    if (!detail::get_u32(in, v)) throw IoError(IoError::Kind::kFileIntegrity, path, "truncated checkpoint header");
    return static_cast<int>(v);
  };
  ModelSpec spec;
  spec.in_channels = u32();
  spec.input.height = u32();
  spec.input.width = u32();
  spec.kind = u32() == 0 ? ExtractorKind::kConv : ExtractorKind::kMlp;
  const int stages = u32();
  if (stages < 0 || stages > 64) throw IoError(IoError::Kind::kFileIntegrity, path, "implausible stage count");
  spec.stages.resize(stages);
  for (auto& st : spec.stages) {
    st.out_channels = u32();
    st.kernel = u32();
    st.stride = u32();
  }
  spec.mlp_hidden = u32();
  spec.embedding_dim = u32();
  spec.num_classes = u32();
  if (!spec.valid()) throw IoError(IoError::Kind::kShapeMismatch, path, "checkpoint header describes an invalid model");
  ModelParams params(spec);
  std::uint64_t count = 0;
  if (!detail::get_u64(in, count)) throw IoError(IoError::Kind::kFileIntegrity, path, "truncated checkpoint header");
  if (count != params.size()) throw IoError(IoError::Kind::kShapeMismatch, path, "weight count does not match header");
  if (!detail::get_f64s(in, params.weights())) {
    throw IoError(IoError::Kind::kFileIntegrity, path, "truncated checkpoint weights");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(IoError::Kind::kFileIntegrity, path, "trailing bytes after checkpoint weights");
  }
  return params;
}

}  // namespace aroface
