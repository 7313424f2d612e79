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

#include <span>
#include <vector>

#include "aroface/error.hpp"
#include "aroface/geometry.hpp"

namespace aroface {

/// Read-only view of one channel plane (row-major).
struct ChannelView {
  std::span<const double> data;
  GridShape shape;

  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape.width + j]; }
};

/// channels x height x width real image, channel-major then row-major.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, GridShape shape, double fill = 0.0);
  ImageTensor(int channels, GridShape shape, std::vector<double> data);

  int channels() const { return channels_; }
  GridShape shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return shape_.size(); }

  double& at(int c, int i, int j) { return data_[index(c, i, j)]; }
  double at(int c, int i, int j) const { return data_[index(c, i, j)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  ChannelView channel(int c) const {
    return {std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * plane_size(), plane_size()),
            shape_};
  }

  bool same_layout(const ImageTensor& other) const {
    return channels_ == other.channels_ && shape_ == other.shape_;
  }
  bool all_finite() const;

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t index(int c, int i, int j) const {
    return (static_cast<std::size_t>(c) * shape_.height + i) * shape_.width + j;
  }

  int channels_ = 0;
  GridShape shape_{};
  std::vector<double> data_;
};

}  // namespace aroface
