// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace voxworld::buffers {

/// Row-major H x W x C image, index = (v * W + u) * C + c.
template <typename T>
class Image {
  public:
    Image() = default;
    Image(int width, int height, int channels = 1, T fill = T{})
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width <= 0 || height <= 0 || channels <= 0) throw std::invalid_argument("image dimensions must be positive");
    }

    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] int channels() const { return channels_; }
    [[nodiscard]] std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    [[nodiscard]] bool same_shape(int w, int h) const { return width_ == w && height_ == h; }

    T &at(int u, int v, int c = 0) { return data_[(static_cast<std::size_t>(v) * width_ + u) * channels_ + c]; }
    const T &at(int u, int v, int c = 0) const { return data_[(static_cast<std::size_t>(v) * width_ + u) * channels_ + c]; }

    [[nodiscard]] std::vector<T> &values() { return data_; }
    [[nodiscard]] const std::vector<T> &values() const { return data_; }

    friend bool operator==(const Image &, const Image &) = default;

  private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

using Mask = Image<std::uint8_t>;

} // namespace voxworld::buffers
