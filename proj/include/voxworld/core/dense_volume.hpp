// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/errors.hpp"
#include "voxworld/grid/sparse_grid.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace voxworld {

/// Placement of an N^3 chunk of coarse cells in the world. `origin` is the chunk's min corner.
struct ChunkFrame {
    Vec3 origin = Vec3::Zero();
    int extent = 32;
    double cell_size = 1.6;

    [[nodiscard]] LatticeFrame lattice() const { return {origin, cell_size}; }
    [[nodiscard]] double world_extent() const { return extent * cell_size; }
    [[nodiscard]] bool in_bounds(const VoxelCoord &c) const {
        return c.i >= 0 && c.j >= 0 && c.k >= 0 && c.i < extent && c.j < extent && c.k < extent;
    }

    /// Chunk whose footprint is centered at `center_xy` and whose vertical span is centered on `ego_height`.
    static ChunkFrame centered(const Eigen::Vector2d &center_xy, double ego_height, int extent = 32,
                               double cell_size = 1.6) {
        const double half = 0.5 * extent * cell_size;
        return {Vec3(center_xy.x() - half, center_xy.y() - half, ego_height - half), extent, cell_size};
    }

    friend bool operator==(const ChunkFrame &, const ChunkFrame &) = default;
};

/// Dense N^3 x C array in channel-last, i-major order: index = ((i*N + j)*N + k)*C + c.
template <typename T>
class DenseVolume {
  public:
    DenseVolume() = default;

    DenseVolume(ChunkFrame frame, int channels, T fill = T{})
        : frame_(frame), channels_(channels),
          values_(static_cast<std::size_t>(frame.extent) * frame.extent * frame.extent * channels, fill) {
        if (frame.extent <= 0 || channels <= 0) throw std::invalid_argument("volume extent and channels must be positive");
    }

    DenseVolume(ChunkFrame frame, int channels, std::vector<T> values)
        : frame_(frame), channels_(channels), values_(std::move(values)) {
        if (values_.size() != static_cast<std::size_t>(frame.extent) * frame.extent * frame.extent * channels) {
            throw std::invalid_argument("volume value count does not match N^3 x C");
        }
    }

    [[nodiscard]] const ChunkFrame &frame() const { return frame_; }
    [[nodiscard]] int extent() const { return frame_.extent; }
    [[nodiscard]] int channels() const { return channels_; }
    [[nodiscard]] std::size_t cell_count() const {
        return static_cast<std::size_t>(frame_.extent) * frame_.extent * frame_.extent;
    }

    [[nodiscard]] std::size_t cell_index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * frame_.extent + j) * frame_.extent + k;
    }
    [[nodiscard]] std::size_t index(int i, int j, int k, int c) const { return cell_index(i, j, k) * channels_ + c; }

    T &at(int i, int j, int k, int c) { return values_[index(i, j, k, c)]; }
    const T &at(int i, int j, int k, int c) const { return values_[index(i, j, k, c)]; }
    T &at(const VoxelCoord &v, int c) { return at(v.i, v.j, v.k, c); }
    const T &at(const VoxelCoord &v, int c) const { return at(v.i, v.j, v.k, c); }

    [[nodiscard]] std::vector<T> &values() { return values_; }
    [[nodiscard]] const std::vector<T> &values() const { return values_; }

    friend bool operator==(const DenseVolume &, const DenseVolume &) = default;

  private:
    ChunkFrame frame_;
    int channels_ = 0;
    std::vector<T> values_;
};

} // namespace voxworld
