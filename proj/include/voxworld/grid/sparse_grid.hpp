// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/errors.hpp"
#include "voxworld/core/geometry.hpp"
#include "voxworld/grid/semantic.hpp"

#include <cmath>
#include <compare>
#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace voxworld {

/// Signed integer lattice index of a voxel.
struct VoxelCoord {
    std::int32_t i = 0;
    std::int32_t j = 0;
    std::int32_t k = 0;

    friend auto operator<=>(const VoxelCoord &, const VoxelCoord &) = default;
    friend bool operator==(const VoxelCoord &, const VoxelCoord &) = default;
};

// Coordinates pack into 3 x 21-bit fields. The packed key orders exactly like (i, j, k)
// lexicographically, so an ordered map over keys iterates in sorted coordinate order.
inline constexpr int kCoordBits = 21;
inline constexpr std::int32_t kCoordMin = -(1 << (kCoordBits - 1));
inline constexpr std::int32_t kCoordMax = (1 << (kCoordBits - 1)) - 1;

constexpr bool coord_in_range(const VoxelCoord &c) {
    return c.i >= kCoordMin && c.i <= kCoordMax && c.j >= kCoordMin && c.j <= kCoordMax && c.k >= kCoordMin &&
           c.k <= kCoordMax;
}

constexpr std::uint64_t pack_coord(const VoxelCoord &c) {
    constexpr std::uint64_t mask = (std::uint64_t{1} << kCoordBits) - 1;
    const auto bias = [](std::int32_t v) { return static_cast<std::uint64_t>(std::int64_t{v} - kCoordMin) & mask; };
    return (bias(c.i) << (2 * kCoordBits)) | (bias(c.j) << kCoordBits) | bias(c.k);
}

constexpr VoxelCoord unpack_coord(std::uint64_t key) {
    constexpr std::uint64_t mask = (std::uint64_t{1} << kCoordBits) - 1;
    const auto unbias = [](std::uint64_t v) { return static_cast<std::int32_t>(std::int64_t(v) + kCoordMin); };
    return {unbias((key >> (2 * kCoordBits)) & mask), unbias((key >> kCoordBits) & mask), unbias(key & mask)};
}

/// Label plus optional vehicle instance id.
class SemanticVoxel {
  public:
    SemanticVoxel() = default;

    /// Throws std::invalid_argument unless instance_id is present exactly for vehicle labels.
    explicit SemanticVoxel(SemanticLabel label, std::optional<std::int32_t> instance_id = std::nullopt)
        : label_(label), instance_id_(instance_id) {
        if (is_vehicle(label) != instance_id.has_value()) {
            throw std::invalid_argument(std::string("instance id must be present exactly for vehicle labels (got ") +
                                        std::string(label_name(label)) + ")");
        }
        if (instance_id && *instance_id < 0) throw std::invalid_argument("instance id must be non-negative");
    }

    [[nodiscard]] SemanticLabel label() const { return label_; }
    [[nodiscard]] std::optional<std::int32_t> instance_id() const { return instance_id_; }

    friend bool operator==(const SemanticVoxel &, const SemanticVoxel &) = default;

  private:
    SemanticLabel label_ = SemanticLabel::Undefined;
    std::optional<std::int32_t> instance_id_;
};

/// Maps lattice indices to world space. Cell (i,j,k) spans the half-open box
/// [origin + i*s, origin + (i+1)*s) on each axis.
struct LatticeFrame {
    Vec3 origin = Vec3::Zero();
    double voxel_size = 0.2;

    [[nodiscard]] Vec3 cell_min(const VoxelCoord &c) const {
        return {origin.x() + c.i * voxel_size, origin.y() + c.j * voxel_size, origin.z() + c.k * voxel_size};
    }
    [[nodiscard]] Vec3 cell_max(const VoxelCoord &c) const {
        return {origin.x() + (c.i + 1) * voxel_size, origin.y() + (c.j + 1) * voxel_size,
                origin.z() + (c.k + 1) * voxel_size};
    }
    [[nodiscard]] Vec3 cell_center(const VoxelCoord &c) const {
        return origin + (Vec3(c.i, c.j, c.k) + Vec3::Constant(0.5)) * voxel_size;
    }
    [[nodiscard]] Aabb cell_box(const VoxelCoord &c) const { return {cell_min(c), cell_max(c)}; }

    /// Lattice cell containing a world point.
    [[nodiscard]] VoxelCoord coord_of(const Vec3 &p) const {
        const Vec3 q = (p - origin) / voxel_size;
        return {static_cast<std::int32_t>(std::floor(q.x())), static_cast<std::int32_t>(std::floor(q.y())),
                static_cast<std::int32_t>(std::floor(q.z()))};
    }

    friend bool operator==(const LatticeFrame &a, const LatticeFrame &b) {
        return a.origin == b.origin && a.voxel_size == b.voxel_size;
    }
};

/// Coordinate-indexed semantic voxels. Iteration is in sorted (i, j, k) order.
class SparseVoxelGrid {
    using Map = std::map<std::uint64_t, SemanticVoxel>;

  public:
    using value_type = std::pair<VoxelCoord, SemanticVoxel>;

    class const_iterator {
      public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = SparseVoxelGrid::value_type;
        using difference_type = std::ptrdiff_t;
        using pointer = void;
        using reference = value_type;

        const_iterator() = default;
        explicit const_iterator(Map::const_iterator it) : it_(it) {}

        value_type operator*() const { return {unpack_coord(it_->first), it_->second}; }
        const_iterator &operator++() {
            ++it_;
            return *this;
        }
        const_iterator operator++(int) {
            auto copy = *this;
            ++it_;
            return copy;
        }
        friend bool operator==(const const_iterator &a, const const_iterator &b) { return a.it_ == b.it_; }

      private:
        Map::const_iterator it_;
    };

    SparseVoxelGrid() = default;

    explicit SparseVoxelGrid(LatticeFrame frame) : frame_(std::move(frame)) {
        if (!(frame_.voxel_size > 0.0) || !std::isfinite(frame_.voxel_size)) {
            throw std::invalid_argument("voxel_size must be positive and finite");
        }
        if (!frame_.origin.allFinite()) throw std::invalid_argument("grid origin must be finite");
    }

    SparseVoxelGrid(const Vec3 &origin, double voxel_size) : SparseVoxelGrid(LatticeFrame{origin, voxel_size}) {}

    [[nodiscard]] const LatticeFrame &frame() const { return frame_; }
    [[nodiscard]] const Vec3 &origin() const { return frame_.origin; }
    [[nodiscard]] double voxel_size() const { return frame_.voxel_size; }

    [[nodiscard]] std::optional<SemanticVoxel> query(const VoxelCoord &c) const {
        if (!coord_in_range(c)) return std::nullopt;
        auto it = cells_.find(pack_coord(c));
        if (it == cells_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] bool contains(const VoxelCoord &c) const {
        return coord_in_range(c) && cells_.count(pack_coord(c)) != 0;
    }

    /// Insert or overwrite. Throws std::out_of_range beyond the 21-bit lattice extent.
    void set(const VoxelCoord &c, const SemanticVoxel &voxel) {
        if (!coord_in_range(c)) throw std::out_of_range("voxel coordinate outside the lattice extent");
        cells_.insert_or_assign(pack_coord(c), voxel);
    }

    /// Insert only when the cell is empty; returns whether it was inserted.
    bool insert(const VoxelCoord &c, const SemanticVoxel &voxel) {
        if (!coord_in_range(c)) throw std::out_of_range("voxel coordinate outside the lattice extent");
        return cells_.emplace(pack_coord(c), voxel).second;
    }

    bool erase(const VoxelCoord &c) { return coord_in_range(c) && cells_.erase(pack_coord(c)) != 0; }

    void clear() { cells_.clear(); }

    [[nodiscard]] std::size_t size() const { return cells_.size(); }
    [[nodiscard]] bool empty() const { return cells_.empty(); }

    [[nodiscard]] const_iterator begin() const { return const_iterator(cells_.begin()); }
    [[nodiscard]] const_iterator end() const { return const_iterator(cells_.end()); }

    [[nodiscard]] Vec3 cell_center(const VoxelCoord &c) const { return frame_.cell_center(c); }
    [[nodiscard]] Aabb cell_box(const VoxelCoord &c) const { return frame_.cell_box(c); }
    [[nodiscard]] VoxelCoord coord_of(const Vec3 &p) const { return frame_.coord_of(p); }

    friend bool operator==(const SparseVoxelGrid &a, const SparseVoxelGrid &b) {
        return a.frame_ == b.frame_ && a.cells_ == b.cells_;
    }

  private:
    LatticeFrame frame_;
    Map cells_;
};

/// Each voxel becomes its 8 children at half the voxel size; labels and instances are copied.
inline SparseVoxelGrid subdivide(const SparseVoxelGrid &grid) {
    SparseVoxelGrid out(grid.origin(), grid.voxel_size() * 0.5);
    for (const auto &[c, voxel] : grid) {
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int d = 0; d < 2; ++d) out.set({2 * c.i + a, 2 * c.j + b, 2 * c.k + d}, voxel);
    }
    return out;
}

/// Keeps voxels whose centers lie in the half-open box [min, max).
inline SparseVoxelGrid crop(const SparseVoxelGrid &grid, const Aabb &box) {
    SparseVoxelGrid out(grid.frame());
    if (box.empty()) return out;
    for (const auto &[c, voxel] : grid) {
        if (box.contains_half_open(grid.cell_center(c))) out.set(c, voxel);
    }
    return out;
}

enum class ConflictPolicy { FirstWins, SecondWins };

/// Integer lattice offset that maps `other`'s indices into `base`'s lattice.
/// Throws IncommensurateGrids if voxel sizes differ or origins are not a whole number of voxels apart.
inline VoxelCoord lattice_offset(const LatticeFrame &base, const LatticeFrame &other, double tolerance = 1e-9) {
    if (std::abs(base.voxel_size - other.voxel_size) > tolerance * base.voxel_size) {
        throw IncommensurateGrids("grids have different voxel sizes");
    }
    const Vec3 shift = (other.origin - base.origin) / base.voxel_size;
    VoxelCoord off{};
    for (int a = 0; a < 3; ++a) {
        const double r = std::round(shift[a]);
        if (std::abs(shift[a] - r) > tolerance) throw IncommensurateGrids("grid origins are not lattice-aligned");
        (a == 0 ? off.i : a == 1 ? off.j : off.k) = static_cast<std::int32_t>(r);
    }
    return off;
}

/// Union of two grids expressed in `a`'s frame. Coordinate conflicts follow `policy`.
inline SparseVoxelGrid merge(const SparseVoxelGrid &a, const SparseVoxelGrid &b,
                             ConflictPolicy policy = ConflictPolicy::FirstWins) {
    const VoxelCoord off = lattice_offset(a.frame(), b.frame());
    SparseVoxelGrid out = a;
    for (const auto &[c, voxel] : b) {
        const VoxelCoord shifted{c.i + off.i, c.j + off.j, c.k + off.k};
        if (policy == ConflictPolicy::FirstWins) {
            out.insert(shifted, voxel);
        } else {
            out.set(shifted, voxel);
        }
    }
    return out;
}

} // namespace voxworld
