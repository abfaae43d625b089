// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/grid/sparse_grid.hpp"

#include <array>
#include <limits>
#include <optional>
#include <stdexcept>
#include <unordered_set>

namespace voxworld::buffers {

struct RayHit {
    VoxelCoord coord;
    /// Metric distance along the unit ray to the entry face of the voxel (0 when the origin is inside it).
    double distance = 0.0;
};

/// Grid traversal (Amanatides-Woo) over a sparse grid. Occupancy is mirrored into hash sets at
/// voxel and 8^3-brick level; cells of empty bricks are stepped through without lookups.
class VoxelRaycaster {
  public:
    static constexpr int kBrickShift = 3;

    explicit VoxelRaycaster(const SparseVoxelGrid &grid) : frame_(grid.frame()) {
        cells_.reserve(grid.size());
        for (const auto &[c, v] : grid) {
            cells_.insert(pack_coord(c));
            bricks_.insert(brick_key(c));
            if (cells_.size() == 1) {
                lo_ = hi_ = c;
            } else {
                lo_ = {std::min(lo_.i, c.i), std::min(lo_.j, c.j), std::min(lo_.k, c.k)};
                hi_ = {std::max(hi_.i, c.i), std::max(hi_.j, c.j), std::max(hi_.k, c.k)};
            }
        }
    }

    [[nodiscard]] const LatticeFrame &frame() const { return frame_; }
    [[nodiscard]] bool empty() const { return cells_.empty(); }

    /// First occupied voxel along origin + t * direction / |direction|, t in [0, max_range].
    [[nodiscard]] std::optional<RayHit> cast(const Vec3 &origin, const Vec3 &direction, double max_range) const {
        const double norm = direction.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("ray direction must be nonzero");
        if (!(max_range > 0.0)) throw std::invalid_argument("ray max_range must be positive");
        if (cells_.empty()) return std::nullopt;
        const Vec3 d = direction / norm;
        const double vs = frame_.voxel_size;
        const auto span = ray_box_interval(origin, d, frame_.cell_min(lo_), frame_.cell_max(hi_));
        if (!span || span->second < 0.0 || span->first > max_range) return std::nullopt;
        const double t_start = std::max(0.0, span->first);
        const double t_end = std::min(max_range, span->second);

        const std::array<std::int32_t, 3> lo{lo_.i, lo_.j, lo_.k}, hi{hi_.i, hi_.j, hi_.k};
        const Vec3 p = (origin + t_start * d - frame_.origin) / vs;
        std::array<std::int32_t, 3> cell{}, step{};
        std::array<double, 3> inv{};
        for (int a = 0; a < 3; ++a) {
            cell[a] = std::clamp(static_cast<std::int32_t>(std::floor(p[a])), lo[a], hi[a]);
            step[a] = d[a] > 0.0 ? 1 : (d[a] < 0.0 ? -1 : 0);
            inv[a] = d[a] != 0.0 ? 1.0 / d[a] : 0.0;
        }
        const auto next_boundary = [&](int a) {
            if (step[a] == 0) return std::numeric_limits<double>::infinity();
            const double plane = frame_.origin[a] + (cell[a] + (step[a] > 0 ? 1 : 0)) * vs;
            return (plane - origin[a]) * inv[a];
        };

        std::uint64_t current_brick = ~std::uint64_t{0};
        bool brick_occupied = false;
        double t_cell = t_start;
        while (true) {
            const VoxelCoord c{cell[0], cell[1], cell[2]};
            const auto bk = brick_key(c);
            if (bk != current_brick) {
                current_brick = bk;
                brick_occupied = bricks_.count(bk) != 0;
            }
            if (brick_occupied && cells_.count(pack_coord(c))) {
                const auto iv = ray_box_interval(origin, d, frame_.cell_min(c), frame_.cell_max(c));
                const double entry = std::max(0.0, iv ? iv->first : t_cell);
                if (entry > max_range) return std::nullopt;
                return RayHit{c, entry};
            }
            int axis = 0;
            double t_next = next_boundary(0);
            for (int a = 1; a < 3; ++a) {
                const double tb = next_boundary(a);
                if (tb < t_next) t_next = tb, axis = a;
            }
            if (!(t_next <= t_end)) return std::nullopt;
            cell[axis] += step[axis];
            if (cell[axis] < lo[axis] || cell[axis] > hi[axis]) return std::nullopt;
            t_cell = t_next;
        }
    }

  private:
    static std::uint64_t brick_key(const VoxelCoord &c) {
        return pack_coord({c.i >> kBrickShift, c.j >> kBrickShift, c.k >> kBrickShift});
    }

    LatticeFrame frame_;
    std::unordered_set<std::uint64_t> cells_;
    std::unordered_set<std::uint64_t> bricks_;
    VoxelCoord lo_{}, hi_{};
};

/// One-off raycast; build a VoxelRaycaster when casting many rays against the same grid.
inline std::optional<RayHit> raycast_dda(const SparseVoxelGrid &grid, const Vec3 &origin, const Vec3 &direction,
                                         double max_range) {
    return VoxelRaycaster(grid).cast(origin, direction, max_range);
}

} // namespace voxworld::buffers
