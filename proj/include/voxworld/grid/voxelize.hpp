// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/grid/sparse_grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace voxworld {

/// True when some point of the closed segment [p0, p1] lies in the half-open cell [lo, hi).
///
/// Works in segment-parameter space: each axis contributes an interval of t with the
/// open/closed end inherited from the half-open cell, and the segment touches the cell iff
/// the intersection of those intervals with [0, 1] is non-empty.
inline bool segment_touches_cell(const Vec3 &p0, const Vec3 &p1, const Vec3 &lo, const Vec3 &hi) {
    const Vec3 d = p1 - p0;
    double t_lo = 0.0, t_hi = 1.0;
    bool lo_open = false, hi_open = false;
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (!(p0[a] >= lo[a] && p0[a] < hi[a])) return false;
            continue;
        }
        const double ta = (lo[a] - p0[a]) / d[a];
        const double tb = (hi[a] - p0[a]) / d[a];
        // d > 0: t in [ta, tb);  d < 0: t in (tb, ta]
        const double lower = d[a] > 0.0 ? ta : tb;
        const double upper = d[a] > 0.0 ? tb : ta;
        const bool lower_open = d[a] < 0.0;
        const bool upper_open = d[a] > 0.0;
        if (lower > t_lo || (lower == t_lo && lower_open)) {
            t_lo = lower;
            lo_open = lower_open;
        }
        if (upper < t_hi || (upper == t_hi && upper_open)) {
            t_hi = upper;
            hi_open = upper_open;
        }
    }
    return t_lo < t_hi || (t_lo == t_hi && !lo_open && !hi_open);
}

/// Lattice cells touched by the segment, in sorted coordinate order.
inline std::vector<VoxelCoord> cells_touched_by_segment(const LatticeFrame &frame, const Vec3 &p0, const Vec3 &p1) {
    if (!p0.allFinite() || !p1.allFinite()) throw std::invalid_argument("segment endpoints must be finite");
    const VoxelCoord a = frame.coord_of(p0.cwiseMin(p1));
    const VoxelCoord b = frame.coord_of(p0.cwiseMax(p1));
    std::vector<VoxelCoord> out;
    for (std::int32_t i = a.i - 1; i <= b.i + 1; ++i)
        for (std::int32_t j = a.j - 1; j <= b.j + 1; ++j)
            for (std::int32_t k = a.k - 1; k <= b.k + 1; ++k) {
                const VoxelCoord c{i, j, k};
                if (segment_touches_cell(p0, p1, frame.cell_min(c), frame.cell_max(c))) out.push_back(c);
            }
    return out;
}

/// Marks every voxel whose cell intersects the segment [p0, p1].
inline void voxelize_segment(SparseVoxelGrid &grid, const Vec3 &p0, const Vec3 &p1, const SemanticVoxel &value) {
    for (const auto &c : cells_touched_by_segment(grid.frame(), p0, p1)) grid.set(c, value);
}

inline void voxelize_polyline(SparseVoxelGrid &grid, const std::vector<Vec3> &vertices, const SemanticVoxel &value) {
    for (std::size_t v = 1; v < vertices.size(); ++v) voxelize_segment(grid, vertices[v - 1], vertices[v], value);
}

/// Box rotated by `heading` about +z. half_extents are (length/2, width/2, height/2) in the box frame.
struct OrientedBox {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3::Constant(0.5);
    double heading = 0.0;

    [[nodiscard]] bool contains(const Vec3 &p) const {
        const Vec3 local = yaw_rotation(-heading) * (p - center);
        return (local.cwiseAbs().array() <= half_extents.array()).all();
    }

    /// World-axis half extents of the box's bounding AABB.
    [[nodiscard]] Vec3 aabb_half_extents() const {
        const double c = std::abs(std::cos(heading)), s = std::abs(std::sin(heading));
        return {c * half_extents.x() + s * half_extents.y(), s * half_extents.x() + c * half_extents.y(),
                half_extents.z()};
    }

    [[nodiscard]] std::array<Eigen::Vector2d, 4> footprint() const {
        const double c = std::cos(heading), s = std::sin(heading);
        const Eigen::Vector2d ex(c * half_extents.x(), s * half_extents.x());
        const Eigen::Vector2d ey(-s * half_extents.y(), c * half_extents.y());
        const Eigen::Vector2d o(center.x(), center.y());
        return {o - ex - ey, o + ex - ey, o + ex + ey, o - ex + ey};
    }
};

namespace detail {

// Sutherland-Hodgman clip of a convex polygon against one axis-aligned half-plane.
inline std::vector<Eigen::Vector2d> clip_half_plane(const std::vector<Eigen::Vector2d> &poly, int axis, double bound,
                                                    bool keep_below) {
    std::vector<Eigen::Vector2d> out;
    if (poly.empty()) return out;
    const auto inside = [&](const Eigen::Vector2d &p) { return keep_below ? p[axis] <= bound : p[axis] >= bound; };
    for (std::size_t n = 0; n < poly.size(); ++n) {
        const auto &cur = poly[n];
        const auto &prev = poly[(n + poly.size() - 1) % poly.size()];
        const bool cin = inside(cur), pin = inside(prev);
        if (cin != pin) {
            const double t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
            Eigen::Vector2d x = prev + t * (cur - prev);
            x[axis] = bound;
            out.push_back(x);
        }
        if (cin) out.push_back(cur);
    }
    return out;
}

inline double polygon_area(const std::vector<Eigen::Vector2d> &poly) {
    double twice = 0.0;
    for (std::size_t n = 0; n < poly.size(); ++n) {
        const auto &a = poly[n];
        const auto &b = poly[(n + 1) % poly.size()];
        twice += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * std::abs(twice);
}

} // namespace detail

/// Fraction of a lattice cell's volume covered by the box, computed exactly:
/// the box is a vertical prism, so the fraction is (footprint area clipped to the cell square)
/// times (vertical overlap), each normalized by the cell's size.
inline double box_cell_fraction(const LatticeFrame &frame, const VoxelCoord &c, const OrientedBox &box) {
    const Vec3 lo = frame.cell_min(c), hi = frame.cell_max(c);
    const double z0 = std::max(lo.z(), box.center.z() - box.half_extents.z());
    const double z1 = std::min(hi.z(), box.center.z() + box.half_extents.z());
    if (z1 <= z0) return 0.0;
    const auto fp = box.footprint();
    std::vector<Eigen::Vector2d> poly(fp.begin(), fp.end());
    poly = detail::clip_half_plane(poly, 0, lo.x(), false);
    poly = detail::clip_half_plane(poly, 0, hi.x(), true);
    poly = detail::clip_half_plane(poly, 1, lo.y(), false);
    poly = detail::clip_half_plane(poly, 1, hi.y(), true);
    if (poly.size() < 3) return 0.0;
    const double s = frame.voxel_size;
    const double frac = detail::polygon_area(poly) / (s * s) * (z1 - z0) / s;
    return std::clamp(frac, 0.0, 1.0);
}

struct CellFraction {
    VoxelCoord coord;
    double fraction = 0.0;
};

/// Every cell with nonzero coverage by the box, in sorted coordinate order.
inline std::vector<CellFraction> box_cell_fractions(const LatticeFrame &frame, const OrientedBox &box) {
    if (!(box.half_extents.array() > 0.0).all()) throw std::invalid_argument("box half extents must be positive");
    const Vec3 h = box.aabb_half_extents();
    const VoxelCoord a = frame.coord_of(box.center - h);
    const VoxelCoord b = frame.coord_of(box.center + h);
    std::vector<CellFraction> out;
    for (std::int32_t i = a.i; i <= b.i; ++i)
        for (std::int32_t j = a.j; j <= b.j; ++j)
            for (std::int32_t k = a.k; k <= b.k; ++k) {
                const VoxelCoord c{i, j, k};
                const double f = box_cell_fraction(frame, c, box);
                if (f > 0.0) out.push_back({c, f});
            }
    return out;
}

/// Marks voxels whose covered volume fraction is at least `min_fraction`.
inline void voxelize_box(SparseVoxelGrid &grid, const OrientedBox &box, const SemanticVoxel &value,
                         double min_fraction) {
    if (!(min_fraction > 0.0 && min_fraction <= 1.0)) throw std::invalid_argument("min_fraction must be in (0, 1]");
    for (const auto &cf : box_cell_fractions(grid.frame(), box)) {
        if (cf.fraction >= min_fraction) grid.set(cf.coord, value);
    }
}

} // namespace voxworld
