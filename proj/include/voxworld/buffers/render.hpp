// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/buffers/camera.hpp"
#include "voxworld/buffers/image.hpp"
#include "voxworld/buffers/palette.hpp"
#include "voxworld/buffers/raycast.hpp"
#include "voxworld/conditions/hd_map.hpp"
#include "voxworld/core/parallel.hpp"

#include <algorithm>
#include <random>

namespace voxworld::buffers {

/// A moving object: voxels in its box frame (origin at the box center, x along the heading)
/// and the track that poses it over time.
struct DynamicObject {
    conditions::BoxTrack track;
    SparseVoxelGrid canonical;
};

struct RenderOptions {
    /// Coordinate normalization constant K in meters.
    double normalization = 100.0;
    /// Frames per normalization window.
    int window = 25;
    double max_range = 300.0;
};

struct GuidanceBufferSet {
    /// Palette colors in [0, 1] before rescaling.
    Image<double> semantic_rgb;
    /// semantic_rgb rescaled to [-1, 1].
    Image<double> semantic;
    /// (hit voxel center - window centroid) / K, clamped to [-1, 1]; 0 on misses.
    Image<double> coordinate;
    /// Camera-frame z of the hit entry point in meters; 0 on misses.
    Image<double> depth;
    /// Vehicle instance id of the hit voxel, -1 otherwise.
    Image<std::int32_t> instance;
    /// Miss pixels whose ray points above the horizon.
    Mask sky;
    /// depth == 0 and not sky.
    Mask midground;
    int window_index = 0;
    Vec3 window_centroid = Vec3::Zero();
};

inline Mask mid_ground_mask(const Image<double> &depth, const Mask &sky) {
    if (!sky.same_shape(depth.width(), depth.height())) throw std::invalid_argument("mid_ground_mask: shape mismatch");
    Mask out(depth.width(), depth.height(), 1, 0);
    for (std::size_t n = 0; n < out.pixel_count(); ++n) out.values()[n] = depth.values()[n] == 0.0 && !sky.values()[n];
    return out;
}

inline Mask mid_ground_mask(const GuidanceBufferSet &buffers, const Mask &sky) { return mid_ground_mask(buffers.depth, sky); }

/// Zeroes each non-overlapping patch x patch tile independently with probability p, tiles in
/// row-major order. Partial tiles at the right and bottom edges count as tiles.
inline Image<double> mask_depth_patches(const Image<double> &depth, int patch, double p, std::uint64_t seed) {
    if (patch <= 0) throw std::invalid_argument("patch size must be positive");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mask probability must be in [0, 1]");
    Image<double> out = depth;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int pv = 0; pv < depth.height(); pv += patch) {
        for (int pu = 0; pu < depth.width(); pu += patch) {
            if (!(uniform(rng) < p)) continue;
            for (int v = pv; v < std::min(pv + patch, depth.height()); ++v)
                for (int u = pu; u < std::min(pu + patch, depth.width()); ++u)
                    for (int c = 0; c < depth.channels(); ++c) out.at(u, v, c) = 0.0;
        }
    }
    return out;
}

/// Immutable scene prepared for repeated rendering. `world` must outlive the renderer.
class BufferRenderer {
  public:
    BufferRenderer(const SparseVoxelGrid &world, std::vector<DynamicObject> dynamic, RenderOptions opts = {})
        : world_(world), world_caster_(world), dynamic_(std::move(dynamic)), opts_(opts) {
        if (!(opts_.normalization > 0.0)) throw ConfigError("coordinate normalization must be positive");
        if (opts_.window <= 0) throw ConfigError("window length must be positive");
        for (const auto &obj : dynamic_) {
            obj.track.validate();
            dynamic_casters_.emplace_back(obj.canonical);
        }
    }

    [[nodiscard]] const RenderOptions &options() const { return opts_; }

    /// Mean camera position of each window of `options().window` consecutive frames.
    [[nodiscard]] std::vector<Vec3> window_centroids(const Trajectory &traj) const {
        std::vector<Vec3> out;
        for (std::size_t start = 0; start < traj.frames.size(); start += static_cast<std::size_t>(opts_.window)) {
            const std::size_t stop = std::min(traj.frames.size(), start + static_cast<std::size_t>(opts_.window));
            Vec3 sum = Vec3::Zero();
            for (std::size_t n = start; n < stop; ++n) sum += traj.frames[n].camera.position();
            out.push_back(sum / static_cast<double>(stop - start));
        }
        return out;
    }

    /// Nearest hit over the static world and every dynamic object active at time t.
    struct Hit {
        double distance;
        Vec3 center;  // world-space voxel center
        SemanticVoxel voxel;
    };

    [[nodiscard]] std::optional<Hit> trace(const Vec3 &origin, const Vec3 &dir, double t) const {
        std::optional<Hit> best;
        if (auto h = world_caster_.cast(origin, dir, opts_.max_range)) {
            best = Hit{h->distance, world_.cell_center(h->coord), *world_.query(h->coord)};
        }
        for (std::size_t n = 0; n < dynamic_.size(); ++n) {
            const auto pose = dynamic_[n].track.pose_at(t);
            if (!pose) continue;
            const Rigid world_from_box = yaw_pose(pose->center, pose->heading);
            const Rigid box_from_world = world_from_box.inverse();
            const auto h = dynamic_casters_[n].cast(box_from_world * origin, box_from_world.linear() * dir, opts_.max_range);
            if (!h || (best && !(h->distance < best->distance))) continue;
            auto voxel = *dynamic_[n].canonical.query(h->coord);
            if (is_vehicle(voxel.label())) voxel = SemanticVoxel(voxel.label(), dynamic_[n].track.instance_id);
            best = Hit{h->distance, world_from_box * dynamic_[n].canonical.cell_center(h->coord), voxel};
        }
        return best;
    }

    [[nodiscard]] GuidanceBufferSet render_frame(const TimedCamera &frame, const Vec3 &centroid, int window_index = 0) const {
        const Camera &cam = frame.camera;
        GuidanceBufferSet out;
        out.semantic_rgb = Image<double>(cam.width, cam.height, 3);
        out.semantic = Image<double>(cam.width, cam.height, 3);
        out.coordinate = Image<double>(cam.width, cam.height, 3, 0.0);
        out.depth = Image<double>(cam.width, cam.height, 1, 0.0);
        out.instance = Image<std::int32_t>(cam.width, cam.height, 1, -1);
        out.sky = Mask(cam.width, cam.height, 1, 0);
        out.window_index = window_index;
        out.window_centroid = centroid;
        const Vec3 origin = cam.position();
        const Vec3 up = Vec3::UnitZ();
        parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t row) {
            const int v = static_cast<int>(row);
            for (int u = 0; u < cam.width; ++u) {
                const Vec3 dir = cam.ray_direction(u, v);
                const auto hit = trace(origin, dir, frame.t);
                Rgb color = miss_color();
                if (hit) {
                    color = voxel_color(hit->voxel);
                    out.depth.at(u, v) = hit->distance / cam.camera_direction(u, v).norm();
                    if (const auto id = hit->voxel.instance_id()) out.instance.at(u, v) = *id;
                    const Vec3 c = coordinate_value(hit->center, centroid);
                    for (int k = 0; k < 3; ++k) out.coordinate.at(u, v, k) = c[k];
                } else {
                    out.sky.at(u, v) = dir.dot(up) > 0.0;
                }
                for (int k = 0; k < 3; ++k) {
                    out.semantic_rgb.at(u, v, k) = color[k];
                    out.semantic.at(u, v, k) = 2.0 * color[k] - 1.0;
                }
            }
        });
        out.midground = mid_ground_mask(out.depth, out.sky);
        return out;
    }

    [[nodiscard]] Vec3 coordinate_value(const Vec3 &world_center, const Vec3 &centroid) const {
        return ((world_center - centroid) / opts_.normalization).cwiseMax(-1.0).cwiseMin(1.0);
    }

    [[nodiscard]] std::vector<GuidanceBufferSet> render(const Trajectory &traj) const {
        traj.validate();
        const auto centroids = window_centroids(traj);
        std::vector<GuidanceBufferSet> out;
        out.reserve(traj.frames.size());
        for (std::size_t n = 0; n < traj.frames.size(); ++n) {
            const int w = static_cast<int>(n / static_cast<std::size_t>(opts_.window));
            out.push_back(render_frame(traj.frames[n], centroids[static_cast<std::size_t>(w)], w));
        }
        return out;
    }

  private:
    const SparseVoxelGrid &world_;
    VoxelRaycaster world_caster_;
    std::vector<DynamicObject> dynamic_;
    std::vector<VoxelRaycaster> dynamic_casters_;
    RenderOptions opts_;
};

inline std::vector<GuidanceBufferSet> render_buffers(const SparseVoxelGrid &world, std::vector<DynamicObject> dynamic,
                                                     const Trajectory &traj, const RenderOptions &opts = {}) {
    return BufferRenderer(world, std::move(dynamic), opts).render(traj);
}

} // namespace voxworld::buffers
