// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/gaussians/predictor.hpp"
#include "voxworld/gaussians/scene.hpp"

#include <set>

namespace voxworld::gaussians {

struct CompositeOptions {
    /// The pixel branch runs on every `pixel_stride`-th frame, starting at frame 0.
    int pixel_stride = 4;
    /// Halve the world voxel size before the voxel branch.
    bool subdivide = true;
    double box_dilation = kObjectBoxDilation;
    double z_near = kZNear;
    double z_far = kZFar;
};

/// World voxels without the tracked vehicles: vehicle voxels whose instance id has a track are dropped.
inline SparseVoxelGrid static_voxels(const SparseVoxelGrid &world, std::span<const conditions::BoxTrack> tracks) {
    std::set<std::int32_t> ids;
    for (const auto &t : tracks) ids.insert(t.instance_id);
    SparseVoxelGrid out(world.frame());
    for (const auto &[c, voxel] : world) {
        const auto id = voxel.instance_id();
        if (id && ids.count(*id)) continue;
        out.set(c, voxel);
    }
    return out;
}

/// Static part: voxel-branch Gaussians over static voxels plus pixel-branch Gaussians at mid-ground
/// pixels of every `pixel_stride`-th frame. Pixels carrying a tracked instance id feed that object's
/// extraction instead. The sky vector is encoded from the sky patches of the first frame.
inline GaussianScene composite_scene(const SparseVoxelGrid &world, std::span<const PredictorFrame> frames,
                                     AttributePredictor &predictor, std::span<const conditions::BoxTrack> tracks,
                                     const std::optional<SkyModelParams> &sky_params = std::nullopt,
                                     const CompositeOptions &opts = {}) {
    if (opts.pixel_stride <= 0) throw ConfigError("pixel stride must be positive");
    for (const auto &f : frames) check_frame(f);
    for (const auto &t : tracks) t.validate();
    std::set<std::int32_t> tracked;
    for (const auto &t : tracks) tracked.insert(t.instance_id);

    GaussianScene scene;
    const SparseVoxelGrid base = static_voxels(world, tracks);
    const SparseVoxelGrid grid = opts.subdivide ? subdivide(base) : base;
    if (!grid.empty()) scene.static_gaussians = decode_voxel_gaussians(grid, predictor.predict_voxels(grid, frames));

    std::vector<FrameGaussians> dynamic_frames;
    for (std::size_t n = 0; n < frames.size(); n += static_cast<std::size_t>(opts.pixel_stride)) {
        const auto &f = frames[n];
        const auto &cam = f.camera.camera;
        const auto params = predictor.predict_pixels(f);
        auto gaussians = decode_pixel_gaussians(params, cam, opts.z_near, opts.z_far);
        FrameGaussians dyn{f.camera.t, {}, f.buffers->instance};
        dyn.gaussians.resize(gaussians.size());
        bool any_dynamic = false;
        for (std::size_t px = 0; px < params.pixel_count(); ++px) {
            const std::int32_t id = f.buffers->instance.values()[px];
            const bool is_dynamic = id >= 0 && tracked.count(id) != 0;
            const bool keep_static = !is_dynamic && f.buffers->midground.values()[px] != 0;
            for (int k = 0; k < kGaussiansPerPixel; ++k) {
                const std::size_t g = px * kGaussiansPerPixel + k;
                if (is_dynamic) {
                    dyn.gaussians[g] = gaussians[g];
                    any_dynamic = true;
                } else if (keep_static) {
                    scene.static_gaussians.push_back(gaussians[g]);
                }
            }
        }
        if (any_dynamic) dynamic_frames.push_back(std::move(dyn));
    }

    for (const auto &track : tracks) {
        GaussianObject obj;
        obj.instance_id = track.instance_id;
        obj.track = track;
        obj.canonical = extract_dynamic_object(dynamic_frames, track, opts.box_dilation);
        scene.objects.push_back(std::move(obj));
    }

    if (sky_params) {
        scene.sky.params = sky_params;
        scene.sky.c = frames.empty() ? sky_params->query
                                     : sky_encode(*sky_params, sky_patches(*frames.front().image, frames.front().buffers->sky,
                                                                          frames.front().camera.camera));
    }
    return scene;
}

} // namespace voxworld::gaussians
