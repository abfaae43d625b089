// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/buffers/image.hpp"
#include "voxworld/conditions/hd_map.hpp"
#include "voxworld/gaussians/gaussian.hpp"
#include "voxworld/gaussians/sky.hpp"

#include <vector>

namespace voxworld::gaussians {

/// A moving object: Gaussians in its box frame and the track that poses them.
struct GaussianObject {
    std::int32_t instance_id = 0;
    std::vector<Gaussian3D> canonical;
    conditions::BoxTrack track;
};

struct GaussianScene {
    std::vector<Gaussian3D> static_gaussians;
    std::vector<GaussianObject> objects;
    SkyState sky;

    [[nodiscard]] const GaussianObject *find_object(std::int32_t id) const {
        for (const auto &o : objects)
            if (o.instance_id == id) return &o;
        return nullptr;
    }
};

/// World-from-box transform of a track at time t; nullopt outside the track's span.
inline std::optional<Rigid> track_pose(const conditions::BoxTrack &track, double t) {
    const auto pose = track.pose_at(t);
    if (!pose) return std::nullopt;
    return yaw_pose(pose->center, pose->heading);
}

/// A Gaussian in world space at time t, tagged with its object (-1 = static).
struct PosedGaussian {
    Gaussian3D gaussian;
    std::int32_t instance_id = -1;
};

/// Static Gaussians followed by every object active at t, each posed by its track.
inline std::vector<PosedGaussian> posed_gaussians(const GaussianScene &scene, double t) {
    std::vector<PosedGaussian> out;
    out.reserve(scene.static_gaussians.size());
    for (const auto &g : scene.static_gaussians) out.push_back({g, -1});
    for (const auto &obj : scene.objects) {
        const auto pose = track_pose(obj.track, t);
        if (!pose) continue;
        for (const auto &g : obj.canonical) out.push_back({g.transformed(*pose), obj.instance_id});
    }
    return out;
}

/// New scene with the object's pose track replaced; canonical Gaussians are untouched.
inline GaussianScene transform_dynamic(const GaussianScene &scene, std::int32_t instance_id,
                                       const conditions::BoxTrack &new_track) {
    new_track.validate();
    GaussianScene out = scene;
    for (auto &obj : out.objects) {
        if (obj.instance_id != instance_id) continue;
        obj.track = new_track;
        obj.track.instance_id = instance_id;
        return out;
    }
    throw UnknownInstance("no dynamic object with instance id " + std::to_string(instance_id));
}

/// Applies a planar rigid motion (rotation `yaw` about z, then translation) to every pose of a track.
inline conditions::BoxTrack move_track(const conditions::BoxTrack &track, const Vec3 &translation, double yaw) {
    conditions::BoxTrack out = track;
    const Mat3 r = yaw_rotation(yaw);
    for (auto &p : out.poses) {
        p.center = r * p.center + translation;
        p.heading = wrap_angle(p.heading + yaw);
    }
    return out;
}

/// Pixel-branch Gaussians of one frame with the frame's instance buffer.
/// `gaussians` holds kGaussiansPerPixel entries per pixel in row-major pixel order.
struct FrameGaussians {
    double t = 0.0;
    std::vector<Gaussian3D> gaussians;
    buffers::Image<std::int32_t> instance;
};

inline constexpr double kObjectBoxDilation = 1.05;

/// Gathers the pixel Gaussians labeled with the track's instance id, moves them into the canonical
/// box frame through the inverse pose of their frame, and keeps those inside the dilated box.
inline std::vector<Gaussian3D> extract_dynamic_object(std::span<const FrameGaussians> frames,
                                                      const conditions::BoxTrack &track,
                                                      double dilation = kObjectBoxDilation) {
    const Vec3 half = dilation * track.half_extents();
    std::vector<Gaussian3D> out;
    for (const auto &frame : frames) {
        if (frame.gaussians.size() != frame.instance.pixel_count() * kGaussiansPerPixel) {
            throw std::invalid_argument("frame Gaussians do not match the instance buffer");
        }
        const auto pose = track_pose(track, frame.t);
        if (!pose) continue;
        const Rigid box_from_world = pose->inverse();
        for (std::size_t px = 0; px < frame.instance.pixel_count(); ++px) {
            if (frame.instance.values()[px] != track.instance_id) continue;
            for (int k = 0; k < kGaussiansPerPixel; ++k) {
                const Gaussian3D g = frame.gaussians[px * kGaussiansPerPixel + k].transformed(box_from_world);
                if ((g.position.cwiseAbs().array() <= half.array()).all()) out.push_back(g);
            }
        }
    }
    return out;
}

} // namespace voxworld::gaussians
