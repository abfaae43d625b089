// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/errors.hpp"
#include "voxworld/core/geometry.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace voxworld::buffers {

/// Pinhole camera, OpenCV axes (x right, y down, z forward). `pose` maps camera to world.
/// Pixel (u, v) covers [u, u+1) x [v, v+1); its ray passes through the pixel center.
struct Camera {
    double fx = 256.0;
    double fy = 256.0;
    double cx = 256.0;
    double cy = 144.0;
    int width = 512;
    int height = 288;
    Rigid pose = Rigid::Identity();

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera focal lengths must be positive");
        if (width <= 0 || height <= 0) throw ConfigError("camera image size must be positive");
        if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
            throw ConfigError("camera principal point must lie inside the image");
        }
        const Mat3 r = pose.linear();
        if (!((r.transpose() * r - Mat3::Identity()).norm() < 1e-6) || !(r.determinant() > 0.0) ||
            !pose.translation().allFinite()) {
            throw ConfigError("camera pose must be a proper rigid transform");
        }
    }

    [[nodiscard]] Vec3 position() const { return pose.translation(); }

    /// Un-normalized camera-frame direction through the pixel center; its z component is 1.
    [[nodiscard]] Vec3 camera_direction(int u, int v) const {
        return {(u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0};
    }

    /// Unit world-space ray direction through pixel (u, v).
    [[nodiscard]] Vec3 ray_direction(int u, int v) const { return (pose.linear() * camera_direction(u, v)).normalized(); }

    /// Camera-frame depth (z) of a world point.
    [[nodiscard]] double depth_of(const Vec3 &world) const { return (pose.inverse() * world).z(); }

    /// Continuous pixel coordinates and depth of a world point; nullopt behind the camera.
    [[nodiscard]] std::optional<Eigen::Vector3d> project(const Vec3 &world) const {
        const Vec3 p = pose.inverse() * world;
        if (!(p.z() > 0.0)) return std::nullopt;
        return Eigen::Vector3d(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy, p.z());
    }
};

struct TimedCamera {
    double t = 0.0;
    Camera camera;
};

struct Trajectory {
    std::vector<TimedCamera> frames;

    void validate() const {
        if (frames.empty()) throw ConfigError("trajectory needs at least one frame");
        for (std::size_t n = 0; n < frames.size(); ++n) {
            frames[n].camera.validate();
            if (!std::isfinite(frames[n].t)) throw ConfigError("trajectory timestamp is not finite");
            if (n > 0 && !(frames[n].t > frames[n - 1].t)) throw ConfigError("trajectory timestamps must strictly increase");
        }
    }
};

// Trajectory file: {"version": 1, "frames": [{"t": s, "camera": {"fx", "fy", "cx", "cy", "width", "height",
// "pose": [16 numbers, row-major 4x4 camera-to-world]}}]}

inline nlohmann::json camera_to_json(const Camera &cam) {
    nlohmann::json pose = nlohmann::json::array();
    const Eigen::Matrix4d m = cam.pose.matrix();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) pose.push_back(m(r, c));
    return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
            {"width", cam.width}, {"height", cam.height}, {"pose", pose}};
}

inline Camera camera_from_json(const nlohmann::json &j) {
    Camera cam;
    try {
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        const auto &pose = j.at("pose");
        if (!pose.is_array() || pose.size() != 16) throw ConfigError("camera pose must have 16 entries");
        Eigen::Matrix4d m;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) m(r, c) = pose.at(static_cast<std::size_t>(r * 4 + c)).get<double>();
        if (m.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) throw ConfigError("camera pose bottom row must be 0 0 0 1");
        cam.pose.matrix() = m;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("invalid camera: ") + e.what());
    }
    cam.validate();
    return cam;
}

inline nlohmann::json trajectory_to_json(const Trajectory &traj) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto &f : traj.frames) frames.push_back({{"t", f.t}, {"camera", camera_to_json(f.camera)}});
    return {{"version", 1}, {"frames", frames}};
}

inline Trajectory trajectory_from_json(const nlohmann::json &j) {
    if (j.value("version", 0) != 1) throw ConfigError("unsupported trajectory version");
    Trajectory traj;
    try {
        for (const auto &f : j.at("frames")) traj.frames.push_back({f.at("t").get<double>(), camera_from_json(f.at("camera"))});
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("invalid trajectory: ") + e.what());
    }
    traj.validate();
    return traj;
}

/// Camera looking along heading `yaw` (world x forward at yaw 0, z up), with horizontal field of view `hfov`.
inline Camera forward_camera(const Vec3 &position, double yaw, int width, int height, double hfov) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * hfov);
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    Mat3 body_from_cam;  // camera x right, y down, z forward in a vehicle frame with x forward, z up
    body_from_cam << 0, 0, 1, -1, 0, 0, 0, -1, 0;
    cam.pose = Rigid::Identity();
    cam.pose.linear() = yaw_rotation(yaw) * body_from_cam;
    cam.pose.translation() = position;
    return cam;
}

} // namespace voxworld::buffers
